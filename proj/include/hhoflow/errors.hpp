#pragma once

#include <stdexcept>
#include <string>

namespace hhoflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define HHOFLOW_ERROR(Name)                                                    \
    struct Name : Error {                                                      \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {}   \
    }

HHOFLOW_ERROR(ParseError);
HHOFLOW_ERROR(TopologyError);
HHOFLOW_ERROR(StarShapeError);
HHOFLOW_ERROR(UnsupportedDegree);
HHOFLOW_ERROR(QuadratureDeficit);
HHOFLOW_ERROR(SingularGram);
HHOFLOW_ERROR(SaddleSingular);
HHOFLOW_ERROR(ContractionFailure);
HHOFLOW_ERROR(NotInteriorFace);
HHOFLOW_ERROR(TransportNotDivergenceFree);
HHOFLOW_ERROR(ExtrapolantNotDivFree);
HHOFLOW_ERROR(LinearSolveFailure);
HHOFLOW_ERROR(InsufficientHistory);
HHOFLOW_ERROR(ConfigError);

#undef HHOFLOW_ERROR

} // namespace hhoflow

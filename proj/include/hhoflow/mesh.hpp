#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "quadrature.hpp"

namespace hhoflow {

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Outward unit normal of the edge p -> q of a counter-clockwise polygon.
inline Vec2 edge_normal(const Vec2& p, const Vec2& q) {
    const Vec2 d = q - p;
    return Vec2(d.y(), -d.x()) / d.norm();
}

struct Simplex {
    std::array<Vec2, 3> x; // x[0] is the element star center
    double area = 0;
    double diameter = 0;
};

struct SimplicialFace {
    Vec2 a, b;
    Vec2 normal; // n_sigma: outward from tau1 (interior) or from the element (boundary)
    double length = 0;
    int tau1 = -1;
    int tau2 = -1; // -1 on the element boundary
    int face = -1; // element-local face index, boundary sfaces only

    bool is_interior() const { return tau2 >= 0; }
};

struct SubMesh {
    std::vector<Simplex> triangles;
    std::vector<SimplicialFace> interior_sfaces;
    std::vector<std::vector<SimplicialFace>> boundary_sfaces; // indexed by element-local face
};

struct Element {
    std::vector<int> vertex_ids; // counter-clockwise loop
    std::vector<int> face_ids;   // face i joins vertex i and vertex i+1
    std::vector<int> face_sign;  // n_TF = face_sign[i] * faces[face_ids[i]].normal
    Vec2 center;                 // x_T
    double diameter = 0;
    double area = 0;
    SubMesh submesh;

    std::size_t n_faces() const { return face_ids.size(); }
};

struct Face {
    std::array<int, 2> vertex_ids{-1, -1}; // ordered as traversed by elements[0]
    std::array<int, 2> elements{-1, -1};   // elements[0] < elements[1]
    std::array<int, 2> local_index{-1, -1};
    Vec2 a, b;
    Vec2 normal; // outward from elements[0]
    Vec2 center;
    double length = 0;

    bool is_boundary() const { return elements[1] < 0; }
};

struct PolyMesh {
    std::vector<Vec2> vertices;
    std::vector<Element> elements;
    std::vector<Face> faces;
    std::vector<int> boundary_face_ids;
    std::vector<int> interior_face_ids;
    double h = 0;

    std::size_t n_elements() const { return elements.size(); }
    std::size_t n_faces() const { return faces.size(); }
};

// Fan triangulation of a polygon from x_T. Interior sface i is [x_T, v_i], shared by
// triangles i-1 and i; boundary sface i is polygon face i and lies in triangle i.
inline SubMesh build_submesh(const std::vector<Vec2>& loop, const Vec2& x_T) {
    const int n = static_cast<int>(loop.size());
    SubMesh sm;
    sm.triangles.resize(n);
    for (int i = 0; i < n; ++i) {
        const Vec2& p = loop[i];
        const Vec2& q = loop[(i + 1) % n];
        Simplex& t = sm.triangles[i];
        t.x = {x_T, p, q};
        t.area = 0.5 * cross2(p - x_T, q - x_T);
        if (!(t.area > 0))
            throw StarShapeError("fan triangle " + std::to_string(i) + " has non-positive area " +
                                 std::to_string(t.area));
        t.diameter = std::max({(p - x_T).norm(), (q - x_T).norm(), (q - p).norm()});
    }
    sm.interior_sfaces.resize(n);
    for (int i = 0; i < n; ++i) {
        SimplicialFace& s = sm.interior_sfaces[i];
        const int prev = (i + n - 1) % n;
        s.a = x_T;
        s.b = loop[i];
        s.length = (s.b - s.a).norm();
        s.tau1 = std::min(prev, i);
        s.tau2 = std::max(prev, i);
        // triangle i traverses x_T -> v_i, triangle i-1 traverses v_i -> x_T
        const Vec2 n_i = edge_normal(x_T, loop[i]);
        s.normal = (s.tau1 == i) ? n_i : Vec2(-n_i);
    }
    sm.boundary_sfaces.resize(n);
    for (int i = 0; i < n; ++i) {
        SimplicialFace s;
        s.a = loop[i];
        s.b = loop[(i + 1) % n];
        s.length = (s.b - s.a).norm();
        s.normal = edge_normal(s.a, s.b);
        s.tau1 = i;
        s.face = i;
        sm.boundary_sfaces[i].push_back(s);
    }
    return sm;
}

inline double polygon_signed_area(const std::vector<Vec2>& loop) {
    double a = 0;
    for (std::size_t i = 0; i < loop.size(); ++i) a += cross2(loop[i], loop[(i + 1) % loop.size()]);
    return 0.5 * a;
}

// Builds faces, orientation data and submeshes; validates the invariants.
inline PolyMesh build_mesh(std::vector<Vec2> vertices, const std::vector<std::vector<int>>& cells) {
    PolyMesh mesh;
    mesh.vertices = std::move(vertices);
    const int nv = static_cast<int>(mesh.vertices.size());
    std::map<std::pair<int, int>, int> edge_to_face;

    for (std::size_t e = 0; e < cells.size(); ++e) {
        const auto& ids = cells[e];
        const std::string tag = "element " + std::to_string(e);
        if (ids.size() < 3) throw TopologyError(tag + " has fewer than 3 vertices");
        std::vector<Vec2> loop;
        for (int v : ids) {
            if (v < 0 || v >= nv) throw TopologyError(tag + " references vertex " + std::to_string(v));
            loop.push_back(mesh.vertices[v]);
        }
        Element el;
        el.vertex_ids = ids;
        el.area = polygon_signed_area(loop);
        if (!(el.area > 0)) throw TopologyError(tag + " is not counter-clockwise or is degenerate");
        el.center = Vec2::Zero();
        for (const auto& p : loop) el.center += p;
        el.center /= static_cast<double>(loop.size());
        for (std::size_t i = 0; i < loop.size(); ++i)
            for (std::size_t j = i + 1; j < loop.size(); ++j)
                el.diameter = std::max(el.diameter, (loop[i] - loop[j]).norm());
        try {
            el.submesh = build_submesh(loop, el.center);
        } catch (const StarShapeError& err) {
            throw StarShapeError(tag + ": " + err.what());
        }

        const int m = static_cast<int>(ids.size());
        for (int i = 0; i < m; ++i) {
            const int v0 = ids[i], v1 = ids[(i + 1) % m];
            if (v0 == v1) throw TopologyError(tag + " has a repeated vertex");
            const auto key = std::minmax(v0, v1);
            auto it = edge_to_face.find(key);
            if (it == edge_to_face.end()) {
                Face f;
                f.vertex_ids = {v0, v1};
                f.elements[0] = static_cast<int>(e);
                f.local_index[0] = i;
                f.a = mesh.vertices[v0];
                f.b = mesh.vertices[v1];
                f.normal = edge_normal(f.a, f.b);
                f.center = 0.5 * (f.a + f.b);
                f.length = (f.b - f.a).norm();
                const int id = static_cast<int>(mesh.faces.size());
                mesh.faces.push_back(f);
                edge_to_face.emplace(key, id);
                el.face_ids.push_back(id);
                el.face_sign.push_back(1);
            } else {
                Face& f = mesh.faces[it->second];
                if (f.elements[1] >= 0)
                    throw TopologyError("face (" + std::to_string(key.first) + ", " +
                                        std::to_string(key.second) + ") shared by more than 2 elements");
                if (f.elements[0] == static_cast<int>(e))
                    throw TopologyError(tag + " uses the same face twice");
                if (f.vertex_ids[0] != v1)
                    throw TopologyError("inconsistent orientation across face (" + std::to_string(key.first) +
                                        ", " + std::to_string(key.second) + ")");
                f.elements[1] = static_cast<int>(e);
                f.local_index[1] = i;
                el.face_ids.push_back(it->second);
                el.face_sign.push_back(-1);
            }
        }
        mesh.h = std::max(mesh.h, el.diameter);
        mesh.elements.push_back(std::move(el));
    }
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        (mesh.faces[f].is_boundary() ? mesh.boundary_face_ids : mesh.interior_face_ids).push_back(static_cast<int>(f));
    return mesh;
}

inline PolyMesh generate_cartesian(int n) {
    if (n < 1) throw Error("generate_cartesian: n must be >= 1");
    std::vector<Vec2> vertices;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) vertices.emplace_back(double(i) / n, double(j) / n);
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    std::vector<std::vector<int>> cells;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
    return build_mesh(std::move(vertices), cells);
}

// Staggered rows of hexagons on (0,1)^2. Even rows hold m full cells, odd rows m-1 full
// cells plus a half cell at each end. Cells in the bottom and top rows are pentagons,
// half cells are quadrilaterals; every other cell is a hexagon.
inline PolyMesh generate_hexagonal_grid(int m, int r) {
    if (m < 1 || r < 1) throw Error("generate_hexagonal_grid: m, r must be >= 1");
    const int ns = 2 * m; // half-column lines s = 0..2m
    const double H = 1.0 / r;
    const double delta = H / 6.0;
    auto is_wall = [ns](int row, int s) {
        if (s == 0 || s == ns) return true;
        return (row % 2 == 0) ? (s % 2 == 0) : (s % 2 == 1);
    };
    // vertex ids per horizontal line j and half-column s (-1 if absent)
    std::vector<std::vector<int>> vid(r + 1, std::vector<int>(ns + 1, -1));
    std::vector<Vec2> vertices;
    for (int j = 0; j <= r; ++j) {
        for (int s = 0; s <= ns; ++s) {
            const bool below = j > 0 && is_wall(j - 1, s);
            const bool above = j < r && is_wall(j, s);
            if (!below && !above) continue;
            double y = j * H;
            if (j > 0 && j < r && s != 0 && s != ns) y += above ? delta : -delta;
            vid[j][s] = static_cast<int>(vertices.size());
            vertices.emplace_back(double(s) / ns, y);
        }
    }
    std::vector<std::vector<int>> cells;
    for (int j = 0; j < r; ++j) {
        std::vector<int> walls;
        for (int s = 0; s <= ns; ++s)
            if (is_wall(j, s)) walls.push_back(s);
        for (std::size_t c = 0; c + 1 < walls.size(); ++c) {
            const int sl = walls[c], sr = walls[c + 1];
            std::vector<int> loop;
            for (int s = sl; s <= sr; ++s)
                if (vid[j][s] >= 0) loop.push_back(vid[j][s]);
            for (int s = sr; s >= sl; --s)
                if (vid[j + 1][s] >= 0) loop.push_back(vid[j + 1][s]);
            cells.push_back(loop);
        }
    }
    return build_mesh(std::move(vertices), cells);
}

// Level 1 is a 7 x 3 staggered grid (22 cells); each level halves the cell size.
inline PolyMesh generate_hexagonal(int level) {
    if (level < 1) throw Error("generate_hexagonal: level must be >= 1");
    const int scale = 1 << (level - 1);
    return generate_hexagonal_grid(7 * scale, 3 * scale);
}

// poly-text format: "NV NE NF", NV lines "x y", NE lines "m v1 .. vm"; '#' starts a comment.
inline PolyMesh read_poly_text(std::istream& in, const std::string& source = "<stream>") {
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
    }
    std::size_t pos = 0;
    auto next_int = [&](const char* what) -> long {
        if (pos >= tokens.size()) throw ParseError(source + ": unexpected end of file reading " + what);
        const std::string& t = tokens[pos++];
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != t.size()) throw ParseError(source + ": expected integer for " + what + ", got '" + t + "'");
        return v;
    };
    auto next_double = [&](const char* what) -> double {
        if (pos >= tokens.size()) throw ParseError(source + ": unexpected end of file reading " + what);
        const std::string& t = tokens[pos++];
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != t.size() || !std::isfinite(v))
            throw ParseError(source + ": expected number for " + what + ", got '" + t + "'");
        return v;
    };
    const long nv = next_int("vertex count");
    const long ne = next_int("element count");
    const long nf = next_int("face count");
    if (nv < 3 || ne < 1 || nf < 0) throw ParseError(source + ": invalid header counts");
    std::vector<Vec2> vertices(nv);
    for (long i = 0; i < nv; ++i) {
        const double x = next_double("vertex x");
        const double y = next_double("vertex y");
        vertices[i] = Vec2(x, y);
    }
    std::vector<std::vector<int>> cells(ne);
    for (long e = 0; e < ne; ++e) {
        const long m = next_int("element size");
        if (m < 3) throw ParseError(source + ": element " + std::to_string(e) + " has fewer than 3 vertices");
        for (long i = 0; i < m; ++i) {
            const long v = next_int("vertex id");
            if (v < 0 || v >= nv) throw ParseError(source + ": vertex id " + std::to_string(v) + " out of range");
            cells[e].push_back(static_cast<int>(v));
        }
    }
    if (pos != tokens.size()) throw ParseError(source + ": trailing data after last element");
    PolyMesh mesh = build_mesh(std::move(vertices), cells);
    if (nf != 0 && static_cast<std::size_t>(nf) != mesh.faces.size())
        throw ParseError(source + ": header declares " + std::to_string(nf) + " faces, mesh has " +
                         std::to_string(mesh.faces.size()));
    return mesh;
}

enum class MeshFormat { poly_text };

inline PolyMesh load_mesh(const std::string& path, MeshFormat format = MeshFormat::poly_text) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    switch (format) {
    case MeshFormat::poly_text: return read_poly_text(in, path);
    }
    throw ParseError("unknown mesh format");
}

inline void write_poly_text(std::ostream& out, const PolyMesh& mesh) {
    out << mesh.vertices.size() << ' ' << mesh.elements.size() << ' ' << mesh.faces.size() << '\n';
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << '\n';
    for (const auto& el : mesh.elements) {
        out << el.vertex_ids.size();
        for (int v : el.vertex_ids) out << ' ' << v;
        out << '\n';
    }
}

} // namespace hhoflow

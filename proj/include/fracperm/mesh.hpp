#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "delaunay.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "network.hpp"

namespace fracperm {

/// One pair of coincident fracture-wall edges. The master wall lies to the
/// left of master[0] -> master[1]; `normal` points from master to slave.
struct FractureFace {
    std::array<int, 2> master;
    std::array<int, 2> slave;
    int segment = -1;  // network segment id
    Vec2 normal = Vec2::Zero();
};

struct ConformingMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<FractureFace> faces;
    /// Nodes carrying the zero-displacement constraint and the boundary side
    /// whose midpoint they sit on. Duplicated mid nodes appear once per copy.
    std::vector<int> constrained_nodes;
    std::vector<Side> constrained_sides;
    /// Geometric vertex each node was copied from (identity before duplication).
    std::vector<int> origin;
    Rect window;
    bool duplicated = false;

    double face_length(const FractureFace& f) const { return (nodes[f.master[1]] - nodes[f.master[0]]).norm(); }
    double signed_area(const std::array<int, 3>& t) const {
        return 0.5 * orient(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
    }
    double boundary_tolerance() const { return 1e-9 * std::max({1.0, window.width(), window.height()}); }
    unsigned boundary_sides(int node) const { return sides_touching(window, nodes[node], boundary_tolerance()); }
};

struct MeshOptions {
    double target_edge_length = 0.1;
    double min_angle_deg = 20.0;
    /// Fractures (not sharing a vertex) closer than this cannot be meshed.
    double min_feature_distance = 1e-6;
};

namespace detail {

/// Splits segment parameters at crossings of the flow-window outline so that
/// flow cells never straddle the window boundary.
inline std::vector<double> window_crossings(const Vec2& a, const Vec2& b, const Rect& w) {
    std::vector<double> ts;
    const Vec2 d = b - a;
    auto add = [&](double t) {
        if (t * d.norm() <= kMergeTolerance || (1 - t) * d.norm() <= kMergeTolerance) return;
        const Vec2 p = a + t * d;
        if (w.contains(p, kMergeTolerance)) ts.push_back(t);
    };
    if (d.x() != 0) {
        for (double x : {w.xmin, w.xmax}) {
            const double t = (x - a.x()) / d.x();
            if (t > 0 && t < 1) add(t);
        }
    }
    if (d.y() != 0) {
        for (double y : {w.ymin, w.ymax}) {
            const double t = (y - a.y()) / d.y();
            if (t > 0 && t < 1) add(t);
        }
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

}  // namespace detail

/// Conforming triangulation of the mechanical window. Every fracture segment
/// is a chain of triangle edges, and each window side has a node at its
/// midpoint. Faces are recorded with master == slave (pre-duplication).
inline ConformingMesh triangulate(const Domain& domain, const FractureNetwork& net, const MeshOptions& opt) {
    const Rect& w = domain.mech_window;
    const double h = opt.target_edge_length;
    if (!(h > 0)) throw InvalidArgument("triangulate: target_edge_length must be positive");
    if (!(w.width() > 0 && w.height() > 0)) throw MeshFailure("triangulate: mechanical window has zero extent");
    const double scale = std::max(w.width(), w.height());
    const double btol = 1e-9 * std::max(1.0, scale);

    for (const auto& p : net.points)
        if (!w.contains(p, btol)) throw MeshFailure("fracture vertex lies outside the mechanical window");
    for (int s = 0; s < int(net.segments.size()); ++s) {
        const unsigned sa = sides_touching(w, net.points[net.segments[s].ends[0]], btol);
        const unsigned sb = sides_touching(w, net.points[net.segments[s].ends[1]], btol);
        if (sa & sb) throw MeshFailure("fracture segment " + std::to_string(s) + " runs along the window boundary");
    }
    for (int s = 0; s < int(net.segments.size()); ++s)
        for (int t = s + 1; t < int(net.segments.size()); ++t) {
            const auto& A = net.segments[s].ends;
            const auto& B = net.segments[t].ends;
            if (A[0] == B[0] || A[0] == B[1] || A[1] == B[0] || A[1] == B[1]) continue;
            const double d = segment_segment_distance(net.points[A[0]], net.points[A[1]], net.points[B[0]],
                                                      net.points[B[1]]);
            if (d < opt.min_feature_distance)
                throw MeshFailure("fracture segments " + std::to_string(s) + " and " + std::to_string(t) +
                                  " are closer than " + std::to_string(opt.min_feature_distance) + " m");
        }

    const double area = w.width() * w.height();
    detail::RefiningTriangulator::Options topt;
    topt.max_edge = h;
    topt.min_angle_deg = opt.min_angle_deg;
    topt.min_length = std::min(1e-7, 0.1 * opt.min_feature_distance) * std::max(1.0, scale);
    topt.max_vertices = size_t(std::min(5e6, 40.0 * area / (h * h) + 40.0 * net.trace_length() / h + 2e4));
    detail::RefiningTriangulator tri(w, topt);

    // Boundary vertices: corners, midpoints, fracture vertices touching the window.
    const Vec2 c = w.center();
    std::array<std::vector<Vec2>, 4> side_pts;
    side_pts[int(Side::Left)] = {{w.xmin, w.ymin}, {w.xmin, c.y()}, {w.xmin, w.ymax}};
    side_pts[int(Side::Right)] = {{w.xmax, w.ymin}, {w.xmax, c.y()}, {w.xmax, w.ymax}};
    side_pts[int(Side::Bottom)] = {{w.xmin, w.ymin}, {c.x(), w.ymin}, {w.xmax, w.ymin}};
    side_pts[int(Side::Top)] = {{w.xmin, w.ymax}, {c.x(), w.ymax}, {w.xmax, w.ymax}};
    for (const auto& p : net.points) {
        const unsigned mask = sides_touching(w, p, btol);
        for (int s = 0; s < 4; ++s)
            if (mask & (1u << s)) side_pts[s].push_back(p);
    }

    std::map<std::pair<double, double>, int> vid;  // exact coordinates -> vertex
    std::vector<Vec2> order;
    auto vertex = [&](const Vec2& p, bool input) {
        auto key = std::make_pair(p.x(), p.y());
        auto it = vid.find(key);
        if (it != vid.end()) return it->second;
        const int v = tri.add_vertex(p, input) - detail::RefiningTriangulator::kOffset;
        vid.emplace(key, v);
        return v;
    };

    std::array<int, 4> mid_vertex{};
    for (int s = 0; s < 4; ++s) {
        auto& pts = side_pts[s];
        const bool vertical = s == int(Side::Left) || s == int(Side::Right);
        std::sort(pts.begin(), pts.end(), [&](const Vec2& a, const Vec2& b) {
            return vertical ? a.y() < b.y() : a.x() < b.x();
        });
        pts.erase(std::unique(pts.begin(), pts.end(),
                              [&](const Vec2& a, const Vec2& b) { return (a - b).norm() <= btol; }),
                  pts.end());
        std::vector<int> chain;
        for (size_t i = 0; i < pts.size(); ++i) {
            if (i > 0) {
                const Vec2 a = pts[i - 1], b = pts[i];
                const int n = std::max(1, int(std::ceil((b - a).norm() / h - 1e-9)));
                for (int k = 1; k < n; ++k) chain.push_back(vertex(a + (b - a) * (double(k) / n), false));
            }
            chain.push_back(vertex(pts[i], true));
        }
        const Vec2 mid = s < 2 ? Vec2(pts.front().x(), c.y()) : Vec2(c.x(), pts.front().y());
        const auto nearest = std::min_element(pts.begin(), pts.end(), [&](const Vec2& a, const Vec2& b) {
            return (a - mid).norm() < (b - mid).norm();
        });
        mid_vertex[s] = vid.at({nearest->x(), nearest->y()});
        for (size_t i = 0; i + 1 < chain.size(); ++i)
            tri.add_segment(chain[i] + detail::RefiningTriangulator::kOffset,
                            chain[i + 1] + detail::RefiningTriangulator::kOffset, -1 - s, true);
    }

    // Boundary-touching fracture points must reuse the boundary vertex.
    auto fracture_vertex = [&](const Vec2& p) {
        const unsigned mask = sides_touching(w, p, btol);
        if (mask) {
            for (int s = 0; s < 4; ++s)
                if (mask & (1u << s))
                    for (const auto& q : side_pts[s])
                        if ((q - p).norm() <= btol) return vertex(q, true);
        }
        return vertex(p, true);
    };

    for (int s = 0; s < int(net.segments.size()); ++s) {
        const Vec2 a = net.points[net.segments[s].ends[0]];
        const Vec2 b = net.points[net.segments[s].ends[1]];
        std::vector<double> ts{0.0};
        for (double t : detail::window_crossings(a, b, domain.flow_window)) ts.push_back(t);
        ts.push_back(1.0);
        std::vector<int> chain;
        for (size_t i = 0; i + 1 < ts.size(); ++i) {
            // a + 1.0 * (b - a) can miss b by an ulp; use the endpoints exactly.
            const Vec2 p = i == 0 ? a : a + ts[i] * (b - a);
            const Vec2 q = i + 2 == ts.size() ? b : a + ts[i + 1] * (b - a);
            if (i == 0) chain.push_back(fracture_vertex(p));
            const int n = std::max(1, int(std::ceil((q - p).norm() / h - 1e-9)));
            for (int k = 1; k < n; ++k) chain.push_back(vertex(p + (q - p) * (double(k) / n), false));
            chain.push_back(i + 2 == ts.size() ? fracture_vertex(q) : vertex(q, true));
        }
        for (size_t i = 0; i + 1 < chain.size(); ++i)
            tri.add_segment(chain[i] + detail::RefiningTriangulator::kOffset,
                            chain[i + 1] + detail::RefiningTriangulator::kOffset, s, false);
    }

    tri.refine();

    ConformingMesh mesh;
    mesh.window = w;
    mesh.nodes = tri.vertices();
    for (const auto& t : tri.triangles()) {
        // Triangles outside the window cannot survive boundary conformity;
        // discard any that would (zero-area slivers along the hull).
        const Vec2 centroid = (mesh.nodes[t[0]] + mesh.nodes[t[1]] + mesh.nodes[t[2]]) / 3.0;
        if (!w.contains(centroid)) continue;
        mesh.triangles.push_back(t);
    }
    for (const auto& s : tri.subsegments()) {
        if (s.boundary) continue;
        FractureFace f;
        f.master = f.slave = {s.a, s.b};
        f.segment = s.parent;
        const Vec2 d = (mesh.nodes[s.b] - mesh.nodes[s.a]).normalized();
        f.normal = Vec2(d.y(), -d.x());
        mesh.faces.push_back(f);
    }
    std::sort(mesh.faces.begin(), mesh.faces.end(), [](const FractureFace& l, const FractureFace& r) {
        return std::tie(l.segment, l.master[0], l.master[1]) < std::tie(r.segment, r.master[0], r.master[1]);
    });
    for (int s = 0; s < 4; ++s) {
        mesh.constrained_nodes.push_back(mid_vertex[s]);
        mesh.constrained_sides.push_back(Side(s));
    }
    mesh.origin.resize(mesh.nodes.size());
    std::iota(mesh.origin.begin(), mesh.origin.end(), 0);
    return mesh;
}

inline ConformingMesh triangulate(const Domain& domain, const FractureNetwork& net, double target_edge_length) {
    MeshOptions opt;
    opt.target_edge_length = target_edge_length;
    return triangulate(domain, net, opt);
}

namespace detail {

inline uint64_t undirected_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
}

/// Number of wall copies a geometric vertex must have: the fracture edges
/// incident to it cut its triangle fan into that many sectors.
inline int expected_copies(int fracture_degree, bool on_boundary) {
    if (on_boundary) return fracture_degree + 1;
    return std::max(fracture_degree, 1);
}

}  // namespace detail

/// Splits every node on a fracture into one copy per fan sector so the walls
/// can separate. Tips stay single; interior fracture nodes get two copies and
/// X-intersections four.
inline ConformingMesh duplicate_fracture_nodes(const ConformingMesh& in) {
    if (in.duplicated) return in;
    ConformingMesh mesh = in;
    const int nn = int(in.nodes.size());

    std::unordered_map<uint64_t, int> fracture_edge;
    std::vector<int> degree(nn, 0);
    for (int f = 0; f < int(in.faces.size()); ++f) {
        const auto& e = in.faces[f].master;
        fracture_edge[detail::undirected_key(e[0], e[1])] = f;
        ++degree[e[0]];
        ++degree[e[1]];
    }

    std::vector<std::vector<int>> node_tris(nn);
    for (int t = 0; t < int(in.triangles.size()); ++t)
        for (int v : in.triangles[t]) node_tris[v].push_back(t);

    std::unordered_map<uint64_t, std::vector<int>> edge_tris;
    for (int t = 0; t < int(in.triangles.size()); ++t)
        for (int i = 0; i < 3; ++i)
            edge_tris[detail::undirected_key(in.triangles[t][i], in.triangles[t][(i + 1) % 3])].push_back(t);

    for (int v = 0; v < nn; ++v) {
        if (degree[v] == 0) continue;
        const auto& tris = node_tris[v];
        std::vector<int> parent(tris.size());
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        std::map<int, std::vector<int>> by_neighbor;  // other vertex -> local triangle ids
        for (int k = 0; k < int(tris.size()); ++k)
            for (int u : in.triangles[tris[k]])
                if (u != v) by_neighbor[u].push_back(k);
        for (const auto& [u, locals] : by_neighbor) {
            if (fracture_edge.count(detail::undirected_key(u, v))) continue;
            for (size_t i = 1; i < locals.size(); ++i) parent[find(locals[i])] = find(locals[0]);
        }
        std::map<int, std::vector<int>> sectors;  // root -> triangles, keyed for determinism below
        for (int k = 0; k < int(tris.size()); ++k) sectors[find(k)].push_back(tris[k]);
        std::vector<std::vector<int>> ordered;
        for (auto& [root, list] : sectors) ordered.push_back(std::move(list));
        std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

        const bool boundary = in.boundary_sides(v) != 0;
        const int expected = detail::expected_copies(degree[v], boundary);
        if (int(ordered.size()) != expected)
            throw TopologyError("fracture node " + std::to_string(v) + " splits into " +
                                std::to_string(ordered.size()) + " sectors, expected " + std::to_string(expected));

        for (size_t s = 1; s < ordered.size(); ++s) {
            const int copy = int(mesh.nodes.size());
            mesh.nodes.push_back(in.nodes[v]);
            mesh.origin.push_back(in.origin[v]);
            for (int t : ordered[s])
                for (int& x : mesh.triangles[t])
                    if (x == v) x = copy;
            for (size_t c = 0; c < in.constrained_nodes.size(); ++c)
                if (in.constrained_nodes[c] == v) {
                    mesh.constrained_nodes.push_back(copy);
                    mesh.constrained_sides.push_back(in.constrained_sides[c]);
                }
        }
    }

    for (auto& face : mesh.faces) {
        const int a = face.master[0], b = face.master[1];
        const auto it = edge_tris.find(detail::undirected_key(a, b));
        if (it == edge_tris.end() || it->second.size() != 2)
            throw TopologyError("fracture edge (" + std::to_string(a) + "," + std::to_string(b) +
                                ") is not shared by exactly two triangles");
        const Vec2 pa = in.nodes[a], d = in.nodes[b] - pa;
        int master_tri = -1, slave_tri = -1;
        for (int t : it->second) {
            const auto& tv = in.triangles[t];
            const Vec2 centroid = (in.nodes[tv[0]] + in.nodes[tv[1]] + in.nodes[tv[2]]) / 3.0;
            const double side = cross(d, centroid - pa);
            if (std::abs(side) < 1e-14) throw TopologyError("degenerate side classification on a fracture edge");
            (side > 0 ? master_tri : slave_tri) = t;
        }
        if (master_tri < 0 || slave_tri < 0)
            throw TopologyError("both triangles of a fracture edge lie on the same side");
        auto renamed = [&](int t, int v) {
            for (int i = 0; i < 3; ++i)
                if (in.triangles[t][i] == v) return mesh.triangles[t][i];
            return -1;
        };
        face.master = {renamed(master_tri, a), renamed(master_tri, b)};
        face.slave = {renamed(slave_tri, a), renamed(slave_tri, b)};
        const Vec2 dn = d.normalized();
        face.normal = Vec2(dn.y(), -dn.x());
    }
    mesh.duplicated = true;
    return mesh;
}

/// Node-multiplicity census: copies per geometric location versus the rule
/// interior 2 / X-intersection 4 / tip 1 (generally: one copy per fan sector).
struct CensusReport {
    int locations = 0;
    int tips = 0;
    int interior = 0;       // fracture degree 2
    int t_junctions = 0;    // fracture degree 3
    int intersections = 0;  // fracture degree 4
    int other = 0;          // degree > 4, or fracture nodes on the window boundary
    int max_copies = 0;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

inline CensusReport census(const ConformingMesh& mesh) {
    CensusReport r;
    std::map<int, int> copies;
    for (int v = 0; v < int(mesh.nodes.size()); ++v) ++copies[mesh.origin[v]];
    std::map<int, std::set<uint64_t>> fracture_edges;
    for (const auto& f : mesh.faces) {
        const int a = mesh.origin[f.master[0]], b = mesh.origin[f.master[1]];
        fracture_edges[a].insert(detail::undirected_key(a, b));
        fracture_edges[b].insert(detail::undirected_key(a, b));
    }
    std::map<int, int> representative;
    for (int v = 0; v < int(mesh.nodes.size()); ++v) representative.emplace(mesh.origin[v], v);

    for (const auto& [loc, n] : copies) {
        ++r.locations;
        r.max_copies = std::max(r.max_copies, n);
        const int deg = fracture_edges.count(loc) ? int(fracture_edges[loc].size()) : 0;
        if (deg == 0) {
            if (n != 1) r.violations.push_back("non-fracture location " + std::to_string(loc) + " has " +
                                               std::to_string(n) + " copies");
            continue;
        }
        const bool boundary = mesh.boundary_sides(representative[loc]) != 0;
        if (boundary || deg > 4) ++r.other;
        else if (deg == 1) ++r.tips;
        else if (deg == 2) ++r.interior;
        else if (deg == 3) ++r.t_junctions;
        else ++r.intersections;
        const int expected = mesh.duplicated ? detail::expected_copies(deg, boundary) : 1;
        if (n != expected)
            r.violations.push_back("fracture location " + std::to_string(loc) + " (degree " + std::to_string(deg) +
                                   ") has " + std::to_string(n) + " copies, expected " + std::to_string(expected));
    }
    return r;
}

/// Checks every ConformingMesh invariant; throws TopologyError listing the first problems.
inline void validate_mesh(const ConformingMesh& mesh) {
    std::vector<std::string> problems;
    for (int t = 0; t < int(mesh.triangles.size()); ++t) {
        for (int v : mesh.triangles[t])
            if (v < 0 || v >= int(mesh.nodes.size())) problems.push_back("triangle " + std::to_string(t) + " bad node");
        if (problems.empty() && !(mesh.signed_area(mesh.triangles[t]) > 0))
            problems.push_back("triangle " + std::to_string(t) + " has non-positive signed area");
    }
    if (!problems.empty()) throw TopologyError(problems.front());

    std::vector<std::vector<int>> node_tris(mesh.nodes.size());
    for (int t = 0; t < int(mesh.triangles.size()); ++t)
        for (int v : mesh.triangles[t]) node_tris[v].push_back(t);

    for (int f = 0; f < int(mesh.faces.size()); ++f) {
        const auto& face = mesh.faces[f];
        for (int k = 0; k < 2; ++k) {
            if (mesh.nodes[face.master[k]] != mesh.nodes[face.slave[k]])
                problems.push_back("face " + std::to_string(f) + ": master/slave coordinates differ");
            if (mesh.duplicated && face.master[k] != face.slave[k])
                for (int t : node_tris[face.master[k]])
                    for (int v : mesh.triangles[t])
                        if (v == face.slave[k])
                            problems.push_back("face " + std::to_string(f) + ": a triangle spans the fracture");
        }
        if (mesh.face_length(face) <= 0) problems.push_back("face " + std::to_string(f) + " has zero length");
        if (mesh.duplicated) {
            // The slave edge must bound a triangle on the slave side of the face.
            const Vec2 pa = mesh.nodes[face.master[0]];
            const Vec2 d = mesh.nodes[face.master[1]] - pa;
            bool found = false;
            for (int t : node_tris[face.slave[0]]) {
                const auto& tri = mesh.triangles[t];
                if (std::find(tri.begin(), tri.end(), face.slave[1]) == tri.end()) continue;
                const Vec2 c = (mesh.nodes[tri[0]] + mesh.nodes[tri[1]] + mesh.nodes[tri[2]]) / 3.0;
                found |= cross(d, c - pa) < 0;
            }
            if (!found) problems.push_back("face " + std::to_string(f) + ": slave edge has no slave-side triangle");
        }
    }
    if (mesh.duplicated) {
        const auto rep = census(mesh);
        for (const auto& v : rep.violations) problems.push_back(v);
    }
    if (!problems.empty()) {
        std::string msg = "invalid mesh: " + problems.front();
        if (problems.size() > 1) msg += " (+" + std::to_string(problems.size() - 1) + " more)";
        throw TopologyError(msg);
    }
}

inline double min_triangle_angle_deg(const ConformingMesh& mesh, const std::array<int, 3>& t) {
    double best = 180;
    for (int i = 0; i < 3; ++i) {
        const Vec2 a = mesh.nodes[t[(i + 1) % 3]] - mesh.nodes[t[i]];
        const Vec2 b = mesh.nodes[t[(i + 2) % 3]] - mesh.nodes[t[i]];
        best = std::min(best, std::atan2(std::abs(cross(a, b)), a.dot(b)) * 180.0 / M_PI);
    }
    return best;
}

// Mesh interchange format -------------------------------------------------

inline void write_mesh(std::ostream& out, const ConformingMesh& mesh) {
    out << std::setprecision(17);
    out << "NODES " << mesh.nodes.size() << "\n";
    for (size_t i = 0; i < mesh.nodes.size(); ++i) out << i << ' ' << mesh.nodes[i].x() << ' ' << mesh.nodes[i].y() << "\n";
    out << "TRIANGLES " << mesh.triangles.size() << "\n";
    for (size_t i = 0; i < mesh.triangles.size(); ++i)
        out << i << ' ' << mesh.triangles[i][0] << ' ' << mesh.triangles[i][1] << ' ' << mesh.triangles[i][2] << "\n";
    out << "FRACTURE_FACES " << mesh.faces.size() << "\n";
    for (const auto& f : mesh.faces)
        out << f.master[0] << ' ' << f.master[1] << ' ' << f.slave[0] << ' ' << f.slave[1] << ' ' << f.segment << "\n";
    out << "CONSTRAINED " << mesh.constrained_nodes.size() << "\n";
    for (int v : mesh.constrained_nodes) out << v << "\n";
}

inline void write_mesh(const std::filesystem::path& path, const ConformingMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw Error("IOError", "cannot write mesh file " + path.string());
    write_mesh(out, mesh);
}

/// Reads and validates a duplicated-node mesh. Face normals, node origins and
/// constrained-node sides are reconstructed from coordinates.
inline ConformingMesh read_mesh(std::istream& in) {
    ConformingMesh mesh;
    std::string section, line;
    int lineno = 0;
    std::map<int, Vec2> nodes;
    std::map<int, std::array<int, 3>> tris;
    auto fail = [&](const std::string& msg) { throw ParseError("mesh line " + std::to_string(lineno) + ": " + msg); };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (first == "NODES" || first == "TRIANGLES" || first == "FRACTURE_FACES" || first == "CONSTRAINED") {
            section = first;
            continue;
        }
        std::istringstream row(line);
        if (section == "NODES") {
            int id;
            double x, y;
            if (!(row >> id >> x >> y)) fail("expected 'id x y'");
            if (!nodes.emplace(id, Vec2(x, y)).second) fail("duplicate node id");
        } else if (section == "TRIANGLES") {
            int id;
            std::array<int, 3> t;
            if (!(row >> id >> t[0] >> t[1] >> t[2])) fail("expected 'id n1 n2 n3'");
            if (!tris.emplace(id, t).second) fail("duplicate triangle id");
        } else if (section == "FRACTURE_FACES") {
            FractureFace f;
            if (!(row >> f.master[0] >> f.master[1] >> f.slave[0] >> f.slave[1] >> f.segment))
                fail("expected 'master_n1 master_n2 slave_n1 slave_n2 segment_id'");
            mesh.faces.push_back(f);
        } else if (section == "CONSTRAINED") {
            int id;
            if (!(row >> id)) fail("expected node id");
            mesh.constrained_nodes.push_back(id);
        } else {
            fail("data before any section header");
        }
        std::string extra;
        if (row >> extra) fail("trailing fields");
    }

    // Node ids must be dense 0..n-1 so they index directly.
    int expect = 0;
    for (const auto& [id, p] : nodes) {
        if (id != expect++) throw ParseError("mesh node ids must be 0..n-1");
        mesh.nodes.push_back(p);
    }
    const int nn = int(mesh.nodes.size());
    for (const auto& [id, t] : tris) {
        for (int v : t)
            if (v < 0 || v >= nn) throw ParseError("triangle references unknown node");
        mesh.triangles.push_back(t);
    }
    if (mesh.nodes.empty() || mesh.triangles.empty()) throw ParseError("mesh has no nodes or triangles");

    mesh.window = {mesh.nodes[0].x(), mesh.nodes[0].y(), mesh.nodes[0].x(), mesh.nodes[0].y()};
    for (const auto& p : mesh.nodes) {
        mesh.window.xmin = std::min(mesh.window.xmin, p.x());
        mesh.window.ymin = std::min(mesh.window.ymin, p.y());
        mesh.window.xmax = std::max(mesh.window.xmax, p.x());
        mesh.window.ymax = std::max(mesh.window.ymax, p.y());
    }

    std::map<std::pair<double, double>, int> loc;
    for (int v = 0; v < nn; ++v) mesh.origin.push_back(loc.emplace(std::make_pair(mesh.nodes[v].x(), mesh.nodes[v].y()), v).first->second);

    for (auto& f : mesh.faces) {
        for (int v : {f.master[0], f.master[1], f.slave[0], f.slave[1]})
            if (v < 0 || v >= nn) throw ParseError("fracture face references unknown node");
        const Vec2 d = (mesh.nodes[f.master[1]] - mesh.nodes[f.master[0]]).normalized();
        f.normal = Vec2(d.y(), -d.x());
        // The master edge must belong to a triangle on its left.
        bool found = false;
        for (const auto& t : mesh.triangles)
            for (int i = 0; i < 3; ++i)
                if (t[i] == f.master[0] && t[(i + 1) % 3] == f.master[1]) found = true;
        if (!found) throw TopologyError("master edge of a fracture face has no triangle on its left");
    }

    const double tol = mesh.boundary_tolerance();
    const Vec2 c = mesh.window.center();
    for (int v : mesh.constrained_nodes) {
        if (v < 0 || v >= nn) throw ParseError("constrained node out of range");
        const unsigned mask = mesh.boundary_sides(v);
        const Vec2& p = mesh.nodes[v];
        int side = -1;
        for (int s = 0; s < 4; ++s) {
            if (!(mask & (1u << s))) continue;
            const bool vertical = s < 2;
            if (vertical ? std::abs(p.y() - c.y()) <= tol : std::abs(p.x() - c.x()) <= tol) side = s;
        }
        if (side < 0) throw MissingMidNode("constrained node " + std::to_string(v) + " is not a window edge midpoint");
        mesh.constrained_sides.push_back(Side(side));
    }
    mesh.duplicated = true;
    validate_mesh(mesh);
    return mesh;
}

inline ConformingMesh read_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file " + path.string());
    return read_mesh(in);
}

}  // namespace fracperm

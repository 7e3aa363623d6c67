#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <vector>

#include "aperture.hpp"
#include "errors.hpp"
#include "mesh.hpp"

namespace fracperm {

/// A virtual flow cell: one fracture sub-edge of the mesh.
struct FlowCell {
    int face = -1;
    int segment = -1;
    int fracture = -1;
    std::array<int, 2> ends{};  // geometric vertex ids
    double length = 0;
    Vec2 centroid = Vec2::Zero();
};

struct CellEnd {
    int cell;
    int end;
};

/// Cell ends meeting at one geometric vertex.
struct Junction {
    int vertex = -1;
    Vec2 point = Vec2::Zero();
    std::vector<CellEnd> ends;
    unsigned sides = 0;  // flow-window sides the vertex lies on
};

struct FlowGraph {
    std::vector<FlowCell> cells;
    std::vector<Junction> junctions;
    Rect window;

    /// Junctions where three or more cells meet.
    std::vector<int> intersection_groups() const {
        std::vector<int> out;
        for (int j = 0; j < int(junctions.size()); ++j)
            if (junctions[j].ends.size() >= 3) out.push_back(j);
        return out;
    }
    /// Cells with an end on the given side of the flow window.
    std::vector<int> boundary_cells(Side s) const {
        std::vector<int> out;
        for (const auto& j : junctions)
            if (j.sides & (1u << int(s)))
                for (const auto& e : j.ends) out.push_back(e.cell);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
    /// Unordered pairs of cells sharing a junction (each pair once per junction).
    std::vector<std::pair<int, int>> connections() const {
        std::vector<std::pair<int, int>> out;
        for (const auto& j : junctions)
            for (size_t a = 0; a < j.ends.size(); ++a)
                for (size_t b = a + 1; b < j.ends.size(); ++b) out.emplace_back(j.ends[a].cell, j.ends[b].cell);
        return out;
    }
};

inline FlowGraph build_flow_graph(const ConformingMesh& mesh, const FractureNetwork& net, const Rect& window) {
    FlowGraph g;
    g.window = window;
    const double tol = kMergeTolerance;
    std::map<int, int> junction_of;
    for (int k = 0; k < int(mesh.faces.size()); ++k) {
        const auto& f = mesh.faces[k];
        const Vec2 a = mesh.nodes[f.master[0]], b = mesh.nodes[f.master[1]];
        const Vec2 mid = 0.5 * (a + b);
        if (!window.contains(mid, tol)) continue;
        FlowCell c;
        c.face = k;
        c.segment = f.segment;
        c.fracture = f.segment >= 0 && f.segment < int(net.segments.size()) ? net.segments[f.segment].fracture : -1;
        c.ends = {mesh.origin[f.master[0]], mesh.origin[f.master[1]]};
        c.length = (b - a).norm();
        c.centroid = mid;
        const int id = int(g.cells.size());
        g.cells.push_back(c);
        for (int e = 0; e < 2; ++e) {
            auto [it, fresh] = junction_of.emplace(c.ends[e], int(g.junctions.size()));
            if (fresh) {
                Junction j;
                j.vertex = c.ends[e];
                j.point = e == 0 ? a : b;
                j.sides = sides_touching(window, j.point, tol);
                g.junctions.push_back(j);
            }
            g.junctions[it->second].ends.push_back({id, e});
        }
    }
    return g;
}

struct SegmentHydraulics {
    double b = 0;           // m
    double k_f = 0;         // m^2
    double alpha_half = 0;  // m^3 per unit depth, same at both cell ends
};

inline SegmentHydraulics cell_hydraulics(double b, double L, const ApertureParams& p) {
    if (!(L > 0)) throw InvalidArgument("cell length must be positive");
    if (!(b >= 0)) throw InvalidArgument("aperture must be >= 0");
    SegmentHydraulics h;
    h.b = b;
    if (b > 0) {
        const double open = std::max(b - p.b_c, 0.0);
        h.k_f = open * open / 12.0 + p.k_m;
        h.alpha_half = h.k_f * b / (0.5 * L);
    }
    return h;
}

inline double two_point_transmissibility(double ai, double aj) {
    if (!(ai > 0) || !(aj > 0)) return 0.0;
    return ai * aj / (ai + aj);
}

/// Pairwise transmissibilities T_ij = a_i a_j / sum(a), row-major upper
/// triangle order (0,1), (0,2), ..., (n-2,n-1). Sets all_closed when sum(a) = 0.
inline std::vector<double> star_delta(const std::vector<double>& alpha, bool* all_closed = nullptr) {
    const double sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    if (all_closed) *all_closed = !(sum > 0);
    std::vector<double> out;
    for (size_t i = 0; i < alpha.size(); ++i)
        for (size_t j = i + 1; j < alpha.size(); ++j) out.push_back(sum > 0 ? alpha[i] * alpha[j] / sum : 0.0);
    return out;
}

enum class FlowDirection { X, Y };

inline const char* direction_name(FlowDirection d) { return d == FlowDirection::X ? "x" : "y"; }

struct FluxConnection {
    int a;  // cell
    int b;  // cell, or -1 for the inflow boundary, -2 for the outflow boundary
    double T;     // transmissibility / viscosity
    double flux;  // m^3/s per unit depth, positive from a to b
};

struct FlowSolution {
    Eigen::VectorXd pressure;
    std::vector<FluxConnection> connections;
    double q_in = 0;
    double q_out = 0;
    double q = 0;
    double mass_balance_residual = 0;
    bool no_spanning_path = false;
    int closed_junctions = 0;
};

namespace detail {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace detail

inline FlowSolution solve_flow(const FlowGraph& g, const std::vector<SegmentHydraulics>& hyd, FlowDirection dir,
                               double dP, double viscosity, double p_out = 0.0) {
    if (!(dP > 0)) throw InvalidArgument("pressure drop must be positive");
    if (!(viscosity > 0)) throw InvalidArgument("viscosity must be positive");
    if (hyd.size() != g.cells.size()) throw InvalidArgument("hydraulics size does not match the flow graph");
    const int n = int(g.cells.size());
    const double p_in = p_out + dP;
    const unsigned in_side = 1u << int(dir == FlowDirection::X ? Side::Left : Side::Bottom);
    const unsigned out_side = 1u << int(dir == FlowDirection::X ? Side::Right : Side::Top);

    FlowSolution sol;
    for (const auto& j : g.junctions) {
        if (j.sides & (in_side | out_side)) {
            const int tag = (j.sides & in_side) ? -1 : -2;
            for (const auto& e : j.ends) sol.connections.push_back({e.cell, tag, hyd[e.cell].alpha_half / viscosity, 0});
            continue;
        }
        if (j.ends.size() < 2) continue;
        std::vector<double> alpha;
        for (const auto& e : j.ends) alpha.push_back(hyd[e.cell].alpha_half);
        bool closed = false;
        const auto T = j.ends.size() == 2 ? std::vector<double>{two_point_transmissibility(alpha[0], alpha[1])}
                                          : star_delta(alpha, &closed);
        if (closed) ++sol.closed_junctions;
        size_t k = 0;
        for (size_t a = 0; a < j.ends.size(); ++a)
            for (size_t b = a + 1; b < j.ends.size(); ++b, ++k)
                sol.connections.push_back({j.ends[a].cell, j.ends[b].cell, T[k] / viscosity, 0});
    }

    // Components: which boundary values each is attached to.
    detail::UnionFind uf(n);
    for (const auto& c : sol.connections)
        if (c.b >= 0 && c.T > 0) uf.unite(c.a, c.b);
    std::vector<char> touches_in(n, 0), touches_out(n, 0);
    for (const auto& c : sol.connections) {
        if (c.T > 0 && c.b == -1) touches_in[uf.find(c.a)] = 1;
        if (c.T > 0 && c.b == -2) touches_out[uf.find(c.a)] = 1;
    }
    bool spanning = false;
    std::vector<char> pinned(n, 0);
    for (int i = 0; i < n; ++i) {
        const int r = uf.find(i);
        spanning |= touches_in[r] && touches_out[r];
        pinned[i] = !touches_in[r] && !touches_out[r];
    }
    sol.no_spanning_path = !spanning;

    double scale = 0;
    for (const auto& c : sol.connections) scale = std::max(scale, c.T);
    if (!(scale > 0)) scale = 1;

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (const auto& c : sol.connections) {
        if (!(c.T > 0) || pinned[c.a]) continue;
        const double t = c.T / scale;
        if (c.b < 0) {
            trips.emplace_back(c.a, c.a, t);
            rhs[c.a] += t * (c.b == -1 ? p_in : p_out);
        } else {
            trips.emplace_back(c.a, c.a, t);
            trips.emplace_back(c.b, c.b, t);
            trips.emplace_back(c.a, c.b, -t);
            trips.emplace_back(c.b, c.a, -t);
        }
    }
    const double p_mid = p_in - 0.5 * dP;
    for (int i = 0; i < n; ++i) {
        if (!pinned[i]) continue;
        trips.emplace_back(i, i, 1.0);
        rhs[i] = p_mid;
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    sol.pressure = Eigen::VectorXd::Zero(n);
    if (n > 0) {
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
        if (ldlt.info() != Eigen::Success) throw SolveFailure("flow matrix factorization failed");
        sol.pressure = ldlt.solve(rhs);
        if (!sol.pressure.allFinite()) throw SolveFailure("flow solve produced non-finite pressures");
    }

    std::vector<double> imbalance(n, 0.0);
    for (auto& c : sol.connections) {
        if (pinned[c.a]) continue;
        const double pb = c.b == -1 ? p_in : c.b == -2 ? p_out : sol.pressure[c.b];
        c.flux = c.T * (sol.pressure[c.a] - pb);
        imbalance[c.a] += c.flux;
        if (c.b >= 0) imbalance[c.b] -= c.flux;
        if (c.b == -1) sol.q_in -= c.flux;
        if (c.b == -2) sol.q_out += c.flux;
    }
    const double scale_q = std::max(std::abs(sol.q_in), std::abs(sol.q_out));
    double worst = std::abs(sol.q_in - sol.q_out);
    for (double v : imbalance) worst = std::max(worst, std::abs(v));
    sol.mass_balance_residual = scale_q > 0 ? worst / scale_q : 0.0;
    sol.q = spanning ? 0.5 * (sol.q_in + sol.q_out) : 0.0;
    return sol;
}

/// Flow-field dump: cell id, centroid, pressure, aperture.
inline void write_flow_field(std::ostream& out, const FlowGraph& g, const std::vector<SegmentHydraulics>& hyd,
                             const FlowSolution& sol) {
    out.precision(12);
    out << "cell,x,y,pressure_pa,aperture_m\n";
    for (int i = 0; i < int(g.cells.size()); ++i)
        out << i << ',' << g.cells[i].centroid.x() << ',' << g.cells[i].centroid.y() << ',' << sol.pressure[i] << ','
            << hyd[i].b << '\n';
}

}  // namespace fracperm

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <ostream>
#include <vector>

#include "elasticity.hpp"

namespace fracperm {

/// Relative tangential motion of fracture walls.
///   Tied: walls move apart only along the face normal (no shear displacement).
///   Free: walls slide without resistance (frictionless contact).
enum class TangentialMode { Tied, Free };

inline TangentialMode parse_tangential(const std::string& s) {
    if (s == "tied") return TangentialMode::Tied;
    if (s == "free") return TangentialMode::Free;
    throw InvalidArgument("unknown tangential mode '" + s + "' (expected tied or free)");
}

inline const char* tangential_name(TangentialMode m) { return m == TangentialMode::Tied ? "tied" : "free"; }

struct ContactControl {
    double penalty_factor = 1e3;  // kappa = penalty_factor * E / face spacing
    int max_iterations = 60;
    double gap_tol = 1e-9;          // m
    double pressure_tol = 1.0;      // Pa
    double complementarity_tol = 1e-6;
    double gap_scale = 1.5e-5;      // m, normally the unstressed aperture
    Pinning pinning = Pinning::Tangential;
    TangentialMode tangential = TangentialMode::Tied;
};

/// One master/slave node pair on a fracture. Contact constraints act on
/// pairs: face-constant constraints would outnumber the wall dofs on chains
/// that end in an undoubled tip.
struct ContactPair {
    int first = -1, second = -1;  // node copies; normal points from first to second
    Vec2 normal = Vec2::Zero();   // unit, length-weighted over the adjacent faces
    double weight = 0;            // m, half the length of each adjacent face
    double spacing = 0;           // m, mean adjacent face length
};

struct ContactPairs {
    std::vector<ContactPair> pairs;
    std::vector<std::array<int, 2>> face_ends;  // pair index per face end, -1 at an undoubled node
};

inline ContactPairs contact_pairs(const ConformingMesh& mesh) {
    ContactPairs out;
    out.face_ends.assign(mesh.faces.size(), {-1, -1});
    std::map<std::pair<int, int>, int> index;
    std::vector<int> count;
    for (size_t k = 0; k < mesh.faces.size(); ++k) {
        const auto& f = mesh.faces[k];
        const double L = mesh.face_length(f);
        for (int e = 0; e < 2; ++e) {
            const int m = f.master[e], sl = f.slave[e];
            if (m == sl) continue;
            const auto key = std::make_pair(std::min(m, sl), std::max(m, sl));
            auto [it, fresh] = index.emplace(key, int(out.pairs.size()));
            if (fresh) {
                out.pairs.push_back({key.first, key.second});
                count.push_back(0);
            }
            auto& p = out.pairs[it->second];
            p.normal += (m == key.first ? 0.5 : -0.5) * L * f.normal;
            p.weight += 0.5 * L;
            ++count[it->second];
            out.face_ends[k][e] = it->second;
        }
    }
    for (size_t i = 0; i < out.pairs.size(); ++i) {
        auto& p = out.pairs[i];
        const double n = p.normal.norm();
        if (!(n > 0)) throw TopologyError("contact pair with opposing face normals at node " + std::to_string(p.first));
        p.normal /= n;
        p.spacing = 2 * p.weight / count[i];
    }
    return out;
}

struct ContactState {
    DisplacementField displacement;
    std::vector<double> face_gap;       // m, open positive
    std::vector<double> face_pressure;  // Pa, compression positive, mean of the face's pairs
    std::vector<double> face_slip;      // m, tangential wall offset
    std::vector<double> face_shear;     // Pa, tie traction (tied mode only)
    std::vector<double> segment_sigma_n;
    ContactPairs pairs;
    std::vector<double> pair_gap;       // m
    std::vector<double> pair_pressure;  // Pa
    std::vector<double> pair_shear;     // Pa
    int iterations = 0;
    bool converged = false;
    /// Open pairs were given a weak spring to keep a detached block solvable.
    bool regularized = false;
    double complementarity = 0;  // max over pairs of |min(g / gap_scale, p / pressure scale)|
    double min_gap = 0;
};

namespace detail {

inline std::array<int, 8> face_dofs(const FractureFace& f) {
    return {2 * f.master[0], 2 * f.master[0] + 1, 2 * f.master[1], 2 * f.master[1] + 1,
            2 * f.slave[0],  2 * f.slave[0] + 1,  2 * f.slave[1],  2 * f.slave[1] + 1};
}

/// Mean opening of one face: g = G . u_face.
inline std::array<double, 8> face_gap_vector(const FractureFace& f) {
    const double nx = 0.5 * f.normal.x(), ny = 0.5 * f.normal.y();
    return {-nx, -ny, -nx, -ny, nx, ny, nx, ny};
}

/// Same operator along the face tangent: relative sliding of the walls.
inline std::array<double, 8> face_slip_vector(const FractureFace& f) {
    FractureFace t = f;
    t.normal = Vec2(-f.normal.y(), f.normal.x());
    return face_gap_vector(t);
}

inline std::array<int, 4> pair_dofs(const ContactPair& p) {
    return {2 * p.first, 2 * p.first + 1, 2 * p.second, 2 * p.second + 1};
}

inline std::array<double, 4> pair_vector(const ContactPair& p, bool tangential) {
    const Vec2 d = tangential ? Vec2(-p.normal.y(), p.normal.x()) : p.normal;
    return {-d.x(), -d.y(), d.x(), d.y()};
}

inline std::vector<double> pair_gaps(const ContactPairs& cp, const Eigen::VectorXd& u, bool tangential) {
    std::vector<double> g(cp.pairs.size());
    for (size_t i = 0; i < cp.pairs.size(); ++i) {
        const auto dofs = pair_dofs(cp.pairs[i]);
        const auto G = pair_vector(cp.pairs[i], tangential);
        double s = 0;
        for (int j = 0; j < 4; ++j) s += G[j] * u[dofs[j]];
        g[i] = s;
    }
    return g;
}

}  // namespace detail

inline std::vector<double> compute_gaps(const ConformingMesh& mesh, const Eigen::VectorXd& u, bool tangential = false) {
    std::vector<double> g(mesh.faces.size());
    for (size_t k = 0; k < mesh.faces.size(); ++k) {
        const auto dofs = detail::face_dofs(mesh.faces[k]);
        const auto G = tangential ? detail::face_slip_vector(mesh.faces[k]) : detail::face_gap_vector(mesh.faces[k]);
        double s = 0;
        for (int i = 0; i < 8; ++i) s += G[i] * u[dofs[i]];
        g[k] = s;
    }
    return g;
}

/// Length-weighted mean face pressure per segment, clamped at zero.
inline std::vector<double> segment_contact_stress(const ConformingMesh& mesh, const std::vector<double>& pressure,
                                                  int num_segments) {
    std::vector<double> sum(num_segments, 0), len(num_segments, 0);
    for (size_t k = 0; k < mesh.faces.size(); ++k) {
        const int s = mesh.faces[k].segment;
        if (s < 0 || s >= num_segments) continue;
        const double L = mesh.face_length(mesh.faces[k]);
        sum[s] += L * pressure[k];
        len[s] += L;
    }
    std::vector<double> out(num_segments, 0);
    for (int s = 0; s < num_segments; ++s) out[s] = len[s] > 0 ? std::max(sum[s] / len[s], 0.0) : 0;
    return out;
}

/// Face values as the mean over the face's pairs (a face with no pair gets 0).
inline std::vector<double> pair_to_face(const ContactPairs& cp, const std::vector<double>& v) {
    std::vector<double> out(cp.face_ends.size(), 0.0);
    for (size_t k = 0; k < cp.face_ends.size(); ++k) {
        double sum = 0;
        int n = 0;
        for (int i : cp.face_ends[k])
            if (i >= 0) {
                sum += v[i];
                ++n;
            }
        out[k] = n ? sum / n : 0.0;
    }
    return out;
}

/// Nodal force of pair tractions (normal pressure, or tangential tie traction).
inline Eigen::VectorXd contact_force(const ConformingMesh& mesh, const ContactPairs& cp,
                                     const std::vector<double>& traction, bool tangential = false) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * mesh.nodes.size());
    for (size_t i = 0; i < cp.pairs.size(); ++i) {
        const auto dofs = detail::pair_dofs(cp.pairs[i]);
        const auto G = detail::pair_vector(cp.pairs[i], tangential);
        for (int j = 0; j < 4; ++j) r[dofs[j]] += cp.pairs[i].weight * traction[i] * G[j];
    }
    return r;
}

inline ContactState solve_contact(const ConformingMesh& mesh, const ElasticParams& params, const BoundaryStress& bc,
                                  const ContactControl& ctrl = {}) {
    check_stress(bc);
    int num_segments = 0;
    for (const auto& f : mesh.faces) num_segments = std::max(num_segments, f.segment + 1);

    const SparseMatrix K0 = assemble(mesh, params);
    const Eigen::VectorXd f0 = traction_load(mesh, bc);
    const std::vector<int> fixed = pinned_dofs(mesh, ctrl.pinning);
    const double pressure_scale = std::max({bc.sigma_xx, bc.sigma_yy, 1.0});

    ContactState st;
    st.pairs = contact_pairs(mesh);
    const auto& cp = st.pairs;
    const int np = int(cp.pairs.size());
    std::vector<double> kappa(np);
    for (int i = 0; i < np; ++i) kappa[i] = ctrl.penalty_factor * params.E / cp.pairs[i].spacing;

    const bool tied = ctrl.tangential == TangentialMode::Tied;
    std::vector<double> lambda(np, 0.0), tau(np, 0.0);
    std::vector<char> active(np, 1);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    bool need_factor = true;
    double open_ratio = 0;  // weak spring on open pairs, used only if a block detaches
    int stable = 0;

    auto factor = [&]() {
        std::vector<Triplet> trips;
        trips.reserve(size_t(np) * 32);
        for (int i = 0; i < np; ++i) {
            const auto dofs = detail::pair_dofs(cp.pairs[i]);
            const double wk = cp.pairs[i].weight * kappa[i];
            for (int mode = 0; mode < 2; ++mode) {
                const double w = mode == 0 ? wk * (active[i] ? 1.0 : open_ratio) : (tied ? wk : 0.0);
                if (w == 0) continue;
                const auto G = detail::pair_vector(cp.pairs[i], mode == 1);
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b) trips.emplace_back(dofs[a], dofs[b], w * G[a] * G[b]);
            }
        }
        SparseMatrix P(K0.rows(), K0.cols());
        P.setFromTriplets(trips.begin(), trips.end());
        SparseMatrix K = K0 + P;
        Eigen::VectorXd dummy = Eigen::VectorXd::Zero(K.rows());
        constrain(K, dummy, fixed);
        ldlt.compute(K);
        if (ldlt.info() != Eigen::Success) return false;
        const auto D = ldlt.vectorD();
        const double dmax = D.cwiseAbs().maxCoeff();
        return D.minCoeff() > 1e-13 * dmax;
    };

    std::vector<double> p(np, 0.0), shear(np, 0.0), g, slip;
    for (int it = 1; it <= ctrl.max_iterations; ++it) {
        if (need_factor) {
            if (!factor()) {
                // A block cut free by open fractures: hold it with weak springs on the open pairs.
                open_ratio = 1e-8;
                st.regularized = true;
                if (!factor())
                    throw SolveFailure(
                        "contact system is singular: a block bounded by fractures can move freely "
                        "(with free sliding, a fracture cutting the mechanical window from wall to wall forms a "
                        "mechanism; use a buffer, tied walls or full pinning)");
            }
            need_factor = false;
        }
        Eigen::VectorXd rhs = f0;
        for (int i = 0; i < np; ++i) {
            const auto dofs = detail::pair_dofs(cp.pairs[i]);
            const double w = cp.pairs[i].weight;
            if (active[i] && lambda[i] != 0) {
                const auto G = detail::pair_vector(cp.pairs[i], false);
                for (int a = 0; a < 4; ++a) rhs[dofs[a]] += w * lambda[i] * G[a];
            }
            if (tied && tau[i] != 0) {
                const auto T = detail::pair_vector(cp.pairs[i], true);
                for (int a = 0; a < 4; ++a) rhs[dofs[a]] += w * tau[i] * T[a];
            }
        }
        for (int d : fixed) rhs[d] = 0;
        Eigen::VectorXd u = ldlt.solve(rhs);
        if (!u.allFinite()) throw SolveFailure("contact iteration produced a non-finite displacement");

        g = detail::pair_gaps(cp, u, false);
        slip = detail::pair_gaps(cp, u, true);
        std::vector<char> next(np);
        double max_slip = 0;
        for (int i = 0; i < np; ++i) {
            // Inactive pairs carry no force in this solve, so their pressure is zero.
            const double trial = lambda[i] - kappa[i] * g[i];
            next[i] = trial > 0;
            p[i] = active[i] ? std::max(trial, 0.0) : 0.0;
            shear[i] = tied ? tau[i] - kappa[i] * slip[i] : 0.0;
            if (tied) max_slip = std::max(max_slip, std::abs(slip[i]));
        }

        st.iterations = it;
        st.displacement.u = u;
        st.min_gap = np ? *std::min_element(g.begin(), g.end()) : 0;
        st.complementarity = 0;
        for (int i = 0; i < np; ++i)
            st.complementarity =
                std::max(st.complementarity, std::abs(std::min(g[i] / ctrl.gap_scale, p[i] / pressure_scale)));

        stable = next == active ? stable + 1 : 0;
        const bool tolerances = st.min_gap >= -ctrl.gap_tol && st.complementarity <= ctrl.complementarity_tol &&
                                max_slip <= ctrl.gap_tol;
        if (np == 0 || (stable >= 2 && tolerances)) {
            st.converged = true;
            break;
        }
        if (next != active) {
            active = next;
            need_factor = true;
        }
        // Uzawa update of the multipliers.
        for (int i = 0; i < np; ++i) lambda[i] = active[i] ? std::max(lambda[i] - kappa[i] * g[i], 0.0) : 0.0;
        if (tied)
            for (int i = 0; i < np; ++i) tau[i] -= kappa[i] * slip[i];
    }
    if (st.displacement.u.size() == 0) st.displacement.u = Eigen::VectorXd::Zero(K0.rows());

    st.pair_gap = g;
    st.pair_pressure = p;
    st.pair_shear = shear;
    st.face_gap = compute_gaps(mesh, st.displacement.u);
    st.face_slip = compute_gaps(mesh, st.displacement.u, true);
    st.face_pressure = pair_to_face(cp, p);
    st.face_shear = pair_to_face(cp, shear);

    // Residual of the mechanical balance including the contact tractions.
    {
        SparseMatrix K = K0;
        Eigen::VectorXd rhs = f0 + contact_force(mesh, cp, p);
        if (tied) rhs += contact_force(mesh, cp, shear, true);
        constrain(K, rhs, fixed);
        st.displacement.residual_norm = relative_residual(K, st.displacement.u, rhs);
    }
    st.segment_sigma_n = segment_contact_stress(mesh, st.face_pressure, num_segments);
    return st;
}

inline std::vector<double> segment_contact_stress(const ContactState& st, const ConformingMesh& mesh,
                                                  const FractureNetwork& net) {
    return segment_contact_stress(mesh, st.face_pressure, int(net.segments.size()));
}

/// Per-face diagnostics: face id, segment id, gap, pressure.
inline void write_face_diagnostics(std::ostream& out, const ConformingMesh& mesh, const ContactState& st) {
    out.precision(12);
    out << "face,segment,gap_m,pressure_pa\n";
    for (size_t k = 0; k < mesh.faces.size(); ++k)
        out << k << ',' << mesh.faces[k].segment << ',' << st.face_gap[k] << ',' << st.face_pressure[k] << '\n';
}

}  // namespace fracperm

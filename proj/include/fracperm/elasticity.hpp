#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "mesh.hpp"

namespace fracperm {

struct ElasticParams {
    double E = 2.5e9;
    double nu = 0.35;
    double lambda = 0;
    double mu_shear = 0;
};

inline std::pair<double, double> lame_from_engineering(double E, double nu) {
    if (!(E > 0)) throw InvalidModuli("Young's modulus must be positive, got " + std::to_string(E));
    if (!(nu >= 0 && nu < 0.5)) throw InvalidModuli("Poisson's ratio must lie in [0, 0.5), got " + std::to_string(nu));
    return {E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))};
}

inline ElasticParams make_elastic(double E, double nu) {
    const auto [l, m] = lame_from_engineering(E, nu);
    return {E, nu, l, m};
}

/// Far-field stresses, compression positive.
struct BoundaryStress {
    double sigma_xx = 0;
    double sigma_yy = 0;
};

inline void check_stress(const BoundaryStress& bc) {
    if (!(bc.sigma_xx >= 0 && bc.sigma_yy >= 0) || !std::isfinite(bc.sigma_xx) || !std::isfinite(bc.sigma_yy))
        throw NegativeStress("boundary stresses must be finite and compressive (>= 0)");
}

/// How the boundary mid nodes are held.
///   Full: both displacement components fixed at all four mid nodes.
///   Tangential: only the component along the side is fixed, which removes the
///   rigid modes without fighting the uniform compression solution.
enum class Pinning { Full, Tangential };

inline Pinning parse_pinning(const std::string& s) {
    if (s == "full") return Pinning::Full;
    if (s == "tangential") return Pinning::Tangential;
    throw InvalidArgument("unknown pinning mode '" + s + "' (expected full or tangential)");
}

inline const char* pinning_name(Pinning p) { return p == Pinning::Full ? "full" : "tangential"; }

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using ElementMatrix = Eigen::Matrix<double, 6, 6>;

inline Eigen::Matrix3d plane_strain_matrix(const ElasticParams& p) {
    Eigen::Matrix3d D;
    D << p.lambda + 2 * p.mu_shear, p.lambda, 0, p.lambda, p.lambda + 2 * p.mu_shear, 0, 0, 0, p.mu_shear;
    return D;
}

/// Strain-displacement matrix of a linear triangle (engineering shear strain).
inline Eigen::Matrix<double, 3, 6> strain_matrix(const Vec2& a, const Vec2& b, const Vec2& c, double& area) {
    area = 0.5 * orient(a, b, c);
    if (!(area > 0)) throw SingularElement("triangle with non-positive area " + std::to_string(area));
    const std::array<Vec2, 3> x = {a, b, c};
    Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
    for (int i = 0; i < 3; ++i) {
        const Vec2& p = x[(i + 1) % 3];
        const Vec2& q = x[(i + 2) % 3];
        const double dx = (p.y() - q.y()) / (2 * area);  // dN_i/dx
        const double dy = (q.x() - p.x()) / (2 * area);  // dN_i/dy
        B(0, 2 * i) = dx;
        B(1, 2 * i + 1) = dy;
        B(2, 2 * i) = dy;
        B(2, 2 * i + 1) = dx;
    }
    return B;
}

inline ElementMatrix element_stiffness(const Vec2& a, const Vec2& b, const Vec2& c, const ElasticParams& p) {
    double area = 0;
    const auto B = strain_matrix(a, b, c, area);
    return area * B.transpose() * plane_strain_matrix(p) * B;
}

inline SparseMatrix assemble(const ConformingMesh& mesh, const ElasticParams& p) {
    const int n = 2 * int(mesh.nodes.size());
    std::vector<Triplet> trips;
    trips.reserve(mesh.triangles.size() * 36);
    for (const auto& t : mesh.triangles) {
        const ElementMatrix Ke = element_stiffness(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]], p);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) trips.emplace_back(2 * t[i / 2] + i % 2, 2 * t[j / 2] + j % 2, Ke(i, j));
    }
    SparseMatrix K(n, n);
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

/// Consistent nodal forces of the far-field tractions on the window boundary.
inline Eigen::VectorXd traction_load(const ConformingMesh& mesh, const BoundaryStress& bc) {
    check_stress(bc);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * mesh.nodes.size());
    for (const auto& t : mesh.triangles) {
        for (int i = 0; i < 3; ++i) {
            const int a = t[i], b = t[(i + 1) % 3];
            const unsigned common = mesh.boundary_sides(a) & mesh.boundary_sides(b);
            if (!common) continue;
            const double len = (mesh.nodes[b] - mesh.nodes[a]).norm();
            for (int s = 0; s < 4; ++s) {
                if (!(common & (1u << s))) continue;
                Vec2 traction = Vec2::Zero();
                switch (Side(s)) {
                    case Side::Left: traction = {bc.sigma_xx, 0}; break;
                    case Side::Right: traction = {-bc.sigma_xx, 0}; break;
                    case Side::Bottom: traction = {0, bc.sigma_yy}; break;
                    case Side::Top: traction = {0, -bc.sigma_yy}; break;
                }
                for (int v : {a, b}) {
                    f[2 * v] += 0.5 * len * traction.x();
                    f[2 * v + 1] += 0.5 * len * traction.y();
                }
            }
        }
    }
    return f;
}

inline std::vector<int> pinned_dofs(const ConformingMesh& mesh, Pinning pinning) {
    if (mesh.constrained_nodes.empty()) throw MissingMidNode("mesh has no constrained mid nodes");
    std::array<bool, 4> seen{};
    std::vector<int> dofs;
    for (size_t k = 0; k < mesh.constrained_nodes.size(); ++k) {
        const int v = mesh.constrained_nodes[k];
        const Side s = mesh.constrained_sides[k];
        seen[int(s)] = true;
        if (pinning == Pinning::Full) {
            dofs.push_back(2 * v);
            dofs.push_back(2 * v + 1);
        } else {
            const bool vertical_side = s == Side::Left || s == Side::Right;
            dofs.push_back(2 * v + (vertical_side ? 1 : 0));
        }
    }
    for (int s = 0; s < 4; ++s)
        if (!seen[s]) throw MissingMidNode(std::string("no mid node on the ") + side_name(Side(s)) + " side");
    return dofs;
}

/// Zeroes the rows and columns of fixed dofs. The diagonal entry is set to
/// the mean stiffness diagonal so pivots stay on one scale.
inline void constrain(SparseMatrix& K, Eigen::VectorXd& f, const std::vector<int>& fixed) {
    std::vector<char> mask(K.rows(), 0);
    for (int d : fixed) mask[d] = 1;
    const double scale = K.rows() > 0 ? std::max(K.diagonal().cwiseAbs().mean(), 1e-300) : 1.0;
    K.prune([&](Eigen::Index r, Eigen::Index c, double) { return !mask[r] && !mask[c]; });
    SparseMatrix I(K.rows(), K.cols());
    std::vector<Triplet> diag;
    for (int d = 0; d < int(K.rows()); ++d)
        if (mask[d]) diag.emplace_back(d, d, scale);
    I.setFromTriplets(diag.begin(), diag.end());
    K += I;
    for (int d : fixed) f[d] = 0;
}

struct LinearSystem {
    SparseMatrix K;
    Eigen::VectorXd f;
    std::vector<int> fixed;
};

inline LinearSystem apply_bc(const SparseMatrix& K, const ConformingMesh& mesh, const BoundaryStress& bc,
                             Pinning pinning = Pinning::Tangential) {
    LinearSystem sys{K, traction_load(mesh, bc), pinned_dofs(mesh, pinning)};
    constrain(sys.K, sys.f, sys.fixed);
    return sys;
}

struct DisplacementField {
    Eigen::VectorXd u;  // [ux0, uy0, ux1, uy1, ...]
    double residual_norm = 0;

    Vec2 at(int node) const { return {u[2 * node], u[2 * node + 1]}; }
};

inline double relative_residual(const SparseMatrix& K, const Eigen::VectorXd& u, const Eigen::VectorXd& f) {
    const double fn = f.norm();
    const double r = (K * u - f).norm();
    return fn > 0 ? r / fn : r;
}

inline DisplacementField solve(const LinearSystem& sys, double tolerance = 1e-10) {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(sys.K);
    if (ldlt.info() != Eigen::Success) throw SolveFailure("factorization of the stiffness matrix failed");
    DisplacementField out{ldlt.solve(sys.f), 0};
    if (ldlt.info() != Eigen::Success || !out.u.allFinite()) throw SolveFailure("stiffness solve produced no finite solution");
    out.residual_norm = relative_residual(sys.K, out.u, sys.f);
    if (out.residual_norm > tolerance)
        throw SolveFailure("relative residual " + std::to_string(out.residual_norm) + " exceeds tolerance");
    return out;
}

/// Element stress (tension positive): {sigma_xx, sigma_yy, sigma_xy}.
inline Eigen::Vector3d element_stress(const ConformingMesh& mesh, const ElasticParams& p, const Eigen::VectorXd& u,
                                      const std::array<int, 3>& t) {
    double area = 0;
    const auto B = strain_matrix(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]], area);
    Eigen::Matrix<double, 6, 1> ue;
    for (int i = 0; i < 3; ++i) ue.segment<2>(2 * i) = u.segment<2>(2 * t[i]);
    return plane_strain_matrix(p) * B * ue;
}

inline double strain_energy(const SparseMatrix& K, const Eigen::VectorXd& u) { return 0.5 * u.dot(K * u); }

/// Debug dump of a sparse system as "row col value" lines.
inline void write_triplets(std::ostream& out, const SparseMatrix& K) {
    out.precision(17);
    for (int k = 0; k < K.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(K, k); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace fracperm

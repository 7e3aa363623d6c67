#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "fracperm/elasticity.hpp"

using namespace fracperm;

namespace {

ConformingMesh unit_square(double h) {
    Domain d;
    d.flow_window = d.mech_window = {0, 0, 1, 1};
    d.buffer_fraction = 0;
    return duplicate_fracture_nodes(triangulate(d, FractureNetwork{}, h));
}

double max_stress_error(const ConformingMesh& m, const ElasticParams& p, const Eigen::VectorXd& u,
                        const Eigen::Vector3d& expected, double scale) {
    double worst = 0;
    for (const auto& t : m.triangles) worst = std::max(worst, (element_stress(m, p, u, t) - expected).norm() / scale);
    return worst;
}

}  // namespace

TEST(Lame, DefaultRockModuli) {
    const auto p = make_elastic(2.5e9, 0.35);
    // lambda = 0.875e9 / 0.405, mu = 2.5e9 / 2.7
    EXPECT_NEAR(p.lambda, 2.160493827160494e9, 1e-3);
    EXPECT_NEAR(p.mu_shear, 9.259259259259259e8, 1e-3);
}

TEST(Lame, RejectsBadModuli) {
    EXPECT_THROW(make_elastic(2.5e9, 0.5), InvalidModuli);
    EXPECT_THROW(make_elastic(2.5e9, -0.1), InvalidModuli);
    EXPECT_THROW(make_elastic(0, 0.3), InvalidModuli);
    EXPECT_NO_THROW(make_elastic(1, 0));
}

TEST(ElementStiffness, SymmetricWithRigidNullSpace) {
    const auto p = make_elastic(2.5e9, 0.35);
    const Vec2 a(0.1, 0.2), b(0.9, 0.1), c(0.4, 0.8);
    const auto Ke = element_stiffness(a, b, c, p);
    EXPECT_LT((Ke - Ke.transpose()).norm(), 1e-6 * Ke.norm());
    Eigen::Matrix<double, 6, 1> tx, ty, rot;
    const std::array<Vec2, 3> x = {a, b, c};
    for (int i = 0; i < 3; ++i) {
        tx.segment<2>(2 * i) = Vec2(1, 0);
        ty.segment<2>(2 * i) = Vec2(0, 1);
        rot.segment<2>(2 * i) = Vec2(-x[i].y(), x[i].x());
    }
    for (const auto& v : {tx, ty, rot}) EXPECT_LT((Ke * v).norm(), 1e-9 * Ke.norm());
    // Positive on a stretching mode.
    Eigen::Matrix<double, 6, 1> stretch;
    for (int i = 0; i < 3; ++i) stretch.segment<2>(2 * i) = Vec2(x[i].x(), 0);
    EXPECT_GT(stretch.dot(Ke * stretch), 0);
}

TEST(ElementStiffness, LinearFieldGivesExactStress) {
    const auto p = make_elastic(1e9, 0.25);
    const std::array<Vec2, 3> x = {Vec2(0, 0), Vec2(2, 0.5), Vec2(0.3, 1.7)};
    double area = 0;
    const auto B = strain_matrix(x[0], x[1], x[2], area);
    // u = (a x + b y, c x + d y)
    const double a = 1e-4, b = -2e-4, c = 3e-4, d = 5e-5;
    Eigen::Matrix<double, 6, 1> ue;
    for (int i = 0; i < 3; ++i) ue.segment<2>(2 * i) = Vec2(a * x[i].x() + b * x[i].y(), c * x[i].x() + d * x[i].y());
    const Eigen::Vector3d eps = B * ue;
    EXPECT_NEAR(eps[0], a, 1e-15);
    EXPECT_NEAR(eps[1], d, 1e-15);
    EXPECT_NEAR(eps[2], b + c, 1e-15);
    EXPECT_NEAR(area, 0.5 * (2 * 1.7 - 0.5 * 0.3), 1e-14);
}

TEST(ElementStiffness, DegenerateTriangleThrows) {
    double area = 0;
    EXPECT_THROW(strain_matrix(Vec2(0, 0), Vec2(1, 1), Vec2(2, 2), area), SingularElement);
    EXPECT_THROW(strain_matrix(Vec2(0, 0), Vec2(0, 1), Vec2(1, 0), area), SingularElement);  // clockwise
}

TEST(Assemble, SymmetricAndRigidModesInKernel) {
    const auto m = unit_square(0.25);
    const auto p = make_elastic(2.5e9, 0.35);
    const auto K = assemble(m, p);
    const SparseMatrix Kt = K.transpose();
    EXPECT_LT((K - Kt).norm(), 1e-9 * K.norm());
    Eigen::VectorXd tx = Eigen::VectorXd::Zero(K.rows()), rot = tx;
    for (int v = 0; v < int(m.nodes.size()); ++v) {
        tx[2 * v] = 1;
        rot[2 * v] = -m.nodes[v].y();
        rot[2 * v + 1] = m.nodes[v].x();
    }
    EXPECT_LT((K * tx).norm(), 1e-6 * K.norm());
    EXPECT_LT((K * rot).norm(), 1e-6 * K.norm());
}

TEST(TractionLoad, ResultantsMatchStressTimesLength) {
    const auto m = unit_square(0.2);
    const auto f = traction_load(m, {2e6, 3e6});
    double left = 0, right = 0, bottom = 0, top = 0;
    for (int v = 0; v < int(m.nodes.size()); ++v) {
        if (m.nodes[v].x() < 0.5) left += f[2 * v]; else right += f[2 * v];
        if (m.nodes[v].y() < 0.5) bottom += f[2 * v + 1]; else top += f[2 * v + 1];
    }
    EXPECT_NEAR(left, 2e6, 1e-6);
    EXPECT_NEAR(right, -2e6, 1e-6);
    EXPECT_NEAR(bottom, 3e6, 1e-6);
    EXPECT_NEAR(top, -3e6, 1e-6);
    EXPECT_THROW(traction_load(m, {-1, 0}), NegativeStress);
}

TEST(PinnedDofs, Modes) {
    const auto m = unit_square(0.25);
    EXPECT_EQ(pinned_dofs(m, Pinning::Full).size(), 8u);
    const auto t = pinned_dofs(m, Pinning::Tangential);
    ASSERT_EQ(t.size(), 4u);
    // Left and right mid nodes hold u_y; bottom and top hold u_x.
    EXPECT_EQ(t[int(Side::Left)] % 2, 1);
    EXPECT_EQ(t[int(Side::Right)] % 2, 1);
    EXPECT_EQ(t[int(Side::Bottom)] % 2, 0);
    EXPECT_EQ(t[int(Side::Top)] % 2, 0);
    ConformingMesh bare = m;
    bare.constrained_nodes.clear();
    bare.constrained_sides.clear();
    EXPECT_THROW(pinned_dofs(bare, Pinning::Tangential), MissingMidNode);
    EXPECT_EQ(parse_pinning("full"), Pinning::Full);
    EXPECT_THROW(parse_pinning("clamped"), InvalidArgument);
}

TEST(Solve, ZeroLoadZeroDisplacement) {
    const auto m = unit_square(0.25);
    const auto p = make_elastic(2.5e9, 0.35);
    const auto u = solve(apply_bc(assemble(m, p), m, {0, 0}));
    EXPECT_EQ(u.u.norm(), 0.0);
}

TEST(Solve, PatchTestUniaxial) {
    const auto p = make_elastic(2.5e9, 0.35);
    for (double h : {0.2, 0.1}) {
        const auto m = unit_square(h);
        const auto u = solve(apply_bc(assemble(m, p), m, {1e6, 0}));
        EXPECT_LT(max_stress_error(m, p, u.u, {-1e6, 0, 0}, 1e6), 1e-8) << "h = " << h;
        // Plane-strain strain: eps_xx = -sigma (1 - nu^2) / E, eps_yy = sigma nu (1 + nu) / E.
        const double exx = -1e6 * (1 - 0.35 * 0.35) / 2.5e9, eyy = 1e6 * 0.35 * 1.35 / 2.5e9;
        int a = -1, b = -1, c = -1;
        for (int v = 0; v < int(m.nodes.size()); ++v) {
            if (m.nodes[v] == Vec2(0, 0)) a = v;
            if (m.nodes[v] == Vec2(1, 0)) b = v;
            if (m.nodes[v] == Vec2(0, 1)) c = v;
        }
        ASSERT_GE(a, 0);
        EXPECT_NEAR(u.at(b).x() - u.at(a).x(), exx, 1e-9 * std::abs(exx));
        EXPECT_NEAR(u.at(c).y() - u.at(a).y(), eyy, 1e-9 * std::abs(eyy));
    }
}

TEST(Solve, BiaxialPatchAndEnergy) {
    const auto p = make_elastic(5e9, 0.2);
    const auto m = unit_square(0.15);
    const auto K = assemble(m, p);
    const auto sys = apply_bc(K, m, {3e6, 7e6});
    const auto u = solve(sys);
    EXPECT_LT(max_stress_error(m, p, u.u, {-3e6, -7e6, 0}, 7e6), 1e-8);
    // Clapeyron: strain energy equals half the external work.
    EXPECT_NEAR(strain_energy(K, u.u), 0.5 * traction_load(m, {3e6, 7e6}).dot(u.u), 1e-9 * strain_energy(K, u.u));
    EXPECT_LT(u.residual_norm, 1e-12);
}

TEST(Solve, FullPinningSolvable) {
    const auto p = make_elastic(2.5e9, 0.35);
    const auto m = unit_square(0.2);
    const auto u = solve(apply_bc(assemble(m, p), m, {1e6, 1e6}, Pinning::Full));
    EXPECT_TRUE(u.u.allFinite());
}

TEST(Solve, LinearInLoad) {
    const auto p = make_elastic(2.5e9, 0.35);
    const auto m = unit_square(0.25);
    const auto K = assemble(m, p);
    const auto u1 = solve(apply_bc(K, m, {1e6, 2e6})).u;
    const auto u2 = solve(apply_bc(K, m, {3e6, 6e6})).u;
    EXPECT_LT((u2 - 3 * u1).norm(), 1e-10 * u2.norm());
}

TEST(WriteTriplets, OneLinePerEntry) {
    const auto m = unit_square(0.5);
    const auto K = assemble(m, make_elastic(1e9, 0.3));
    std::ostringstream os;
    write_triplets(os, K);
    const std::string s = os.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), K.nonZeros());
}

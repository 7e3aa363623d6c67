#include <gtest/gtest.h>

#include <cmath>

#include "fracperm/upscaling.hpp"

using namespace fracperm;

namespace {

Setup setup_for(const std::vector<PolylineInput>& in, double h, double buffer = 0.5) {
    auto net = make_network(in);
    MeshOptions mo;
    mo.target_edge_length = h;
    return make_setup(net, build_domain(net, buffer), mo);
}

std::vector<PolylineInput> mirrored(std::vector<PolylineInput> in) {
    for (auto& f : in)
        for (auto& p : f.points) p = Vec2(p.y(), p.x());
    return in;
}

const std::vector<PolylineInput> kSmallNetwork = {
    {"a", {{0, 0.2}, {1, 0.45}}}, {"b", {{0.3, 0}, {0.45, 1}}}, {"c", {{0.6, 0.1}, {0.9, 1}}}, {"d", {{0.1, 0.8}, {1, 0.7}}}};

}  // namespace

TEST(EffectivePermeability, DarcyArithmetic) {
    FlowSolution sol;
    sol.q = 2e-12;
    const auto r = effective_permeability(sol, {0, 0, 2, 1}, FlowDirection::X, 1e3, 1e-3, 1e-21);
    EXPECT_EQ(r.A, 1.0);
    EXPECT_EQ(r.L, 2.0);
    EXPECT_DOUBLE_EQ(r.k_eff, 2e-12 * 1e-3 * 2 / (1 * 1e3) + 1e-21);
    const auto ry = effective_permeability(sol, {0, 0, 2, 1}, FlowDirection::Y, 1e3, 1e-3, 1e-21);
    EXPECT_EQ(ry.A, 2.0);
    EXPECT_EQ(ry.L, 1.0);
    EXPECT_TRUE(r.flags.empty());
}

TEST(EffectivePermeability, FloorAndFlags) {
    FlowSolution sol;
    sol.no_spanning_path = true;
    auto r = effective_permeability(sol, {0, 0, 1, 1}, FlowDirection::X, 1e3, 1e-3, 1e-21);
    EXPECT_EQ(r.k_eff, 1e-21);
    ASSERT_EQ(r.flags.size(), 1u);
    EXPECT_EQ(r.flags[0], "NoSpanningPath");
    sol = {};
    sol.q = -1e-30;
    sol.closed_junctions = 2;
    r = effective_permeability(sol, {0, 0, 1, 1}, FlowDirection::X, 1e3, 1e-3, 1e-21);
    EXPECT_EQ(r.k_eff, 1e-21);
    EXPECT_EQ(r.flags[0], "AllClosed");
}

TEST(RunLoadCase, UnloadedSingleFractureIsCubicLaw) {
    auto s = setup_for({{"h", {{0, 0.5}, {1, 0.5}}}, {"pad", {{0.5, 0}, {0.5, 0.1}}}, {"top", {{0.5, 0.9}, {0.5, 1}}}}, 0.1);
    const auto r = run_load_case(s, {0, 0});
    for (double sn : r.cell_sigma_n) EXPECT_EQ(sn, 0.0);
    for (const auto& h : r.cell_hydraulics) EXPECT_EQ(h.b, 1.5e-5);
    const double b = 1.5e-5;
    const double k = (b * b / 12 + 1e-21) * b / 1.0 + 1e-21;
    EXPECT_NEAR(r.x.k_eff, k, 1e-9 * k);
    EXPECT_TRUE(r.contact.converged);
}

TEST(RunLoadCase, UniformApertureMatchesAnalyticUnderLoad) {
    // A closed horizontal fracture carries sigma_yy, so b = b(sigma_yy).
    auto s = setup_for({{"h", {{0, 0.5}, {1, 0.5}}}, {"pad", {{0.5, 0}, {0.5, 0.1}}}, {"top", {{0.5, 0.9}, {0.5, 1}}}}, 0.1);
    const auto r = run_load_case(s, {4e6, 6e6});
    const double b = aperture_from_stress(6e6, s.aperture);
    const double k = (b * b / 12 + 1e-21) * b + 1e-21;
    EXPECT_NEAR(r.x.k_eff, k, 1e-4 * k);
}

TEST(RunLoadCase, DeterministicBitwise) {
    auto s = setup_for(kSmallNetwork, 0.1);
    const auto a = run_load_case(s, {4.7e6, 5.5e6});
    const auto b = run_load_case(s, {4.7e6, 5.5e6});
    EXPECT_EQ(a.x.k_eff, b.x.k_eff);
    EXPECT_EQ(a.y.k_eff, b.y.k_eff);
    EXPECT_EQ(a.cell_sigma_n, b.cell_sigma_n);
}

TEST(RunLoadCase, PressureDropInvariance) {
    auto s = setup_for(kSmallNetwork, 0.1);
    s.flow.dP = 1e3;
    const auto ref = run_load_case(s, {4.7e6, 5.5e6});
    for (double dP : {1.0, 1e6}) {
        s.flow.dP = dP;
        const auto r = run_load_case(s, {4.7e6, 5.5e6});
        EXPECT_NEAR(r.x.k_eff, ref.x.k_eff, 1e-10 * ref.x.k_eff);
        EXPECT_NEAR(r.y.k_eff, ref.y.k_eff, 1e-10 * ref.y.k_eff);
    }
}

TEST(RunLoadCase, MirrorSymmetry) {
    auto s = setup_for(kSmallNetwork, 0.05);
    auto m = setup_for(mirrored(kSmallNetwork), 0.05);
    const auto a = run_load_case(s, {3e6, 7e6});
    const auto b = run_load_case(m, {7e6, 3e6});
    EXPECT_NEAR(b.x.k_eff, a.y.k_eff, 1e-3 * a.y.k_eff);
    EXPECT_NEAR(b.y.k_eff, a.x.k_eff, 1e-3 * a.x.k_eff);
}

TEST(StressSweep, GridAndOneByOne) {
    EXPECT_EQ(mpa_grid(1, 20, 1).size(), 20u);
    EXPECT_EQ(mpa_grid(1, 20, 1).back(), 20.0);
    EXPECT_THROW(mpa_grid(1, 20, 0), InvalidArgument);
    auto s = setup_for(kSmallNetwork, 0.1);
    const auto t = stress_sweep(s, {4.7}, {5.5});
    const auto r = run_load_case(s, {4.7e6, 5.5e6});
    EXPECT_EQ(t.log10_kx(0, 0), std::log10(r.x.k_eff));
    EXPECT_EQ(t.log10_ky(0, 0), std::log10(r.y.k_eff));
    EXPECT_THROW(stress_sweep(s, {2, 1}, {1}), InvalidArgument);
    EXPECT_THROW(stress_sweep(s, {-1}, {1}), InvalidArgument);
}

TEST(StressSweep, ThreadCountDoesNotChangeResults) {
    auto s = setup_for(kSmallNetwork, 0.1);
    const std::vector<double> g = {1, 4, 9};
    const auto a = stress_sweep(s, g, g, 1);
    const auto b = stress_sweep(s, g, g, 3);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            EXPECT_EQ(a.log10_kx(r, c), b.log10_kx(r, c));
            EXPECT_EQ(a.log10_ky(r, c), b.log10_ky(r, c));
        }
    EXPECT_EQ(a.flags, b.flags);
}

TEST(StressSweep, RowsFollowSigmaYy) {
    // Horizontal fracture: k_x depends on sigma_yy only.
    auto s = setup_for({{"h", {{0, 0.5}, {1, 0.5}}}, {"pad", {{0.5, 0}, {0.5, 0.1}}}, {"top", {{0.5, 0.9}, {0.5, 1}}}}, 0.1);
    const auto t = stress_sweep(s, {1, 5}, {2, 8});
    EXPECT_NEAR(t.log10_kx(0, 0), t.log10_kx(0, 1), 1e-6);
    EXPECT_GT(t.log10_kx(0, 0), t.log10_kx(1, 0) + 0.5);
}

TEST(StressSweep, FailedPointsAreFlagged) {
    auto s = setup_for(kSmallNetwork, 0.2);
    s.elastic.lambda = -1e12;  // not positive definite
    const auto t = stress_sweep(s, {1, 2}, {1});
    for (int c = 0; c < 2; ++c) {
        EXPECT_TRUE(std::isnan(t.log10_kx(0, c)));
        ASSERT_FALSE(t.flags[c].empty());
        EXPECT_EQ(t.flags[c][0].rfind("error:", 0), 0u);
    }
}

TEST(StressSweep, IsotropicDiagonalDecreasing) {
    auto s = setup_for({{"d", {{0, 0}, {1, 1}}}}, 0.1);
    const auto t = stress_sweep(s, {1, 5, 10, 20}, {1, 5, 10, 20});
    for (int i = 1; i < 4; ++i) {
        EXPECT_LT(t.log10_kx(i, i), t.log10_kx(i - 1, i - 1));
        EXPECT_LT(t.log10_ky(i, i), t.log10_ky(i - 1, i - 1));
        EXPECT_GE(t.log10_kx(i, i), -21);
    }
}

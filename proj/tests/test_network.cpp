#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fracperm/network.hpp"

using namespace fracperm;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / ("fracperm_" + name);
    std::ofstream(path) << content;
    return path;
}

std::vector<PolylineInput> random_polylines(std::mt19937& rng, int count) {
    std::uniform_real_distribution<double> pos(0.0, 10.0), ang(0.0, M_PI), wiggle(-0.02, 0.02);
    std::vector<PolylineInput> out;
    for (int f = 0; f < count; ++f) {
        const Vec2 start(pos(rng), pos(rng));
        const double a = ang(rng);
        const Vec2 dir(std::cos(a), std::sin(a)), nrm(-std::sin(a), std::cos(a));
        PolylineInput p{std::to_string(f), {}};
        for (int k = 0; k <= 8; ++k) p.points.push_back(start + dir * (0.4 * k) + nrm * (k == 0 || k == 8 ? 0 : wiggle(rng)));
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

TEST(LoadNetwork, SingleSegment) {
    const auto path = write_temp("single.txt", "# one fracture\n0 0 1 0 7\n");
    const auto net = load_network(path, NetworkFormat::SegmentList);
    EXPECT_EQ(net.fractures.size(), 1u);
    EXPECT_EQ(net.segments.size(), 1u);
    EXPECT_EQ(net.intersections.size(), 0u);
    EXPECT_EQ(net.labels[0], "7");
}

TEST(LoadNetwork, CrossingSegmentsAreSplit) {
    const auto path = write_temp("cross.txt", "0 0 2 0 1\n1 -1 1 1 2\n");
    const auto net = load_network(path, NetworkFormat::SegmentList);
    ASSERT_EQ(net.fractures.size(), 2u);
    EXPECT_EQ(net.segments.size(), 4u);
    ASSERT_EQ(net.intersections.size(), 1u);
    const Vec2 p = net.points[net.intersections[0].point];
    EXPECT_EQ(p.x(), 1.0);
    EXPECT_EQ(p.y(), 0.0);
    for (const auto& poly : net.fractures) EXPECT_EQ(poly.size(), 3u);
    // Both segments referenced by the intersection contain the point.
    for (int s : {net.intersections[0].segment_a, net.intersections[0].segment_b}) {
        const auto& e = net.segments[s].ends;
        EXPECT_LE(point_segment_distance(p, net.points[e[0]], net.points[e[1]]), 1e-12);
    }
}

TEST(LoadNetwork, ZeroLengthSegmentIsDegenerate) {
    const auto path = write_temp("zero.txt", "0 0 0 0 1\n");
    EXPECT_THROW(load_network(path, NetworkFormat::SegmentList), DegenerateGeometry);
}

TEST(LoadNetwork, MergesNearCoincidentPointsBitwise) {
    const auto path = write_temp("merge.txt", "0 0 1 0 a\n1.0000000000001 0 1 1 b\n");
    const auto net = load_network(path, NetworkFormat::SegmentList);
    EXPECT_EQ(net.points.size(), 3u);
    ASSERT_EQ(net.intersections.size(), 1u);
}

TEST(LoadNetwork, ChainsSegmentsWithSameId) {
    const auto path = write_temp("chain.txt", "0 0 1 0 5\n1 0 2 0.5 5\n3 3 4 4 6\n");
    const auto net = load_network(path, NetworkFormat::SegmentList);
    ASSERT_EQ(net.fractures.size(), 2u);
    EXPECT_EQ(net.fractures[0].size(), 3u);
}

TEST(LoadNetwork, TJunctionSplitsTheStem) {
    const auto path = write_temp("tee.txt", "0 0 2 0 1\n1 0 1 1 2\n");
    const auto net = load_network(path, NetworkFormat::SegmentList);
    EXPECT_EQ(net.segments.size(), 3u);
    ASSERT_EQ(net.intersections.size(), 1u);
}

TEST(LoadNetwork, MalformedInput) {
    EXPECT_THROW(load_network(write_temp("bad1.txt", "0 0 1\n"), NetworkFormat::SegmentList), ParseError);
    EXPECT_THROW(load_network(write_temp("bad2.txt", "0 0 1 x 1\n"), NetworkFormat::SegmentList), ParseError);
    EXPECT_THROW(load_network(write_temp("bad3.json", "{\"a\": 1}"), NetworkFormat::PolylineJson), ParseError);
    EXPECT_THROW(load_network(write_temp("bad4.json", "[[[0,0]]]"), NetworkFormat::PolylineJson), ParseError);
    EXPECT_THROW(load_network(write_temp("bad5.json", "[[[0,0],[1"), NetworkFormat::PolylineJson), ParseError);
    EXPECT_THROW(load_network("/nonexistent/file.txt", NetworkFormat::SegmentList), ParseError);
}

TEST(LoadNetwork, CollinearOverlapIsRejected) {
    EXPECT_THROW(load_network(write_temp("overlap.txt", "0 0 2 0 1\n1 0 3 0 2\n"), NetworkFormat::SegmentList),
                 DegenerateGeometry);
}

TEST(LoadNetwork, PolylineJson) {
    const auto path = write_temp("poly.json", "[[[0,0],[0.5,0.1],[1,0]], [[0.5,-1],[0.5,1]]]");
    const auto net = load_network(path, NetworkFormat::PolylineJson);
    ASSERT_EQ(net.fractures.size(), 2u);
    EXPECT_EQ(net.intersections.size(), 1u);
    // The vertical fracture passes through the polyline's middle vertex.
    EXPECT_EQ(net.points[net.intersections[0].point], Vec2(0.5, 0.1));
}

TEST(Linearize, StraightFractureUnchanged) {
    const auto net = make_network({{"a", {{0, 0}, {1, 0}}}});
    const auto lin = linearize(net, 1e-3);
    EXPECT_EQ(lin.points, net.points);
    EXPECT_EQ(lin.fractures, net.fractures);
}

TEST(Linearize, ChordToleranceControlsVertexRemoval) {
    const auto net = make_network({{"a", {{0, 0}, {0.5, 0.1}, {1, 0}}}});
    const auto coarse = linearize(net, 0.2);
    ASSERT_EQ(coarse.segments.size(), 1u);
    EXPECT_EQ(coarse.points[coarse.segments[0].ends[0]], Vec2(0, 0));
    EXPECT_EQ(coarse.points[coarse.segments[0].ends[1]], Vec2(1, 0));
    const auto fine = linearize(net, 0.05);
    ASSERT_EQ(fine.segments.size(), 2u);
    EXPECT_EQ(fine.points[fine.segments[0].ends[1]], Vec2(0.5, 0.1));
    EXPECT_THROW(linearize(net, 0.0), InvalidArgument);
}

TEST(Linearize, KeepsIntersectionVertices) {
    // The crossing at x = 0.5 must survive even though the chord deviation is tiny.
    const auto net = make_network({{"a", {{0, 0}, {0.5, 0.001}, {1, 0}}}, {"b", {{0.5, -1}, {0.5, 1}}}});
    const auto lin = linearize(net, 0.1);
    EXPECT_EQ(lin.intersections.size(), 1u);
    EXPECT_EQ(lin.segments.size(), 4u);
}

TEST(LinearizeProperty, IdempotentAndLengthBounded) {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        const auto net = make_network(random_polylines(rng, 6));
        const double tol = 0.01 + 0.01 * (trial % 5);
        const auto once = linearize(net, tol);
        const auto twice = linearize(once, tol);
        EXPECT_EQ(once.points, twice.points);
        EXPECT_EQ(once.fractures, twice.fractures);
        const int removed = int(net.segments.size()) - int(once.segments.size());
        EXPECT_LE(net.trace_length() - once.trace_length(), tol * std::max(removed, 0) + 1e-12);
    }
}

TEST(NetworkProperty, IntersectionCountTranslationInvariant) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> shift(-100.0, 100.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto input = random_polylines(rng, 8);
        const auto base = make_network(input);
        const Vec2 t(shift(rng), shift(rng));
        for (auto& p : input)
            for (auto& q : p.points) q += t;
        EXPECT_EQ(make_network(input).intersections.size(), base.intersections.size());
    }
}

TEST(NetworkProperty, SegmentsOnlyMeetAtSharedEndpoints) {
    std::mt19937 rng(11);
    const auto net = make_network(random_polylines(rng, 12));
    for (size_t s = 0; s < net.segments.size(); ++s) {
        EXPECT_GT(net.segment_length(int(s)), 0.0);
        for (size_t t = s + 1; t < net.segments.size(); ++t) {
            const auto& A = net.segments[s].ends;
            const auto& B = net.segments[t].ends;
            if (A[0] == B[0] || A[0] == B[1] || A[1] == B[0] || A[1] == B[1]) continue;
            EXPECT_GT(segment_segment_distance(net.points[A[0]], net.points[A[1]], net.points[B[0]], net.points[B[1]]),
                      0.0);
        }
    }
}

TEST(BuildDomain, BufferArithmetic) {
    const auto net = make_network({{"a", {{0, 0}, {3, 2}}}});
    const Domain d = build_domain(net, 0.5);
    EXPECT_EQ(d.flow_window, (Rect{0, 0, 3, 2}));
    EXPECT_EQ(d.mech_window, (Rect{-1.5, -1.5, 4.5, 3.5}));
    EXPECT_TRUE(d.mech_window.strictly_contains(d.flow_window));
    const Domain none = build_domain(net, 0.0);
    EXPECT_EQ(none.mech_window, none.flow_window);
}

TEST(BuildDomain, DegenerateBoxIsPadded) {
    const auto net = make_network({{"a", {{0, 0}, {1, 0}}}});
    const Domain d = build_domain(net, 0.0);
    EXPECT_DOUBLE_EQ(d.flow_window.ymin, -1e-6);
    EXPECT_DOUBLE_EQ(d.flow_window.ymax, 1e-6);
    EXPECT_GT(d.mech_window.height(), 0.0);
}

TEST(BuildDomain, EmptyNetwork) {
    EXPECT_THROW(build_domain(FractureNetwork{}, 0.5), EmptyNetwork);
}

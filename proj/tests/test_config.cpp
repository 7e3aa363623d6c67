#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>

#include "fracperm/fracperm.hpp"

using namespace fracperm;
namespace fs = std::filesystem;

namespace {

const fs::path kData = FRACPERM_TEST_DATA;

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("fracperm-test-" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::vector<std::string> problems_of(const json& doc) {
    try {
        config_from_json(doc, kData);
    } catch (const ConfigErrors& e) {
        return e.problems();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& s) {
    for (const auto& p : v)
        if (p.find(s) != std::string::npos) return true;
    return false;
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

}  // namespace

TEST(Config, MinimalUsesDefaults) {
    const auto c = validate_config(kData / "minimal.json");
    EXPECT_EQ(c.network_path, (kData / "single45.txt").lexically_normal());
    EXPECT_EQ(c.elastic.E, 2.5e9);
    EXPECT_EQ(c.elastic.nu, 0.35);
    EXPECT_EQ(c.aperture.b_m, 1.5e-5);
    EXPECT_EQ(c.load.sigma_xx, 4.7e6);
    EXPECT_EQ(c.load.sigma_yy, 5.5e6);
    EXPECT_EQ(c.sweep_sigma_xx_mpa.size(), 20u);
    EXPECT_EQ(c.contact.tangential, TangentialMode::Tied);
    EXPECT_EQ(c.output.dir, (kData / "fracperm-out").lexically_normal());
}

TEST(Config, BadPoissonNamesSection) {
    const auto p = problems_of({{"network", {{"path", "single45.txt"}}}, {"elastic", {{"nu", 0.5}}}});
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0].rfind("elastic", 0), 0u) << p[0];
}

TEST(Config, MissingNetworkFile) {
    EXPECT_TRUE(mentions(problems_of({{"network", {{"path", "nope.txt"}}}}), "not found"));
    EXPECT_TRUE(mentions(problems_of(json::object()), "network.path"));
}

TEST(Config, UnknownFieldRejected) {
    const auto p = problems_of({{"network", {{"path", "single45.txt"}}}, {"mesh", {{"edge", 0.1}}}});
    EXPECT_TRUE(mentions(p, "mesh.edge"));
    EXPECT_FALSE(problems_of({{"network", {{"path", "single45.txt"}}}, {"colour", 1}}).empty());
}

TEST(Config, ErrorsAreAggregated) {
    const auto p = problems_of({{"network", {{"path", "single45.txt"}}},
                                {"mesh", {{"target_edge_length", -1}}},
                                {"flow", {{"dP", 0}}},
                                {"load", {{"sigma_xx", -2}}},
                                {"sweep", {{"sigma_yy_mpa", {3, 2}}}},
                                {"mechanics", {{"pinning", "glued"}}}});
    EXPECT_EQ(p.size(), 5u);
    EXPECT_TRUE(mentions(p, "ascending"));
}

TEST(Config, TypeErrors) {
    EXPECT_FALSE(problems_of({{"network", {{"path", "single45.txt"}}}, {"mesh", {{"target_edge_length", "0.1"}}}})
                     .empty());
    EXPECT_FALSE(problems_of({{"network", {{"path", "single45.txt"}}}, {"contact", {{"max_iterations", 2.5}}}})
                     .empty());
}

TEST(Config, SweepRangeForm) {
    const auto c = config_from_json(
        {{"network", {{"path", "single45.txt"}}}, {"sweep", {{"sigma_xx_mpa", {{"from", 2}, {"to", 10}, {"step", 4}}}}}},
        kData);
    EXPECT_EQ(c.sweep_sigma_xx_mpa, (std::vector<double>{2, 6, 10}));
}

TEST(Config, CommentsAndUnreadableFile) {
    TempDir tmp;
    {
        std::ofstream out(tmp.path() / "c.json");
        out << "// network only\n{\"network\": {\"path\": \"" << (kData / "single45.txt").string() << "\"}}\n";
    }
    EXPECT_NO_THROW(validate_config(tmp.path() / "c.json"));
    EXPECT_THROW(validate_config(tmp.path() / "missing.json"), ConfigError);
    {
        std::ofstream out(tmp.path() / "bad.json");
        out << "{\"network\": ";
    }
    EXPECT_THROW(validate_config(tmp.path() / "bad.json"), ConfigError);
}

TEST(Config, EnvironmentOverridesOutputDir) {
    auto c = validate_config(kData / "minimal.json");
    ::setenv(kOutputDirEnv, "/tmp/elsewhere", 1);
    apply_environment(c);
    ::unsetenv(kOutputDirEnv);
    EXPECT_EQ(c.output.dir, fs::path("/tmp/elsewhere"));
}

TEST(Config, JsonRoundTrip) {
    auto c = validate_config(kData / "crossing.json");
    c.flow_window = Rect{0, 0, 1, 1};
    c.contact.tangential = TangentialMode::Free;
    const json j = to_json(c);
    const auto back = config_from_json(j, "/");
    EXPECT_EQ(to_json(back), j);
}

TEST(Runner, SingleRunReproducesFromEmbeddedConfig) {
    TempDir tmp;
    auto c = validate_config(kData / "single45.json");
    c.mesh.target_edge_length = 0.1;
    c.output.dir = tmp.path() / "a";
    c.output.face_diagnostics = true;
    const auto a = run_single(c, true);
    for (const char* f : {"result.json", "segments.csv", "flow_x.csv", "flow_y.csv", "faces.csv"})
        EXPECT_TRUE(fs::exists(c.output.dir / f)) << f;

    const std::string line = first_line(c.output.dir / "segments.csv");
    ASSERT_EQ(line.rfind("# config: ", 0), 0u);
    auto c2 = config_from_json(json::parse(line.substr(10)), "/");
    c2.output.dir = tmp.path() / "b";
    const auto b = run_single(c2);
    EXPECT_EQ(a.result.x.k_eff, b.result.x.k_eff);
    EXPECT_EQ(a.result.y.k_eff, b.result.y.k_eff);

    std::ifstream in(tmp.path() / "a" / "result.json");
    const json r = json::parse(in);
    EXPECT_EQ(r["status"], "ok");
    EXPECT_EQ(r["x"]["k_eff"].get<double>(), a.result.x.k_eff);
}

TEST(Runner, ApertureCurveFile) {
    TempDir tmp;
    auto c = validate_config(kData / "minimal.json");
    c.output.dir = tmp.path();
    const auto curve = run_aperture_curve(c, 20, 40);
    ASSERT_EQ(curve.size(), 41u);
    EXPECT_EQ(curve.front().b, 1.5e-5);
    for (size_t i = 1; i < curve.size(); ++i) EXPECT_LT(curve[i].b, curve[i - 1].b);
    std::ifstream in(tmp.path() / "aperture_curve.csv");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 43);  // config line, header, 41 points
    EXPECT_THROW(run_aperture_curve(c, -1, 10), StageError);
}

TEST(Runner, MeshOnlyCensus) {
    TempDir tmp;
    auto c = validate_config(kData / "crossing.json");
    c.output.dir = tmp.path();
    const auto rep = run_mesh_only(c);
    EXPECT_TRUE(rep.ok());
    EXPECT_EQ(rep.intersections, 1);
    EXPECT_EQ(rep.max_copies, 4);
    std::ifstream in(tmp.path() / "census.json");
    EXPECT_EQ(json::parse(in)["status"], "ok");
}

TEST(Runner, SweepFiles) {
    TempDir tmp;
    auto c = validate_config(kData / "single45.json");
    c.mesh.target_edge_length = 0.1;
    c.sweep_sigma_xx_mpa = {1, 5};
    c.sweep_sigma_yy_mpa = {2, 6, 10};
    c.output.dir = tmp.path();
    const auto t = run_sweep(c, 2);
    EXPECT_FALSE(sweep_has_failures(t));
    for (const char* f : {"sweep_kx.csv", "sweep_ky.csv", "sweep.json"}) EXPECT_TRUE(fs::exists(tmp.path() / f));
    std::ifstream in(tmp.path() / "sweep_kx.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    EXPECT_EQ(line.rfind("sigma_yy_mpa\\sigma_xx_mpa,1,5", 0), 0u) << line;
}

TEST(Runner, StageErrorReport) {
    const StageError e("mesh", "TopologyError", "bad");
    const json j = error_report(e);
    EXPECT_EQ(j["status"], "error");
    EXPECT_EQ(j["stage"], "mesh");
    EXPECT_EQ(j["kind"], "TopologyError");
    try {
        in_stage("config", [] { return validate_config(kData / "none.json"); });
        FAIL();
    } catch (const StageError& s) {
        EXPECT_EQ(s.stage(), "config");
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(std::nan("")), "nan");
}

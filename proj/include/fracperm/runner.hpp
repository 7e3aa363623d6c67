#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"

namespace fracperm {

/// Shortest round-trip text for a double; "nan" for NaN.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// JSON number, or null when not finite.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// An error tagged with the pipeline stage it came from.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& inner)
        : Error(inner.kind(), inner.what()), stage_(std::move(stage)) {
        if (auto* ce = dynamic_cast<const ConfigErrors*>(&inner)) details_ = ce->problems();
    }
    StageError(std::string stage, const std::string& kind, const std::string& what)
        : Error(kind, what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    std::string stage_;
    std::vector<std::string> details_;
};

/// Runs `fn`, re-throwing any failure as a StageError for `stage`.
template <class F>
auto in_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    } catch (const std::exception& e) {
        throw StageError(stage, "InternalError", e.what());
    }
}

inline json error_report(const StageError& e) {
    json j = {{"status", "error"}, {"stage", e.stage()}, {"kind", e.kind()}, {"message", e.what()}};
    if (!e.details().empty()) j["details"] = e.details();
    return j;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw Error("IOError", "cannot write " + p.string());
    return out;
}

inline void write_json_file(const std::filesystem::path& p, const json& j) {
    auto out = open_output(p);
    out << j.dump(2) << '\n';
}

/// Output CSVs open with a comment line holding the compact resolved config.
inline std::ofstream open_csv(const std::filesystem::path& p, const json& config) {
    auto out = open_output(p);
    out << "# config: " << config.dump() << '\n';
    return out;
}

inline json upscale_json(const UpscaleResult& r) {
    return {{"direction", direction_name(r.direction)},
            {"q", r.q},
            {"A", r.A},
            {"L", r.L},
            {"k_eff", r.k_eff},
            {"log10_k_eff", std::log10(r.k_eff)},
            {"flags", r.flags}};
}

}  // namespace detail

/// Per-segment diagnostics: contact stress and the aperture / permeability
/// it implies.
struct SegmentDiagnostic {
    int segment;
    std::string label;
    double length;
    double sigma_n;  // Pa
    double b;        // m
    double k_f;      // m^2, cubic law
};

inline std::vector<SegmentDiagnostic> segment_diagnostics(const Setup& s, const LoadCaseResult& r) {
    std::vector<SegmentDiagnostic> out;
    for (int k = 0; k < int(s.network.segments.size()); ++k) {
        const double sn = std::max(r.segment_sigma_n[k], 0.0);
        const double b = aperture_from_stress(sn, s.aperture);
        const auto h = cell_hydraulics(b, std::max(s.network.segment_length(k), 1e-300), s.aperture);
        out.push_back({k, s.network.labels[s.network.segments[k].fracture], s.network.segment_length(k), sn, b, h.k_f});
    }
    return out;
}

struct SingleRun {
    Setup setup;
    LoadCaseResult result;
    json summary;
};

/// `single`: one load case, result JSON and optional field dumps.
inline SingleRun run_single(const RunConfig& c, bool dump_fields = false) {
    const json cfg = to_json(c);
    SingleRun run;
    run.setup = in_stage("mesh", [&] { return make_setup(c); });
    run.result = in_stage("solve", [&] { return run_load_case(run.setup, c.load); });
    const auto& s = run.setup;
    const auto& r = run.result;
    const auto diag = segment_diagnostics(s, r);

    json& j = run.summary;
    j["status"] = "ok";
    j["config"] = cfg;
    j["load"] = {{"sigma_xx", c.load.sigma_xx}, {"sigma_yy", c.load.sigma_yy}};
    j["x"] = detail::upscale_json(r.x);
    j["y"] = detail::upscale_json(r.y);
    j["contact"] = {{"iterations", r.contact.iterations},
                    {"converged", r.contact.converged},
                    {"regularized", r.contact.regularized},
                    {"complementarity", r.contact.complementarity},
                    {"min_gap", r.contact.min_gap},
                    {"relative_residual", r.contact.displacement.residual_norm}};
    j["flow"] = {{"mass_balance_x", r.flow_x.mass_balance_residual},
                 {"mass_balance_y", r.flow_y.mass_balance_residual}};
    j["mesh"] = {{"nodes", s.mesh.nodes.size()},
                 {"triangles", s.mesh.triangles.size()},
                 {"faces", s.mesh.faces.size()},
                 {"flow_cells", s.graph.cells.size()}};
    json segs = json::array();
    for (const auto& d : diag)
        segs.push_back({{"segment", d.segment}, {"fracture", d.label}, {"length", d.length},
                        {"sigma_n", d.sigma_n}, {"b", d.b}, {"k_f", d.k_f}});
    j["segments"] = segs;

    in_stage("output", [&] {
        const auto& dir = c.output.dir;
        detail::write_json_file(dir / "result.json", j);
        {
            auto out = detail::open_csv(dir / "segments.csv", cfg);
            out << "segment,fracture,length_m,sigma_n_pa,aperture_m,k_f_m2\n";
            for (const auto& d : diag)
                out << d.segment << ',' << d.label << ',' << format_double(d.length) << ',' << format_double(d.sigma_n)
                    << ',' << format_double(d.b) << ',' << format_double(d.k_f) << '\n';
        }
        if (dump_fields || c.output.dump_fields) {
            for (auto [name, sol] : {std::pair{"flow_x.csv", &r.flow_x}, std::pair{"flow_y.csv", &r.flow_y}}) {
                auto out = detail::open_csv(dir / name, cfg);
                out << "cell,face,segment,x,y,length_m,sigma_n_pa,aperture_m,pressure_pa\n";
                for (int i = 0; i < int(s.graph.cells.size()); ++i) {
                    const auto& cell = s.graph.cells[i];
                    out << i << ',' << cell.face << ',' << cell.segment << ',' << format_double(cell.centroid.x())
                        << ',' << format_double(cell.centroid.y()) << ',' << format_double(cell.length) << ','
                        << format_double(r.cell_sigma_n[i]) << ',' << format_double(r.cell_hydraulics[i].b) << ','
                        << format_double(sol->pressure[i]) << '\n';
                }
            }
        }
        if (c.output.face_diagnostics) {
            auto out = detail::open_csv(dir / "faces.csv", cfg);
            write_face_diagnostics(out, s.mesh, r.contact);
        }
        if (c.output.mesh_dump) {
            std::filesystem::create_directories(dir);
            write_mesh(dir / "mesh.txt", s.mesh);
        }
        return 0;
    });
    return run;
}

inline void write_sweep_csv(std::ostream& out, const SweepTable& t, const Eigen::MatrixXd& m) {
    out << "sigma_yy_mpa\\sigma_xx_mpa";
    for (double x : t.sigma_xx_mpa) out << ',' << format_double(x);
    out << '\n';
    for (int r = 0; r < m.rows(); ++r) {
        out << format_double(t.sigma_yy_mpa[r]);
        for (int c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
        out << '\n';
    }
}

inline json sweep_json(const SweepTable& t, const json& cfg) {
    auto matrix = [](const Eigen::MatrixXd& m) {
        json rows = json::array();
        for (int r = 0; r < m.rows(); ++r) {
            json row = json::array();
            for (int c = 0; c < m.cols(); ++c) row.push_back(finite_or_null(m(r, c)));
            rows.push_back(row);
        }
        return rows;
    };
    json flags = json::object();
    const int cols = int(t.sigma_xx_mpa.size());
    for (size_t i = 0; i < t.flags.size(); ++i) {
        if (t.flags[i].empty()) continue;
        flags[format_double(t.sigma_yy_mpa[i / cols]) + "," + format_double(t.sigma_xx_mpa[i % cols])] = t.flags[i];
    }
    return {{"status", "ok"},
            {"config", cfg},
            {"units", "log10(k_eff [m^2]); rows sigma_yy [MPa], columns sigma_xx [MPa]"},
            {"sigma_xx_mpa", t.sigma_xx_mpa},
            {"sigma_yy_mpa", t.sigma_yy_mpa},
            {"log10_k_x", matrix(t.log10_kx)},
            {"log10_k_y", matrix(t.log10_ky)},
            {"flags", flags}};
}

inline bool sweep_has_failures(const SweepTable& t) {
    for (const auto& f : t.flags)
        for (const auto& s : f)
            if (s.rfind("error:", 0) == 0) return true;
    return false;
}

/// `sweep`: log10 k_eff tables in both directions.
inline SweepTable run_sweep(const RunConfig& c, int jobs = 1) {
    const json cfg = to_json(c);
    const Setup s = in_stage("mesh", [&] { return make_setup(c); });
    const SweepTable t =
        in_stage("sweep", [&] { return stress_sweep(s, c.sweep_sigma_xx_mpa, c.sweep_sigma_yy_mpa, jobs); });
    in_stage("output", [&] {
        const auto& dir = c.output.dir;
        for (auto [name, m] : {std::pair{"sweep_kx.csv", &t.log10_kx}, std::pair{"sweep_ky.csv", &t.log10_ky}}) {
            auto out = detail::open_csv(dir / name, cfg);
            write_sweep_csv(out, t, *m);
        }
        detail::write_json_file(dir / "sweep.json", sweep_json(t, cfg));
        return 0;
    });
    return t;
}

/// `mesh-only`: mesh interchange file and census report.
inline CensusReport run_mesh_only(const RunConfig& c) {
    const json cfg = to_json(c);
    const Setup s = in_stage("mesh", [&] { return make_setup(c); });
    const CensusReport rep = census(s.mesh);
    in_stage("output", [&] {
        const auto& dir = c.output.dir;
        std::filesystem::create_directories(dir);
        write_mesh(dir / "mesh.txt", s.mesh);
        json j = {{"status", rep.ok() ? "ok" : "error"},
                  {"config", cfg},
                  {"nodes", s.mesh.nodes.size()},
                  {"triangles", s.mesh.triangles.size()},
                  {"faces", s.mesh.faces.size()},
                  {"flow_cells", s.graph.cells.size()},
                  {"intersection_groups", s.graph.intersection_groups().size()},
                  {"census",
                   {{"locations", rep.locations},
                    {"tips", rep.tips},
                    {"interior", rep.interior},
                    {"t_junctions", rep.t_junctions},
                    {"intersections", rep.intersections},
                    {"other", rep.other},
                    {"max_copies", rep.max_copies},
                    {"violations", rep.violations}}}};
        detail::write_json_file(dir / "census.json", j);
        return 0;
    });
    if (!rep.ok()) throw StageError("census", "TopologyError", rep.violations.front());
    return rep;
}

/// `aperture-curve`: (sigma, b, k_g) at steps + 1 stresses from 0 to sigma_max.
inline std::vector<CurvePoint> run_aperture_curve(const RunConfig& c, double sigma_max_mpa, int steps) {
    if (!(sigma_max_mpa > 0) || !std::isfinite(sigma_max_mpa))
        throw StageError("aperture-curve", "InvalidArgument", "--sigma-max must be a positive number of MPa");
    if (steps < 1) throw StageError("aperture-curve", "InvalidArgument", "--steps must be >= 1");
    std::vector<double> sigma;
    for (int i = 0; i <= steps; ++i) sigma.push_back(sigma_max_mpa * 1e6 * i / steps);
    const auto curve = in_stage("aperture-curve", [&] { return stress_permeability_curve(sigma, c.aperture); });
    in_stage("output", [&] {
        auto out = detail::open_csv(c.output.dir / "aperture_curve.csv", to_json(c));
        out << "sigma_mpa,aperture_m,k_g_m2\n";
        for (const auto& p : curve)
            out << format_double(p.sigma * 1e-6) << ',' << format_double(p.b) << ',' << format_double(p.k) << '\n';
        return 0;
    });
    return curve;
}

}  // namespace fracperm

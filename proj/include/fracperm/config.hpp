#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aperture.hpp"
#include "contact.hpp"
#include "elasticity.hpp"
#include "errors.hpp"
#include "mesh.hpp"
#include "network.hpp"
#include "upscaling.hpp"

namespace fracperm {

using json = nlohmann::json;

/// Environment variable that replaces output.dir when set and non-empty.
inline constexpr const char* kOutputDirEnv = "FRACPERM_OUTPUT_DIR";

struct OutputOptions {
    std::filesystem::path dir = "fracperm-out";
    bool dump_fields = false;       // flow pressure / aperture per cell
    bool face_diagnostics = false;  // per-face gap and contact pressure
    bool mesh_dump = false;         // mesh interchange file next to results
};

/// Fully resolved run configuration. Units: Pa, m, Pa s; sweep grids in MPa.
struct RunConfig {
    std::filesystem::path network_path;
    NetworkFormat network_format = NetworkFormat::SegmentList;
    double chord_tolerance = 0;  // m, 0 keeps polylines as given

    double buffer_fraction = 0.5;
    std::optional<Rect> flow_window;  // default: network bounding box
    MeshOptions mesh;

    ElasticParams elastic = make_elastic(2.5e9, 0.35);
    ContactControl contact;
    ApertureParams aperture;
    FlowParams flow;
    BoundaryStress load{4.7e6, 5.5e6};

    std::vector<double> sweep_sigma_xx_mpa;
    std::vector<double> sweep_sigma_yy_mpa;

    OutputOptions output;
};

inline std::vector<double> default_sweep_grid() { return mpa_grid(1, 20, 1); }

namespace detail {

/// Walks one JSON object, collecting typed values and every problem with its
/// dotted field path.
class FieldReader {
public:
    FieldReader(const json* obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {
        if (obj_ && !obj_->is_object()) {
            fail("", "must be an object");
            obj_ = nullptr;
        }
    }

    std::string where(const std::string& key) const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }
    void fail(const std::string& key, const std::string& msg) { errors_.push_back(where(key) + ": " + msg); }

    bool has(const std::string& key) const { return obj_ && obj_->contains(key); }

    FieldReader child(const std::string& key) {
        seen_.push_back(key);
        return FieldReader(has(key) ? &(*obj_)[key] : nullptr, where(key), errors_);
    }

    void number(const std::string& key, double& out) {
        seen_.push_back(key);
        if (!has(key)) return;
        const auto& v = (*obj_)[key];
        if (!v.is_number()) return fail(key, "must be a number");
        out = v.get<double>();
        if (!std::isfinite(out)) fail(key, "must be finite");
    }
    void integer(const std::string& key, int& out) {
        seen_.push_back(key);
        if (!has(key)) return;
        const auto& v = (*obj_)[key];
        if (!v.is_number_integer()) return fail(key, "must be an integer");
        out = v.get<int>();
    }
    void boolean(const std::string& key, bool& out) {
        seen_.push_back(key);
        if (!has(key)) return;
        const auto& v = (*obj_)[key];
        if (!v.is_boolean()) return fail(key, "must be true or false");
        out = v.get<bool>();
    }
    bool string(const std::string& key, std::string& out) {
        seen_.push_back(key);
        if (!has(key)) return false;
        const auto& v = (*obj_)[key];
        if (!v.is_string()) {
            fail(key, "must be a string");
            return false;
        }
        out = v.get<std::string>();
        return true;
    }
    /// Array of numbers, or {"from", "to", "step"}.
    bool grid(const std::string& key, std::vector<double>& out) {
        seen_.push_back(key);
        if (!has(key)) return false;
        const auto& v = (*obj_)[key];
        if (v.is_array()) {
            std::vector<double> g;
            for (const auto& x : v) {
                if (!x.is_number()) {
                    fail(key, "entries must be numbers");
                    return false;
                }
                g.push_back(x.get<double>());
            }
            out = std::move(g);
            return true;
        }
        if (v.is_object()) {
            FieldReader r(&v, where(key), errors_);
            double lo = NAN, hi = NAN, step = NAN;
            r.number("from", lo);
            r.number("to", hi);
            r.number("step", step);
            r.finish();
            if (!(step > 0) || !(hi >= lo)) {
                fail(key, "range needs from <= to and step > 0");
                return false;
            }
            out = mpa_grid(lo, hi, step);
            return true;
        }
        fail(key, "must be an array of MPa values or {from, to, step}");
        return false;
    }

    /// Reports keys that no reader asked for (typos).
    void finish() {
        if (!obj_) return;
        for (auto it = obj_->begin(); it != obj_->end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) fail(it.key(), "unknown field");
    }

private:
    const json* obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::vector<std::string> seen_;
};

inline std::string join_errors(const std::vector<std::string>& errors) {
    std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    return msg;
}

}  // namespace detail

/// ConfigError carrying every individual problem as "field.path: message".
class ConfigErrors : public ConfigError {
public:
    explicit ConfigErrors(std::vector<std::string> problems)
        : ConfigError(detail::join_errors(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Builds a RunConfig from a parsed document. Relative paths are taken
/// against `base_dir`.
inline RunConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    std::vector<std::string> errors;
    RunConfig c;
    c.sweep_sigma_xx_mpa = default_sweep_grid();
    c.sweep_sigma_yy_mpa = default_sweep_grid();
    detail::FieldReader root(&doc, "", errors);

    {
        auto r = root.child("network");
        std::string path, format;
        if (!r.string("path", path)) r.fail("path", "is required");
        if (r.string("format", format)) {
            try {
                c.network_format = parse_network_format(format);
            } catch (const Error& e) {
                r.fail("format", e.what());
            }
        }
        r.number("chord_tolerance", c.chord_tolerance);
        if (!(c.chord_tolerance >= 0)) r.fail("chord_tolerance", "must be >= 0");
        if (!path.empty()) {
            std::filesystem::path p(path);
            if (p.is_relative()) p = base_dir / p;
            c.network_path = p.lexically_normal();
            if (!std::filesystem::is_regular_file(c.network_path))
                r.fail("path", "network file not found: " + c.network_path.string());
        }
        r.finish();
    }
    {
        auto r = root.child("domain");
        r.number("buffer_fraction", c.buffer_fraction);
        if (!(c.buffer_fraction >= 0)) r.fail("buffer_fraction", "must be >= 0");
        if (r.has("flow_window")) {
            std::vector<double> w;
            r.grid("flow_window", w);
            if (w.size() != 4 || !(w[2] > w[0]) || !(w[3] > w[1]))
                r.fail("flow_window", "must be [xmin, ymin, xmax, ymax] with positive extent");
            else
                c.flow_window = Rect{w[0], w[1], w[2], w[3]};
        }
        r.finish();
    }
    {
        auto r = root.child("mesh");
        r.number("target_edge_length", c.mesh.target_edge_length);
        r.number("min_angle_deg", c.mesh.min_angle_deg);
        r.number("min_feature_distance", c.mesh.min_feature_distance);
        if (!(c.mesh.target_edge_length > 0)) r.fail("target_edge_length", "must be > 0");
        if (!(c.mesh.min_angle_deg > 0 && c.mesh.min_angle_deg <= 30))
            r.fail("min_angle_deg", "must lie in (0, 30]");
        if (!(c.mesh.min_feature_distance > 0)) r.fail("min_feature_distance", "must be > 0");
        r.finish();
    }
    {
        auto r = root.child("elastic");
        double E = c.elastic.E, nu = c.elastic.nu;
        r.number("E", E);
        r.number("nu", nu);
        try {
            c.elastic = make_elastic(E, nu);
        } catch (const InvalidModuli& e) {
            r.fail("", e.what());
        }
        r.finish();
    }
    {
        auto r = root.child("mechanics");
        std::string s;
        if (r.string("pinning", s)) {
            try {
                c.contact.pinning = parse_pinning(s);
            } catch (const Error& e) {
                r.fail("pinning", e.what());
            }
        }
        if (r.string("tangential", s)) {
            try {
                c.contact.tangential = parse_tangential(s);
            } catch (const Error& e) {
                r.fail("tangential", e.what());
            }
        }
        r.finish();
    }
    {
        auto r = root.child("contact");
        auto& k = c.contact;
        r.number("penalty_factor", k.penalty_factor);
        r.integer("max_iterations", k.max_iterations);
        r.number("gap_tol", k.gap_tol);
        r.number("pressure_tol", k.pressure_tol);
        r.number("complementarity_tol", k.complementarity_tol);
        if (!(k.penalty_factor > 0)) r.fail("penalty_factor", "must be > 0");
        if (!(k.max_iterations >= 1)) r.fail("max_iterations", "must be >= 1");
        if (!(k.gap_tol > 0)) r.fail("gap_tol", "must be > 0");
        if (!(k.pressure_tol > 0)) r.fail("pressure_tol", "must be > 0");
        if (!(k.complementarity_tol > 0)) r.fail("complementarity_tol", "must be > 0");
        r.finish();
    }
    {
        auto r = root.child("aperture");
        auto& a = c.aperture;
        r.number("b_m", a.b_m);
        r.number("alpha", a.alpha);
        r.number("beta", a.beta);
        r.number("F", a.F);
        r.number("b_c", a.b_c);
        r.number("k_m", a.k_m);
        for (const auto& v : aperture_violations(a)) r.fail("", v);
        r.finish();
    }
    {
        auto r = root.child("flow");
        r.number("viscosity", c.flow.viscosity);
        r.number("dP", c.flow.dP);
        if (!(c.flow.viscosity > 0)) r.fail("viscosity", "must be > 0");
        if (!(c.flow.dP > 0)) r.fail("dP", "must be > 0");
        r.finish();
    }
    {
        auto r = root.child("load");
        r.number("sigma_xx", c.load.sigma_xx);
        r.number("sigma_yy", c.load.sigma_yy);
        if (!(c.load.sigma_xx >= 0)) r.fail("sigma_xx", "must be >= 0 (compression positive, Pa)");
        if (!(c.load.sigma_yy >= 0)) r.fail("sigma_yy", "must be >= 0 (compression positive, Pa)");
        r.finish();
    }
    {
        auto r = root.child("sweep");
        for (auto [key, grid] : {std::pair{"sigma_xx_mpa", &c.sweep_sigma_xx_mpa},
                                 std::pair{"sigma_yy_mpa", &c.sweep_sigma_yy_mpa}}) {
            r.grid(key, *grid);
            if (grid->empty()) r.fail(key, "must not be empty");
            for (size_t i = 0; i < grid->size(); ++i) {
                if (!((*grid)[i] >= 0)) {
                    r.fail(key, "values must be >= 0");
                    break;
                }
                if (i > 0 && !((*grid)[i] > (*grid)[i - 1])) {
                    r.fail(key, "values must be strictly ascending");
                    break;
                }
            }
        }
        r.finish();
    }
    {
        auto r = root.child("output");
        std::string dir;
        if (r.string("dir", dir)) {
            std::filesystem::path p(dir);
            c.output.dir = p.is_relative() ? (base_dir / p).lexically_normal() : p;
        } else {
            c.output.dir = (base_dir / c.output.dir).lexically_normal();
        }
        r.boolean("dump_fields", c.output.dump_fields);
        r.boolean("face_diagnostics", c.output.face_diagnostics);
        r.boolean("mesh_dump", c.output.mesh_dump);
        r.finish();
    }
    root.finish();
    if (!errors.empty()) throw ConfigErrors(std::move(errors));
    return c;
}

inline RunConfig validate_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigErrors({"<file>: cannot read configuration " + path.string()});
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigErrors({std::string("<file>: ") + e.what()});
    }
    auto base = std::filesystem::absolute(path).parent_path();
    return config_from_json(doc, base);
}

/// Applies the output-directory environment override.
inline void apply_environment(RunConfig& c) {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) c.output.dir = env;
}

/// The resolved configuration as a document that config_from_json accepts
/// back unchanged. Paths are written absolute.
inline json to_json(const RunConfig& c) {
    json j;
    j["network"] = {{"path", std::filesystem::absolute(c.network_path).string()},
                    {"format", format_name(c.network_format)},
                    {"chord_tolerance", c.chord_tolerance}};
    j["domain"] = {{"buffer_fraction", c.buffer_fraction}};
    if (c.flow_window) {
        const Rect& w = *c.flow_window;
        j["domain"]["flow_window"] = {w.xmin, w.ymin, w.xmax, w.ymax};
    }
    j["mesh"] = {{"target_edge_length", c.mesh.target_edge_length},
                 {"min_angle_deg", c.mesh.min_angle_deg},
                 {"min_feature_distance", c.mesh.min_feature_distance}};
    j["elastic"] = {{"E", c.elastic.E}, {"nu", c.elastic.nu}};
    j["mechanics"] = {{"pinning", pinning_name(c.contact.pinning)},
                      {"tangential", tangential_name(c.contact.tangential)}};
    j["contact"] = {{"penalty_factor", c.contact.penalty_factor},
                    {"max_iterations", c.contact.max_iterations},
                    {"gap_tol", c.contact.gap_tol},
                    {"pressure_tol", c.contact.pressure_tol},
                    {"complementarity_tol", c.contact.complementarity_tol}};
    j["aperture"] = {{"b_m", c.aperture.b_m}, {"alpha", c.aperture.alpha}, {"beta", c.aperture.beta},
                     {"F", c.aperture.F},     {"b_c", c.aperture.b_c},     {"k_m", c.aperture.k_m}};
    j["flow"] = {{"viscosity", c.flow.viscosity}, {"dP", c.flow.dP}};
    j["load"] = {{"sigma_xx", c.load.sigma_xx}, {"sigma_yy", c.load.sigma_yy}};
    j["sweep"] = {{"sigma_xx_mpa", c.sweep_sigma_xx_mpa}, {"sigma_yy_mpa", c.sweep_sigma_yy_mpa}};
    j["output"] = {{"dir", std::filesystem::absolute(c.output.dir).string()},
                   {"dump_fields", c.output.dump_fields},
                   {"face_diagnostics", c.output.face_diagnostics},
                   {"mesh_dump", c.output.mesh_dump}};
    return j;
}

/// Loads the network and builds the load-independent part of a run.
inline Setup make_setup(const RunConfig& c) {
    FractureNetwork net = load_network(c.network_path, c.network_format);
    if (c.chord_tolerance > 0) net = linearize(net, c.chord_tolerance);
    Domain d = build_domain(net, c.buffer_fraction);
    if (c.flow_window) {
        const Rect& w = *c.flow_window;
        const double buffer = c.buffer_fraction * std::max(w.width(), w.height());
        d.flow_window = w;
        d.mech_window = {w.xmin - buffer, w.ymin - buffer, w.xmax + buffer, w.ymax + buffer};
    }
    Setup s = make_setup(std::move(net), d, c.mesh);
    s.elastic = c.elastic;
    s.aperture = c.aperture;
    s.contact = c.contact;
    s.flow = c.flow;
    return s;
}

}  // namespace fracperm

// fracperm: stress-dependent permeability of 2D fracture networks.
//
//   fracperm single         --config run.json [--dump-fields]
//   fracperm sweep          --config run.json [--jobs N]
//   fracperm mesh-only      --config run.json
//   fracperm aperture-curve --config run.json --sigma-max 20 --steps 40
//
// Results go to output.dir from the config ($FRACPERM_OUTPUT_DIR overrides).
// On failure a JSON error report is printed on stderr and the exit status is 1.

#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "fracperm/fracperm.hpp"

using namespace fracperm;

namespace {

RunConfig load_config(const std::string& path) {
    RunConfig c = in_stage("config", [&] { return validate_config(path); });
    apply_environment(c);
    return c;
}

void print_keff(const UpscaleResult& r) {
    std::cout << "k_eff_" << direction_name(r.direction) << " = " << format_double(r.k_eff) << " m^2";
    for (const auto& f : r.flags) std::cout << " [" << f << "]";
    std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stress-dependent permeability of 2D discrete fracture networks"};
    app.require_subcommand(1);

    std::string config;
    bool dump_fields = false;
    int jobs = int(std::max(1u, std::thread::hardware_concurrency()));
    double sigma_max = 20;
    int steps = 40;

    auto* single = app.add_subcommand("single", "one load case: k_eff in x and y plus diagnostics");
    single->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    single->add_flag("--dump-fields", dump_fields, "write per-cell pressure and aperture CSVs");

    auto* sweep = app.add_subcommand("sweep", "log10 k_eff tables over the sigma_xx x sigma_yy grid");
    sweep->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* mesh = app.add_subcommand("mesh-only", "mesh the domain and report the node census");
    mesh->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);

    auto* curve = app.add_subcommand("aperture-curve", "single-fracture aperture and permeability vs stress");
    curve->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    curve->add_option("--sigma-max", sigma_max, "largest normal stress [MPa]")->check(CLI::PositiveNumber);
    curve->add_option("--steps", steps, "number of stress intervals")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig c = load_config(config);
        if (single->parsed()) {
            const auto run = run_single(c, dump_fields);
            print_keff(run.result.x);
            print_keff(run.result.y);
        } else if (sweep->parsed()) {
            const auto t = run_sweep(c, jobs);
            std::cout << "sweep " << t.sigma_yy_mpa.size() << "x" << t.sigma_xx_mpa.size() << " written to "
                      << c.output.dir.string() << '\n';
            if (sweep_has_failures(t)) {
                std::cerr << error_report(StageError("sweep", "SweepPointFailure",
                                                     "one or more sweep points failed; see flags in sweep.json"))
                                 .dump()
                          << '\n';
                return 1;
            }
        } else if (mesh->parsed()) {
            const auto rep = run_mesh_only(c);
            std::cout << "census ok: " << rep.locations << " locations, max " << rep.max_copies << " copies\n";
        } else if (curve->parsed()) {
            run_aperture_curve(c, sigma_max, steps);
            std::cout << "aperture curve written to " << (c.output.dir / "aperture_curve.csv").string() << '\n';
        }
    } catch (const StageError& e) {
        std::cerr << error_report(e).dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << error_report(StageError("run", "InternalError", e.what())).dump() << '\n';
        return 1;
    }
    return 0;
}

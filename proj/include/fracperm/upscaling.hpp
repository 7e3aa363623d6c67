#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "aperture.hpp"
#include "contact.hpp"
#include "elasticity.hpp"
#include "flow.hpp"
#include "mesh.hpp"
#include "network.hpp"

namespace fracperm {

struct FlowParams {
    double viscosity = 1e-3;  // Pa s
    double dP = 1e3;          // Pa
};

struct UpscaleResult {
    FlowDirection direction = FlowDirection::X;
    double sigma_xx = 0;
    double sigma_yy = 0;
    double q = 0;  // m^3/s per unit depth
    double A = 0;  // m
    double L = 0;  // m
    double k_eff = 0;
    std::vector<std::string> flags;
};

inline UpscaleResult effective_permeability(const FlowSolution& sol, const Rect& window, FlowDirection dir, double dP,
                                            double viscosity, double k_m) {
    UpscaleResult r;
    r.direction = dir;
    r.q = sol.q;
    r.A = dir == FlowDirection::X ? window.height() : window.width();
    r.L = dir == FlowDirection::X ? window.width() : window.height();
    r.k_eff = std::max(sol.q * viscosity * r.L / (r.A * dP), 0.0) + k_m;
    if (sol.no_spanning_path) r.flags.push_back("NoSpanningPath");
    if (sol.closed_junctions > 0) r.flags.push_back("AllClosed");
    return r;
}

/// Everything a load case needs that does not depend on the load.
struct Setup {
    FractureNetwork network;
    Domain domain;
    ConformingMesh mesh;
    FlowGraph graph;
    ElasticParams elastic = make_elastic(2.5e9, 0.35);
    ApertureParams aperture;
    ContactControl contact;
    FlowParams flow;
};

inline Setup make_setup(FractureNetwork net, const Domain& domain, const MeshOptions& mesh_opt) {
    Setup s;
    s.network = std::move(net);
    s.domain = domain;
    s.mesh = duplicate_fracture_nodes(triangulate(domain, s.network, mesh_opt));
    s.graph = build_flow_graph(s.mesh, s.network, domain.flow_window);
    return s;
}

struct LoadCaseResult {
    UpscaleResult x, y;
    std::vector<double> cell_sigma_n;  // Pa
    std::vector<SegmentHydraulics> cell_hydraulics;
    std::vector<double> segment_sigma_n;
    FlowSolution flow_x, flow_y;
    ContactState contact;
};

inline LoadCaseResult run_load_case(const Setup& s, const BoundaryStress& bc) {
    LoadCaseResult out;
    ContactControl ctrl = s.contact;
    ctrl.gap_scale = s.aperture.b_m;
    out.contact = solve_contact(s.mesh, s.elastic, bc, ctrl);
    out.segment_sigma_n = segment_contact_stress(out.contact, s.mesh, s.network);

    const int n = int(s.graph.cells.size());
    out.cell_sigma_n.resize(n);
    out.cell_hydraulics.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& c = s.graph.cells[i];
        const double sn = std::max(out.contact.face_pressure[c.face], 0.0);
        out.cell_sigma_n[i] = sn;
        out.cell_hydraulics[i] = cell_hydraulics(aperture_from_stress(sn, s.aperture), c.length, s.aperture);
    }
    const auto& w = s.domain.flow_window;
    out.flow_x = solve_flow(s.graph, out.cell_hydraulics, FlowDirection::X, s.flow.dP, s.flow.viscosity);
    out.flow_y = solve_flow(s.graph, out.cell_hydraulics, FlowDirection::Y, s.flow.dP, s.flow.viscosity);
    out.x = effective_permeability(out.flow_x, w, FlowDirection::X, s.flow.dP, s.flow.viscosity, s.aperture.k_m);
    out.y = effective_permeability(out.flow_y, w, FlowDirection::Y, s.flow.dP, s.flow.viscosity, s.aperture.k_m);
    for (auto* r : {&out.x, &out.y}) {
        r->sigma_xx = bc.sigma_xx;
        r->sigma_yy = bc.sigma_yy;
        if (!out.contact.converged) r->flags.push_back("ContactNotConverged");
        if (out.contact.regularized) r->flags.push_back("ContactRegularized");
    }
    return out;
}

/// log10(k_eff) tables. Rows follow sigma_yy, columns follow sigma_xx.
struct SweepTable {
    std::vector<double> sigma_xx_mpa;
    std::vector<double> sigma_yy_mpa;
    Eigen::MatrixXd log10_kx;
    Eigen::MatrixXd log10_ky;
    std::vector<std::vector<std::string>> flags;  // per entry, row-major
};

inline std::vector<double> mpa_grid(double lo, double hi, double step) {
    if (!(step > 0) || hi < lo) throw InvalidArgument("sweep grid needs step > 0 and hi >= lo");
    std::vector<double> g;
    const int n = int(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (int i = 0; i < n; ++i) g.push_back(lo + i * step);
    return g;
}

inline SweepTable stress_sweep(const Setup& s, const std::vector<double>& sxx_mpa, const std::vector<double>& syy_mpa,
                               int jobs = 1) {
    for (const auto* grid : {&sxx_mpa, &syy_mpa}) {
        for (size_t i = 0; i < grid->size(); ++i) {
            if (!((*grid)[i] >= 0)) throw InvalidArgument("sweep stresses must be >= 0");
            if (i > 0 && !((*grid)[i] > (*grid)[i - 1])) throw InvalidArgument("sweep grids must be ascending");
        }
    }
    SweepTable t;
    t.sigma_xx_mpa = sxx_mpa;
    t.sigma_yy_mpa = syy_mpa;
    const int rows = int(syy_mpa.size()), cols = int(sxx_mpa.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    t.log10_kx = Eigen::MatrixXd::Constant(rows, cols, nan);
    t.log10_ky = Eigen::MatrixXd::Constant(rows, cols, nan);
    t.flags.assign(size_t(rows) * cols, {});

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int idx = next++; idx < rows * cols; idx = next++) {
            const int r = idx / cols, c = idx % cols;
            try {
                const auto res = run_load_case(s, {sxx_mpa[c] * 1e6, syy_mpa[r] * 1e6});
                t.log10_kx(r, c) = std::log10(res.x.k_eff);
                t.log10_ky(r, c) = std::log10(res.y.k_eff);
                auto& f = t.flags[idx];
                for (const auto& s1 : res.x.flags) f.push_back("x:" + s1);
                for (const auto& s1 : res.y.flags) f.push_back("y:" + s1);
            } catch (const std::exception& e) {
                t.flags[idx].push_back(std::string("error:") + e.what());
            }
        }
    };
    const int n = std::max(1, std::min(jobs, rows * cols));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return t;
}

}  // namespace fracperm

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace fracperm {

/// Stress-aperture law parameters. b_m and b_c in m, alpha in MPa^-beta,
/// F in 1/m, k_m in m^2.
struct ApertureParams {
    double b_m = 1.5e-5;
    double alpha = 0.45;
    double beta = 0.75;
    double F = 1.0;
    double b_c = 0.0;
    double k_m = 1e-21;
};

/// Returns a list of violated invariants (empty when valid).
inline std::vector<std::string> aperture_violations(const ApertureParams& p) {
    std::vector<std::string> out;
    if (!(p.b_m > 0)) out.push_back("b_m must be > 0");
    if (!(p.alpha >= 0)) out.push_back("alpha must be >= 0");
    if (!(p.beta > 0)) out.push_back("beta must be > 0");
    if (!(p.F >= 0)) out.push_back("F must be >= 0");
    if (!(p.b_c >= 0 && p.b_c < p.b_m)) out.push_back("b_c must satisfy 0 <= b_c < b_m");
    if (!(p.k_m >= 0)) out.push_back("k_m must be >= 0");
    return out;
}

/// b = b_m exp(-alpha sigma^beta), sigma taken in MPa.
inline double aperture_from_stress(double sigma_n_pa, const ApertureParams& p) {
    if (!(sigma_n_pa >= 0)) throw NegativeStress("normal stress must be >= 0, got " + std::to_string(sigma_n_pa));
    return p.b_m * std::exp(-p.alpha * std::pow(sigma_n_pa * 1e-6, p.beta));
}

inline double core_permeability(double b, const ApertureParams& p) {
    if (!(b >= 0)) throw InvalidArgument("aperture must be >= 0");
    const double open = std::max(b - p.b_c, 0.0);
    return p.k_m + p.F / 12.0 * open * open * open;
}

struct CurvePoint {
    double sigma;  // Pa
    double b;      // m
    double k;      // m^2
};

inline std::vector<CurvePoint> stress_permeability_curve(const std::vector<double>& sigma_pa, const ApertureParams& p) {
    std::vector<CurvePoint> out;
    out.reserve(sigma_pa.size());
    for (double s : sigma_pa) {
        const double b = aperture_from_stress(s, p);
        out.push_back({s, b, core_permeability(b, p)});
    }
    return out;
}

}  // namespace fracperm

#pragma once

// Heating and cooling rates of the phonon-number rate equation
//
//     d<n>/dt = -(A- - A+) <n> + A+,    W = A- - A+,    <n>ss = A+ / W.
//
// Closed forms are written with an explicit linewidth argument. With the
// per-channel dissipator convention the excited-state coherence decays at 2
// Gamma, so the params-level helpers evaluate the formulas at 2 Gamma, which
// is what the second-order projection of the Liouvillian reproduces.

#include <string>
#include <vector>

#include "darkcool/model.hpp"

namespace darkcool {

enum class RateMethod { closed_form, numeric_projection, spectral, evolve_fit };

std::string_view to_string(RateMethod method);

struct RateCoefficients {
    double a_plus = 0.0;
    double a_minus = 0.0;
    double w = 0.0;
    double n_ss = 0.0;
    RateMethod method = RateMethod::closed_form;
};

/// Linewidth entering the closed forms for the per-channel coefficient gamma.
inline double formula_linewidth(const SystemParams& params) { return 2.0 * params.gamma; }

// Formula-level rates, linewidth given explicitly.
double aplus_formula(const SystemParams& params, double linewidth);
double aminus_formula(const SystemParams& params, double linewidth);
double cooling_rate_formula(const SystemParams& params, double linewidth);

/// Blue-sideband numerator [2 eta_A (nu + Omega_B) - eta_B Omega_B]^2.
double aplus_numerator(const SystemParams& params);

double aplus_closed_form(const SystemParams& params);
double aminus_closed_form(const SystemParams& params);

/// W under the cancellation condition. When warning is non-null and the
/// condition is violated by more than 1e-6 relative, a message is stored.
double cooling_rate_closed_form(const SystemParams& params, std::string* warning = nullptr);

RateCoefficients closed_form_rates(const SystemParams& params);

/// Second-order adiabatic elimination of the internal dynamics, evaluated
/// numerically: P L2 P - P L1 L0^{-1} L1 P on the |-><-| (x) |n><n| sector.
/// Truncation is internal (projection_n_max) and independent of params.n_max.
inline constexpr int kProjectionNMax = 6;
RateCoefficients project_rate_equation(const SystemParams& params, Scheme scheme);

struct TwoPeakPlacement {
    double delta_e = 0.0;
    double delta_plus = 0.0;
    double omega_a = 0.0;
    double omega_b = 0.0; // = delta_plus
    double delta = 0.0;   // Raman detuning giving delta_e
    bool degenerate = false;
};

/// Solves delta_e + delta_plus = 3 nu and (delta_e - delta_plus)^2 + 2 Omega_A^2 = nu^2
/// for splitting = delta_e - delta_plus in [-nu, nu]. The dressed energies are nu and 2 nu.
TwoPeakPlacement two_peak_placement(double nu, double splitting);

/// Population decay rates of the two dressed states (per-channel dissipator).
Eigen::Vector2d dressed_linewidths(const SystemParams& params);

/// Slowest internal relaxation rate among the dressed states.
double slowest_internal_rate(const SystemParams& params);

struct OptimizerOptions {
    double coupling_guard = 0.2;       // Omega_i eta_i < guard * nu
    double rate_guard = 0.2;           // W <= guard * slowest internal rate
    double omega_a_max = 10.0;
    double omega_b_max = 10.0;
    double delta_min = -10.0;
    double delta_max = 10.0;
    int grid_points = 25;
    int max_iterations = 4000;
};

struct OptimizerResult {
    SystemParams params;
    double w = 0.0;
    int evaluations = 0;
};

/// Maximizes the closed-form W over (Omega_A, Omega_B, Delta) with eta_A fixed
/// by the cancellation condition. Coordinate grid search, then Nelder-Mead.
OptimizerResult optimize_cooling_rate(const SystemParams& base, const OptimizerOptions& options = {});

/// Slowest motional relaxation rate of the full Liouvillian: the smallest
/// nonzero decay rate among eigenvalues with |Im| < 0.25 nu.
RateCoefficients numeric_rate_spectral(const SystemParams& params, Scheme scheme);

/// Exponential fit of <n>(t) from |-><-| (x) |1><1| to n_ss + (1 - n_ss) e^{-W t}.
RateCoefficients numeric_rate_evolve(const SystemParams& params, Scheme scheme, double t_max = 0.0);

enum class FluctuatingRabi { omega_a, omega_b };

struct RobustnessFit {
    double exponent = 0.0;
    double r_squared = 0.0;
    double baseline_n = 0.0;
    std::vector<double> deviations; // absolute Delta Omega
    std::vector<double> excess;     // symmetric excess of <n>ss
};

/// Log-log slope of the symmetric excess ((n(+d) + n(-d))/2 - n0) against the
/// absolute deviation d = rel * Omega over the relative grid. PoorFit if R^2 < 0.95.
RobustnessFit robustness_exponent(const SystemParams& params, Scheme scheme, FluctuatingRabi which,
                                  const std::vector<double>& relative_grid);

/// Log-spaced relative deviations on [1e-3, 5e-2].
std::vector<double> default_fluctuation_grid(int points = 8);

struct RobustnessExponents {
    RobustnessFit omega_a;
    RobustnessFit omega_b;
};

RobustnessExponents robustness_exponents(const SystemParams& params, const std::vector<double>& relative_grid);

} // namespace darkcool

#pragma once

// Far-detuned Raman coupling of the ground states through the excited level,
// and its adiabatic elimination with the harmonic-average effective
// Hamiltonian
//
//     H_eff = sum_{m,n} (1 / w_mn) [h_m^dag, h_n] e^{i (w_m - w_n) t},
//     1 / w_mn = (1 / w_m + 1 / w_n) / 2.
//
// This module uses its own electronic ordering (up, down, e), electronic
// index major, Fock minor. The effective model lives on (up, down) (x) Fock.

#include "darkcool/model.hpp"

namespace darkcool {

struct RamanParams {
    double omega_p = 2.0;
    double eta_p = 0.05;
    double delta_prime = 50.0;
    double nu = 1.0;

    void validate() const;
};

struct EffectiveCoupling {
    double omega_b = 0.0;
    double eta_b = 0.0;
};

/// Omega_B = Omega_p^2 / (2 Delta'), eta_B = eta_p (2 Delta'^2 - nu^2) / (Delta'^2 - nu^2).
/// PoleAtTrapFrequency when |Delta'| = nu.
EffectiveCoupling effective_params(const RamanParams& r);

/// Coefficients of the first-order effective Hamiltonian on the ground states:
///   stark (1 + sigma_x) + q_sigma_y (b + b^dag) sigma_y + p_sigma_z p sigma_z,
/// with p = i (b - b^dag) and Pauli matrices on (up, down), sigma_y = -i|up><down| + h.c.
struct EffectiveCoefficients {
    double stark = 0.0;     // -Omega_p^2 / (4 Delta')
    double q_sigma_y = 0.0; // -(Omega_p^2 eta_p / 4) (2 Delta'^2 - nu^2) / (Delta' (Delta'^2 - nu^2))
    double p_sigma_z = 0.0; // -(Omega_p^2 eta_p / 4) nu / (Delta'^2 - nu^2)
};

EffectiveCoefficients effective_coefficients(const RamanParams& r);

enum class EliminationOrder {
    first, // drop the pairs of two motional sidebands (O(eta^2) terms)
    full,  // all nine (m, n) pairs
};

/// Ground-state effective Hamiltonian in the motional lab frame, including nu b^dag b.
/// Evaluated by the operator formula on the truncated Fock space.
OperatorMatrix effective_hamiltonian(const RamanParams& r, int n_max, EliminationOrder order = EliminationOrder::first);

/// Three-level Hamiltonian nu b^dag b + Delta' |e><e| + (Omega_p / 2)[|e><up|(1 + i eta_p (b + b^dag))
/// + |e><down|(1 - i eta_p (b + b^dag))] + h.c.
OperatorMatrix raman_full_hamiltonian(const RamanParams& r, int n_max);

struct EliminationCheck {
    double max_deviation = 0.0; // max |P_up^full(t) - P_up^eff(t)|
    double t_max = 0.0;
    int samples = 0;
};

/// Propagates |down, 0> under both models (exact exponentials) and compares
/// the up-state population on a uniform grid over [0, t_max]. t_max <= 0 selects 20 / |Omega_B|;
/// samples <= 0 picks about eight samples per period of the fast oscillation.
EliminationCheck validate_elimination(const RamanParams& r, double t_max = 0.0, int n_max = 6,
                                      EliminationOrder order = EliminationOrder::full, int samples = 0);

} // namespace darkcool

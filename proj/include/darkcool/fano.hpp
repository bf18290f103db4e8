#pragma once

// Two discrete states |+> and |e> coupled to a discretized continuum {|k>}:
//
//     H = Omega_B |+><+| + delta_e |e><e| + (Omega_A / sqrt 2)(|+><e| + h.c.)
//         + sum_k k |k><k| + sum_k g_k (|e><k| + h.c.)
//
// Basis order: |+>, |e>, then the continuum modes in grid order.

#include <vector>

#include <Eigen/Dense>

#include "darkcool/model.hpp"

namespace darkcool {

struct ContinuumModel {
    std::vector<double> k_grid;   // strictly increasing mode energies
    std::vector<double> coupling; // g_k, already including sqrt(dk)
    double omega_a = 0.0;
    double omega_b = 0.0;
    double delta_e = 0.0;

    void validate() const;
};

/// Uniform grid of m modes on [k_min, k_max] with flat coupling strength * sqrt(dk).
ContinuumModel flat_continuum(double omega_a, double omega_b, int m, double strength = 1.0,
                              double k_min = -5.0, double k_max = 5.0);

/// Same grid with a Lorentzian-tapered profile strength * sqrt(dk) / sqrt(1 + (k / width)^2).
ContinuumModel tapered_continuum(double omega_a, double omega_b, int m, double width, double strength = 1.0,
                                 double k_min = -5.0, double k_max = 5.0);

double grid_spacing(const ContinuumModel& model);

struct ContinuumSpectrum {
    Eigen::VectorXd energies;     // ascending
    Eigen::VectorXd overlap_e;    // <e|k>
    Eigen::VectorXd overlap_plus; // <+|k>
    Eigen::MatrixXd eigenvectors; // columns
};

ContinuumSpectrum diagonalize_continuum(const ContinuumModel& model);

/// Interpolated energy where <e|k><+|k> changes sign (sign-convention free).
/// Throws NoCrossing when the product has constant sign.
double fano_zero(const ContinuumSpectrum& spectrum);
double fano_zero(const ContinuumModel& model);

struct SidebandAmplitudes {
    double red = 0.0;  // eta_A (nu - Omega_B) + eta_B Omega_B / 2
    double blue = 0.0; // -eta_A (Omega_B + nu) + eta_B Omega_B / 2
};

/// Red and blue sideband amplitudes up to the common factor <+-nu|+>.
SidebandAmplitudes sideband_amplitudes(const SystemParams& params);

} // namespace darkcool

#pragma once

// Beam geometry for the cancellation condition. Angles are in radians.
//
// The A beams are tilted by theta_tilt from the trap axis, so eta_A = eta'_A cos(theta_tilt),
// while the B Raman pair along the axis gives eta_B = 2 eta_p. The wavelength
// ratio r = eta_p / eta'_A is 1 for equal wavelengths and scales every ratio below.

namespace darkcool {

inline double deg(double radians) { return radians * 57.29577951308232; }
inline double rad(double degrees) { return degrees / 57.29577951308232; }

/// theta_tilt with cos(theta) = r Omega_B / (nu + Omega_B). InvalidArgument when no real angle exists.
double tilt_angle(double omega_b, double nu, double wavelength_ratio = 1.0);

/// eta_B / eta_A = 2 r / cos(theta), theta in [0, pi/2).
double ratio_at_angle(double theta_tilt, double wavelength_ratio = 1.0);

/// Ratio projected on an axis rotated by theta_prime: 2 r cos(theta') / cos(theta + theta').
double multiaxial_ratio(double theta_tilt, double theta_prime, double wavelength_ratio = 1.0);

struct OptimalAxis {
    double theta_prime = 0.0;
    bool beyond_b_axis = false; // theta_prime < 0
};

/// Axis angle theta' on which the projected couplings satisfy the cancellation condition.
OptimalAxis optimal_axis(double theta_tilt, double omega_b, double nu, double wavelength_ratio = 1.0);

} // namespace darkcool

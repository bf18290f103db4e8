#include "darkcool/geometry.hpp"

#include <cmath>

#include "darkcool/error.hpp"
#include "darkcool/model.hpp"

namespace darkcool {

namespace {

void require_ratio(double r)
{
    if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorCode::InvalidArgument, "wavelength ratio must be positive");
}

} // namespace

double tilt_angle(double omega_b, double nu, double r)
{
    require_ratio(r);
    if (!(omega_b > 0.0) || !(nu > 0.0)) throw Error(ErrorCode::InvalidArgument, "tilt angle requires omega_b > 0 and nu > 0");
    const double c = r * omega_b / (nu + omega_b);
    if (c > 1.0) throw Error(ErrorCode::InvalidArgument, "no tilt angle reaches the required ratio");
    return std::acos(c);
}

double ratio_at_angle(double theta, double r)
{
    require_ratio(r);
    if (!(theta >= 0.0) || !(theta < M_PI / 2.0))
        throw Error(ErrorCode::InvalidArgument, "theta must lie in [0, pi/2); the ratio diverges at pi/2");
    return 2.0 * r / std::cos(theta);
}

double multiaxial_ratio(double theta, double theta_prime, double r)
{
    require_ratio(r);
    const double c = std::cos(theta + theta_prime);
    if (std::abs(c) < 1e-12) throw Error(ErrorCode::InvalidArgument, "projected A coupling vanishes (theta + theta' = pi/2)");
    return 2.0 * r * std::cos(theta_prime) / c;
}

OptimalAxis optimal_axis(double theta, double omega_b, double nu, double r)
{
    require_ratio(r);
    if (!(theta > 0.0) || !(theta < M_PI / 2.0)) throw Error(ErrorCode::InvalidArgument, "theta must lie in (0, pi/2)");
    const double target = condition_ratio(nu, omega_b);
    OptimalAxis out;
    out.theta_prime = std::atan((target * std::cos(theta) - 2.0 * r) / (target * std::sin(theta)));
    out.beyond_b_axis = out.theta_prime < 0.0;
    return out;
}

} // namespace darkcool

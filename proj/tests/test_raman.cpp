#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "darkcool/error.hpp"
#include "darkcool/raman.hpp"

using namespace darkcool;

TEST_CASE("effective coupling")
{
    RamanParams r;
    r.omega_p = 2.0;
    r.delta_prime = 100.0;
    CHECK(effective_params(r).omega_b == doctest::Approx(0.02));

    r.delta_prime = 10.0;
    r.eta_p = 0.05;
    CHECK(effective_params(r).eta_b / r.eta_p == doctest::Approx(199.0 / 99.0));

    double previous = INFINITY;
    for (double d : {2.0, 5.0, 20.0, 100.0, 1000.0}) {
        r.delta_prime = d;
        const double ratio = effective_params(r).eta_b / r.eta_p;
        CHECK(ratio < previous);
        CHECK((ratio - 2.0) * d * d == doctest::Approx(1.0 / (1.0 - 1.0 / (d * d))));
        previous = ratio;
    }

    r.delta_prime = 1.0;
    try {
        effective_params(r);
        FAIL("expected PoleAtTrapFrequency");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PoleAtTrapFrequency);
    }
}

TEST_CASE("carrier-only limit is a Stark-shifted sigma_x coupling")
{
    RamanParams r;
    r.eta_p = 0.0;
    r.omega_p = 1.5;
    r.delta_prime = 30.0;
    const int n_max = 3, nf = n_max + 1;
    const OperatorMatrix h = effective_hamiltonian(r, n_max, EliminationOrder::full);
    const double shift = -r.omega_p * r.omega_p / (4.0 * r.delta_prime);
    OperatorMatrix expect = OperatorMatrix::Zero(2 * nf, 2 * nf);
    for (int n = 0; n < nf; ++n) {
        expect(n, n) = shift + r.nu * n;
        expect(nf + n, nf + n) = shift + r.nu * n;
        expect(n, nf + n) = expect(nf + n, n) = shift;
    }
    CHECK((h - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("first-order effective coefficients")
{
    RamanParams r;
    r.omega_p = 2.0;
    r.eta_p = 0.05;
    r.delta_prime = 7.0;
    const EffectiveCoefficients c = effective_coefficients(r);
    const double d = r.delta_prime;
    CHECK(std::abs(c.q_sigma_y) ==
          doctest::Approx(r.omega_p * r.omega_p * r.eta_p / 4.0 * (2 * d * d - 1.0) / (d * (d * d - 1.0))));
    CHECK(c.stark == doctest::Approx(-r.omega_p * r.omega_p / (4.0 * d)));

    // p sigma_z vanishes as Delta' grows at fixed Omega_p^2 / Delta'.
    double previous = INFINITY;
    for (double scale : {1.0, 4.0, 16.0}) {
        RamanParams s = r;
        s.delta_prime = r.delta_prime * scale;
        s.omega_p = r.omega_p * std::sqrt(scale);
        const double pz = std::abs(effective_coefficients(s).p_sigma_z);
        CHECK(pz < previous);
        previous = pz;
    }
    CHECK(previous < 0.1 * std::abs(c.p_sigma_z));
}

TEST_CASE("effective Hamiltonian matches the coefficients and is Hermitian")
{
    RamanParams r;
    r.omega_p = 2.0;
    r.eta_p = 0.05;
    r.delta_prime = 12.0;
    const int n_max = 4;
    for (EliminationOrder order : {EliminationOrder::first, EliminationOrder::full}) {
        const OperatorMatrix h = effective_hamiltonian(r, n_max, order);
        CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    }
    const OperatorMatrix full = raman_full_hamiltonian(r, n_max);
    CHECK((full - full.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("elimination error")
{
    RamanParams r;
    r.omega_p = 0.0;
    CHECK(validate_elimination(r, 50.0).max_deviation < 1e-12);

    r.omega_p = 2.0;
    r.eta_p = 0.05;
    r.delta_prime = 50.0;
    const double at50 = validate_elimination(r).max_deviation;
    r.delta_prime = 25.0;
    const double at25 = validate_elimination(r).max_deviation;
    r.delta_prime = 5.0;
    const double at5 = validate_elimination(r).max_deviation;
    CHECK(at50 < 1e-2);
    CHECK(at25 / at50 == doctest::Approx(4.0).epsilon(0.25));
    CHECK(at5 > at25);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "darkcool/error.hpp"
#include "darkcool/liouville.hpp"
#include "darkcool/rates.hpp"

using namespace darkcool;

namespace {

OperatorMatrix random_density(int dim, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    OperatorMatrix a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = cplx(g(rng), g(rng));
    OperatorMatrix rho = a * a.adjoint();
    return rho / rho.trace().real();
}

OperatorMatrix act(const SparseOp& L, const OperatorMatrix& rho)
{
    return unvectorize(L * vectorize(rho), rho.rows());
}

SystemParams recoil_params()
{
    SystemParams p;
    p.eta_up = 0.07;
    p.eta_down = 0.05;
    p.phi = 0.4;
    p.n_max = 4;
    return p;
}

SystemParams condition_params(double eta_a)
{
    SystemParams p;
    p.omega_b = 1.0;
    p.omega_a = 2.3;
    p.eta_a = eta_a;
    p.eta_b = eta_a * condition_ratio(p.nu, p.omega_b);
    p.n_max = 10;
    return p;
}

} // namespace

TEST_CASE("every order preserves the trace and Hermiticity")
{
    std::mt19937_64 rng(11);
    const SystemParams p = recoil_params();
    const SuperOp L = build_liouvillian(p, Scheme::robust);
    for (int k = 0; k < 100; ++k) {
        const OperatorMatrix rho = random_density(static_cast<int>(L.dim()), rng);
        for (const SparseOp* part : {&L.order0, &L.order1, &L.order2, &L.total}) {
            const OperatorMatrix out = act(*part, rho);
            CHECK(std::abs(out.trace()) < 1e-10);
            CHECK((out - out.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
        }
        const OperatorMatrix d2 = act(build_dissipator(p, 2), rho);
        CHECK(std::abs(d2.trace()) < 1e-10);
    }
}

TEST_CASE("recoil dissipator vanishes without recoil Lamb-Dicke parameters")
{
    SystemParams p;
    p.n_max = 3;
    CHECK(build_dissipator(p, 2).norm() == 0.0);
    CHECK_THROWS_AS(build_dissipator(p, 1), Error);
}

TEST_CASE("excited population decays at 4 Gamma")
{
    SystemParams p;
    p.n_max = 3;
    p.gamma = 2.5;
    const HilbertSpace space(p.n_max);
    const OperatorMatrix rho = product_state(space, Level::excited, 0);
    const OperatorMatrix drho = act(build_dissipator(p, 0), rho);
    const Eigen::Vector3d dpop = electronic_populations(drho, space);
    CHECK(dpop(2) == doctest::Approx(-4.0 * p.gamma));
    CHECK(dpop(0) + dpop(1) == doctest::Approx(4.0 * p.gamma));
}

TEST_CASE("closed system has a purely imaginary spectrum")
{
    SystemParams p;
    p.gamma = 0.0;
    p.n_max = 2;
    const SuperOp L = build_liouvillian(p, Scheme::robust);
    const Eigen::MatrixXcd dense = Eigen::MatrixXcd(L.total);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(dense);
    CHECK(es.eigenvalues().real().cwiseAbs().maxCoeff() < 1e-9);
    const OperatorMatrix h = build_hamiltonian(p, Scheme::robust).total();
    CHECK((L.total - commutator(h)).norm() < 1e-12);
}

TEST_CASE("zeroth order does not mix electronic and motional sectors")
{
    std::mt19937_64 rng(5);
    SystemParams p;
    p.n_max = 3;
    const SuperOp L = build_liouvillian(p, Scheme::robust);
    const Eigen::Matrix3cd rho_e = random_density(3, rng);
    const int nf = p.n_max + 1;
    for (int n = 0; n < nf; ++n) {
        OperatorMatrix fock = OperatorMatrix::Zero(nf, nf);
        fock(n, n) = 1.0;
        const OperatorMatrix out = act(L.order0, tensor(rho_e, fock));
        // Electronic part alone, evaluated with the n = 0 block of L0.
        OperatorMatrix fock0 = OperatorMatrix::Zero(nf, nf);
        fock0(0, 0) = 1.0;
        const OperatorMatrix out0 = act(L.order0, tensor(rho_e, fock0));
        Eigen::Matrix3cd e0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) e0(a, b) = out0(a * nf, b * nf);
        CHECK((out - tensor(e0, fock)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("zeroth-order null space is the dark-state population sector")
{
    SystemParams p;
    p.n_max = 4;
    const SuperOp L = build_liouvillian(p, Scheme::robust);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(L.order0));
    int zeros = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i)) < 1e-8) ++zeros;
    CHECK(zeros == p.n_max + 1);
    for (int n = 0; n <= p.n_max; ++n)
        CHECK(act(L.order0, product_state(L.space, Level::minus, n)).norm() < 1e-12);
}

TEST_CASE("uncoupled motion has no unique steady state")
{
    SystemParams p;
    p.eta_a = 0.0;
    p.eta_b = 0.0;
    p.n_max = 5;
    try {
        steady_state(build_liouvillian(p, Scheme::robust));
        FAIL("expected DegenerateNullSpace");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateNullSpace);
    }
}

TEST_CASE("steady state under the cancellation condition")
{
    const SystemParams p = condition_params(0.05);
    const SuperOp L = build_liouvillian(p, Scheme::robust);
    const SteadyStateResult ss = steady_state(L);
    CHECK(std::abs(ss.rho.trace() - 1.0) < 1e-10);
    CHECK((ss.rho - ss.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(ss.rho);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    CHECK(ss.relative_residual < 1e-8);
    CHECK(ss.fidelity_target >= 1.0 - 5.0 * 0.05 * 0.05);

    const SteadyStateResult eit = steady_state(build_liouvillian(p, Scheme::eit));
    CHECK(ss.mean_n * 10.0 <= eit.mean_n);
}

TEST_CASE("truncation check re-solves at a larger cutoff")
{
    const SystemParams p = condition_params(0.05);
    const SteadyStateResult ss = solve_steady_state(p, Scheme::robust);
    CHECK(ss.convergence_checked);
    CHECK(ss.converged);
    CHECK(std::abs(ss.mean_n - ss.mean_n_check) <= 0.01 * ss.mean_n + 1e-9);
}

TEST_CASE("mean phonon number")
{
    const HilbertSpace space(3);
    CHECK(mean_phonon(product_state(space, Level::minus, 0), space) == doctest::Approx(0.0));
    CHECK(mean_phonon(product_state(space, Level::plus, 1), space) == doctest::Approx(1.0));
    const OperatorMatrix mix =
        0.5 * (product_state(space, Level::minus, 0) + product_state(space, Level::excited, 1));
    CHECK(mean_phonon(mix, space) == doctest::Approx(0.5));
}

TEST_CASE("evolution from the steady state is stationary")
{
    SystemParams p = condition_params(0.05);
    p.n_max = 6;
    const SuperOp L = build_liouvillian(p, Scheme::robust);
    const SteadyStateResult ss = steady_state(L);
    const EvolutionRecord rec = evolve(L.total, L.space, ss.rho, {0.0, 1.0, 5.0, 20.0});
    for (size_t i = 0; i < rec.times.size(); ++i) {
        CHECK(std::abs(rec.mean_n[i] - ss.mean_n) < 1e-6);
        CHECK(std::abs(rec.trace[i] - 1.0) < 1e-8);
    }
}

TEST_CASE("zeroth-order evolution keeps states positive")
{
    std::mt19937_64 rng(2);
    SystemParams p;
    p.n_max = 3;
    const SuperOp L = build_liouvillian(p, Scheme::robust);
    EvolveOptions opts;
    opts.keep_states = true;
    for (int k = 0; k < 3; ++k) {
        const EvolutionRecord rec =
            evolve(L.order0, L.space, random_density(static_cast<int>(L.dim()), rng), {0.0, 0.1, 0.5, 2.0}, opts);
        for (const OperatorMatrix& rho : rec.states) {
            Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(rho);
            CHECK(es.eigenvalues().minCoeff() >= -1e-8);
        }
        for (double tr : rec.trace) CHECK(std::abs(tr - 1.0) < 1e-8);
    }
}

TEST_CASE("exponential relaxation matches the projected rate in the perturbative regime")
{
    SystemParams p;
    p.gamma = 1.0;
    p.omega_b = 1.3;
    p.omega_a = 0.5;
    p.eta_b = 0.05;
    p.eta_a = eta_a_for_condition(p.nu, p.omega_b, p.eta_b);
    p.n_max = 6;
    const RateCoefficients fit = numeric_rate_evolve(p, Scheme::robust);
    const RateCoefficients proj = project_rate_equation(p, Scheme::robust);
    CHECK(fit.w == doctest::Approx(proj.w).epsilon(0.1));
}

TEST_CASE("evolve rejects bad grids")
{
    SystemParams p;
    p.n_max = 2;
    const SuperOp L = build_liouvillian(p, Scheme::robust);
    const OperatorMatrix rho = product_state(L.space, Level::minus, 0);
    CHECK_THROWS_AS(evolve(L.total, L.space, rho, {0.0, 1.0, 1.0}), Error);
    CHECK_THROWS_AS(evolve(L.total, L.space, rho, {}), Error);
}

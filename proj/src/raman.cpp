#include "darkcool/raman.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "darkcool/error.hpp"

namespace darkcool {

namespace {

const cplx I(0.0, 1.0);

Eigen::Vector3cd bare(int i)
{
    Eigen::Vector3cd v = Eigen::Vector3cd::Zero();
    v(i) = 1.0;
    return v;
}

constexpr int kUp = 0, kDown = 1, kExcited = 2;

// Up-state population of psi(t) = V exp(-i E t) V^dag psi0.
struct Propagator {
    Eigen::VectorXd energies;
    Eigen::MatrixXcd vectors;
    Eigen::VectorXcd coeffs;

    Propagator(const OperatorMatrix& h, const StateVector& psi0)
    {
        Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(h);
        if (es.info() != Eigen::Success) throw Error(ErrorCode::SolverFailure, "Hamiltonian diagonalization failed");
        energies = es.eigenvalues();
        vectors = es.eigenvectors();
        coeffs = vectors.adjoint() * psi0;
    }

    double up_population(double t, int n_fock) const
    {
        Eigen::VectorXcd c = coeffs;
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::exp(-I * energies(i) * t);
        const Eigen::VectorXcd psi = vectors * c;
        return psi.segment(kUp * n_fock, n_fock).squaredNorm();
    }
};

} // namespace

void RamanParams::validate() const
{
    if (!std::isfinite(omega_p) || !std::isfinite(eta_p) || !std::isfinite(delta_prime) || !(nu > 0.0))
        throw Error(ErrorCode::InvalidArgument, "Raman parameters must be finite with nu > 0");
    if (eta_p < 0.0) throw Error(ErrorCode::InvalidArgument, "eta_p must be non-negative");
    if (std::abs(std::abs(delta_prime) - nu) <= 1e-12 * nu)
        throw Error(ErrorCode::PoleAtTrapFrequency, "|delta_prime| equals the trap frequency");
    if (delta_prime == 0.0) throw Error(ErrorCode::InvalidArgument, "delta_prime must be nonzero");
}

EffectiveCoupling effective_params(const RamanParams& r)
{
    r.validate();
    const double d2 = r.delta_prime * r.delta_prime;
    const double n2 = r.nu * r.nu;
    EffectiveCoupling c;
    c.omega_b = r.omega_p * r.omega_p / (2.0 * r.delta_prime);
    c.eta_b = r.eta_p * (2.0 * d2 - n2) / (d2 - n2);
    return c;
}

EffectiveCoefficients effective_coefficients(const RamanParams& r)
{
    r.validate();
    const double d = r.delta_prime;
    const double d2 = d * d;
    const double n2 = r.nu * r.nu;
    const double op2 = r.omega_p * r.omega_p;
    EffectiveCoefficients c;
    c.stark = -op2 / (4.0 * d);
    c.q_sigma_y = -op2 * r.eta_p / 4.0 * (2.0 * d2 - n2) / (d * (d2 - n2));
    c.p_sigma_z = -op2 * r.eta_p / 4.0 * r.nu / (d2 - n2);
    return c;
}

OperatorMatrix effective_hamiltonian(const RamanParams& r, int n_max, EliminationOrder order)
{
    r.validate();
    if (n_max < 1) throw Error(ErrorCode::InvalidArgument, "n_max must be at least 1");
    // Work two levels higher so the cropped block is free of truncation artifacts.
    const int nf = n_max + 3;
    const OperatorMatrix id = OperatorMatrix::Identity(nf, nf);
    const OperatorMatrix b = annihilation(nf);
    const OperatorMatrix bd = b.adjoint();

    const Eigen::Matrix3cd s_dag = bare(kUp) * bare(kExcited).adjoint() + bare(kDown) * bare(kExcited).adjoint();
    const Eigen::Matrix3cd p_dag = bare(kUp) * bare(kExcited).adjoint() - bare(kDown) * bare(kExcited).adjoint();
    const double d = r.omega_p * r.eta_p / 2.0;

    // Negative-frequency components h_n e^{-i w_n t} of the interaction-picture coupling.
    const std::array<OperatorMatrix, 3> h = {
        tensor(s_dag, (r.omega_p / 2.0) * id),
        tensor(p_dag, -I * d * bd),
        tensor(p_dag, -I * d * b),
    };
    const std::array<double, 3> w = {r.delta_prime, r.delta_prime - r.nu, r.delta_prime + r.nu};
    const std::array<bool, 3> motional = {false, true, true};

    OperatorMatrix heff = OperatorMatrix::Zero(3 * nf, 3 * nf);
    for (int m = 0; m < 3; ++m)
        for (int n = 0; n < 3; ++n) {
            if (order == EliminationOrder::first && motional[m] && motional[n]) continue;
            const double inv = 0.5 * (1.0 / w[m] + 1.0 / w[n]);
            const OperatorMatrix hm_dag = h[m].adjoint();
            heff += inv * (hm_dag * h[n] - h[n] * hm_dag);
        }

    const int nk = n_max + 1;
    OperatorMatrix out(2 * nk, 2 * nk);
    for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) out.block(a * nk, c * nk, nk, nk) = heff.block(a * nf, c * nf, nk, nk);
    const OperatorMatrix number = number_operator(nk);
    out.block(0, 0, nk, nk) += r.nu * number;
    out.block(nk, nk, nk, nk) += r.nu * number;
    return 0.5 * (out + out.adjoint());
}

OperatorMatrix raman_full_hamiltonian(const RamanParams& r, int n_max)
{
    r.validate();
    const int nf = n_max + 1;
    const OperatorMatrix id = OperatorMatrix::Identity(nf, nf);
    const OperatorMatrix b = annihilation(nf);
    const OperatorMatrix x = b + b.adjoint();
    const Eigen::Matrix3cd e_up = bare(kExcited) * bare(kUp).adjoint();
    const Eigen::Matrix3cd e_down = bare(kExcited) * bare(kDown).adjoint();
    const Eigen::Matrix3cd e_e = bare(kExcited) * bare(kExcited).adjoint();

    OperatorMatrix v = (r.omega_p / 2.0) *
                       (tensor(e_up, id + I * r.eta_p * x) + tensor(e_down, id - I * r.eta_p * x));
    OperatorMatrix h = r.nu * tensor(Eigen::Matrix3cd::Identity(), number_operator(nf)) +
                       r.delta_prime * tensor(e_e, id) + v + v.adjoint();
    return h;
}

EliminationCheck validate_elimination(const RamanParams& r, double t_max, int n_max, EliminationOrder order,
                                      int samples)
{
    r.validate();
    const EffectiveCoupling eff = effective_params(r);
    EliminationCheck check;
    if (r.omega_p == 0.0) {
        check.t_max = t_max > 0.0 ? t_max : 0.0;
        check.samples = 1;
        return check;
    }
    check.t_max = t_max > 0.0 ? t_max : 20.0 / std::abs(eff.omega_b);
    const int nf = n_max + 1;

    StateVector full0 = StateVector::Zero(3 * nf);
    full0(kDown * nf) = 1.0;
    StateVector eff0 = StateVector::Zero(2 * nf);
    eff0(kDown * nf) = 1.0;
    const Propagator full(raman_full_hamiltonian(r, n_max), full0);
    const Propagator reduced(effective_hamiltonian(r, n_max, order), eff0);

    // Resolve the fast oscillation at delta_prime with several samples per period.
    const double periods = std::abs(r.delta_prime) * check.t_max / (2.0 * M_PI);
    const int n_samples = samples > 0 ? samples : static_cast<int>(std::min(2e5, std::max(4000.0, 8.0 * periods)));
    check.samples = n_samples;
    for (int i = 0; i <= n_samples; ++i) {
        const double t = check.t_max * i / n_samples;
        const double dev = std::abs(full.up_population(t, nf) - reduced.up_population(t, nf));
        check.max_deviation = std::max(check.max_deviation, dev);
    }
    return check;
}

} // namespace darkcool

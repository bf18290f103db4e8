#include "darkcool/model.hpp"

#include <cmath>
#include <sstream>

#include "darkcool/error.hpp"

namespace darkcool {

namespace {

void require(bool ok, const std::string& message)
{
    if (!ok) throw Error(ErrorCode::InvalidArgument, message);
}

bool finite(double x) { return std::isfinite(x); }

} // namespace

Scheme parse_scheme(std::string_view name)
{
    if (name == "robust") return Scheme::robust;
    if (name == "eit") return Scheme::eit;
    if (name == "ssh") return Scheme::ssh;
    throw Error(ErrorCode::InvalidArgument, "unknown scheme '" + std::string(name) + "'");
}

std::string_view to_string(Scheme scheme)
{
    switch (scheme) {
    case Scheme::robust: return "robust";
    case Scheme::eit: return "eit";
    case Scheme::ssh: return "ssh";
    }
    return "robust";
}

void SystemParams::validate() const
{
    require(finite(nu) && nu > 0.0, "nu must be positive");
    require(finite(gamma) && gamma >= 0.0, "gamma must be non-negative");
    require(finite(omega_a) && omega_a >= 0.0, "omega_a must be non-negative");
    require(finite(omega_b), "omega_b must be finite");
    require(finite(delta), "delta must be finite");
    require(finite(phi), "phi must be finite");
    require(finite(eta_a) && eta_a >= 0.0, "eta_a must be non-negative");
    require(finite(eta_b) && eta_b >= 0.0, "eta_b must be non-negative");
    require(finite(eta_up) && eta_up >= 0.0, "eta_up must be non-negative");
    require(finite(eta_down) && eta_down >= 0.0, "eta_down must be non-negative");
    require(finite(alpha) && alpha >= 0.0, "alpha must be non-negative");
    require(n_max >= 2, "n_max must be at least 2");
}

std::vector<std::string> SystemParams::warnings() const
{
    std::vector<std::string> out;
    auto check = [&](const char* name, double eta) {
        if (eta > kLambDickeWarnThreshold) {
            std::ostringstream msg;
            msg << name << " = " << eta << " exceeds the Lamb-Dicke guard "
                << kLambDickeWarnThreshold;
            out.push_back(msg.str());
        }
    };
    check("eta_a", eta_a);
    check("eta_b", eta_b);
    check("eta_up", eta_up);
    check("eta_down", eta_down);
    return out;
}

HilbertSpace::HilbertSpace(int n_max)
{
    if (n_max < 1) throw Error(ErrorCode::InvalidArgument, "n_max must be at least 1");
    n_fock = n_max + 1;
}

OperatorMatrix annihilation(int n_fock)
{
    OperatorMatrix b = OperatorMatrix::Zero(n_fock, n_fock);
    for (int n = 1; n < n_fock; ++n) b(n - 1, n) = std::sqrt(static_cast<double>(n));
    return b;
}

OperatorMatrix position_quadrature(int n_fock)
{
    const OperatorMatrix b = annihilation(n_fock);
    return (b + b.adjoint()) / std::sqrt(2.0);
}

OperatorMatrix momentum_quadrature(int n_fock)
{
    const OperatorMatrix b = annihilation(n_fock);
    return cplx(0.0, 1.0) * (b - b.adjoint());
}

OperatorMatrix number_operator(int n_fock)
{
    OperatorMatrix n = OperatorMatrix::Zero(n_fock, n_fock);
    for (int k = 0; k < n_fock; ++k) n(k, k) = static_cast<double>(k);
    return n;
}

Eigen::Vector3cd ket_minus() { return Eigen::Vector3cd(1.0, 0.0, 0.0); }
Eigen::Vector3cd ket_plus() { return Eigen::Vector3cd(0.0, 1.0, 0.0); }
Eigen::Vector3cd ket_excited() { return Eigen::Vector3cd(0.0, 0.0, 1.0); }
Eigen::Vector3cd ket_up() { return (ket_plus() + ket_minus()) / std::sqrt(2.0); }
Eigen::Vector3cd ket_down() { return (ket_plus() - ket_minus()) / std::sqrt(2.0); }

Eigen::Matrix3cd outer(const Eigen::Vector3cd& a, const Eigen::Vector3cd& b)
{
    return a * b.adjoint();
}

OperatorMatrix tensor(const Eigen::Matrix3cd& electronic, const OperatorMatrix& motional)
{
    const Eigen::Index m = motional.rows();
    OperatorMatrix out = OperatorMatrix::Zero(3 * m, 3 * m);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (electronic(i, j) != cplx(0.0)) out.block(i * m, j * m, m, m) = electronic(i, j) * motional;
    return out;
}

HamiltonianTerms build_hamiltonian(const SystemParams& params, Scheme scheme)
{
    params.validate();
    const HilbertSpace space(params.n_max);
    const int nf = space.n_fock;
    const cplx I(0.0, 1.0);

    const OperatorMatrix id = OperatorMatrix::Identity(nf, nf);
    const OperatorMatrix q = position_quadrature(nf);
    const OperatorMatrix q2 = q * q;
    const OperatorMatrix zero = OperatorMatrix::Zero(space.dim(), space.dim());

    auto hermitian = [](const OperatorMatrix& x) -> OperatorMatrix { return x + x.adjoint(); };

    // A beam: |e><up| and e^{i phi}|e><down| with spatial phases of opposite sign.
    const Eigen::Matrix3cd a_up = outer(ket_excited(), ket_up());
    const Eigen::Matrix3cd a_down = std::exp(I * params.phi) * outer(ket_excited(), ket_down());
    const double ka = std::sqrt(2.0) * params.eta_a;
    const double ha = params.omega_a / 2.0;

    // B beam: |up><down| with spatial phase -k_B x.
    const Eigen::Matrix3cd b_leg = outer(ket_up(), ket_down());
    const double kb = std::sqrt(2.0) * params.eta_b;
    const double hb = params.omega_b / 2.0;

    HamiltonianTerms terms;
    terms.space = space;
    terms.h_tr = params.nu * tensor(Eigen::Matrix3cd::Identity(), number_operator(nf));
    terms.h_int = params.delta * tensor(outer(ket_excited(), ket_excited()), id);

    terms.v_eit0 = hermitian(ha * tensor(a_up + a_down, id));
    terms.v_eit1 = hermitian(ha * I * ka * tensor(a_up - a_down, q));
    terms.v_eit2 = hermitian(-ha * params.eta_a * params.eta_a * tensor(a_up + a_down, q2));

    terms.v_ssh0 = hermitian(hb * tensor(b_leg, id));
    terms.v_ssh1 = hermitian(-hb * I * kb * tensor(b_leg, q));
    terms.v_ssh2 = hermitian(-hb * params.eta_b * params.eta_b * tensor(b_leg, q2));

    switch (scheme) {
    case Scheme::robust: break;
    case Scheme::eit:
        terms.v_ssh0 = zero;
        terms.v_ssh1 = zero;
        terms.v_ssh2 = zero;
        break;
    case Scheme::ssh:
        terms.v_eit1 = zero;
        terms.v_eit2 = zero;
        break;
    }
    return terms;
}

Eigen::Matrix2d DressedStates::eigenvectors() const
{
    const double c = std::cos(mixing_angle);
    const double s = std::sin(mixing_angle);
    Eigen::Matrix2d v;
    v << c, s,
         -s, c;
    return v;
}

DressedStates dressed_states(const SystemParams& params)
{
    params.validate();
    DressedStates out;
    out.delta_plus = params.omega_b;
    out.delta_e = params.delta + params.omega_b / 2.0;

    const double d = out.delta_e - out.delta_plus;
    const double c = std::sqrt(2.0) * params.omega_a;
    const double root = std::hypot(d, c);

    // tan(theta) = -x + sqrt(x^2 + 1), x = d / c, written without cancellation.
    out.mixing_angle = d > 0.0 ? std::atan2(c, d + root) : std::atan2(root - d, c);
    out.delta_d1 = 0.5 * (out.delta_e + out.delta_plus - root);
    out.delta_d2 = 0.5 * (out.delta_e + out.delta_plus + root);
    return out;
}

double condition_ratio(double nu, double omega_b)
{
    if (omega_b == 0.0 || !std::isfinite(omega_b))
        throw Error(ErrorCode::InvalidArgument,
                    "SSh coupling absent; Fano alternative requires omega_b = -nu with eta_b = 0");
    return 2.0 * nu / omega_b + 2.0;
}

double eta_a_for_condition(double nu, double omega_b, double eta_b)
{
    return eta_b / condition_ratio(nu, omega_b);
}

double omega_b_for_condition(double nu, double eta_a, double eta_b)
{
    if (!(eta_b > 2.0 * eta_a) || !(eta_a > 0.0))
        throw Error(ErrorCode::InvalidArgument,
                    "cancellation condition requires eta_b > 2 eta_a > 0");
    return 2.0 * nu * eta_a / (eta_b - 2.0 * eta_a);
}

double condition_violation(const SystemParams& params)
{
    if (params.eta_a <= 0.0) return params.eta_b > 0.0 ? INFINITY : 0.0;
    const double ratio = condition_ratio(params.nu, params.omega_b);
    return params.eta_b / (params.eta_a * ratio) - 1.0;
}

StateVector target_steady_state(const SystemParams& params, const HilbertSpace& space)
{
    StateVector psi = StateVector::Zero(space.dim());
    psi(space.index(Level::minus, 0)) = 1.0;
    psi(space.index(Level::plus, 1)) = cplx(0.0, -params.eta_a);
    return psi.normalized();
}

} // namespace darkcool

#pragma once

// Single-particle model of the double-dark-state cooling scheme on a trapped
// three-level Lambda system, expanded in the Lamb-Dicke parameter.
//
// All frequencies are in units of the trap frequency nu (nu = 1 by default).
// The Hilbert space is electronic (x) truncated Fock, electronic index major:
//
//     index(level, n) = level * (n_max + 1) + n,   level in {minus, plus, excited}
//
// with |+-> = (|up> +- |down>) / sqrt(2).

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace darkcool {

using cplx = std::complex<double>;
using OperatorMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// Angular second moment of the dipole emission pattern W(s) = 3/4 (1 + s^2):
/// (1/2) * integral_{-1}^{1} s^2 W(s) ds = 2/5.
inline constexpr double kRecoilAlpha = 0.4;

inline constexpr double kLambDickeWarnThreshold = 0.5;

enum class Scheme { robust, eit, ssh };

Scheme parse_scheme(std::string_view name);
std::string_view to_string(Scheme scheme);

enum class Level : int { minus = 0, plus = 1, excited = 2 };

struct SystemParams {
    double nu = 1.0;
    double gamma = 15.0;   // per-channel decay coefficient
    double delta = 0.0;    // Raman detuning
    double omega_a = 2.3;
    double omega_b = 1.0;
    double eta_a = 0.025;
    double eta_b = 0.1;
    double phi = 0.0;      // phase on the A leg coupling |down> <-> |e>
    double eta_up = 0.0;   // recoil Lamb-Dicke parameter of the e -> up channel
    double eta_down = 0.0; // recoil Lamb-Dicke parameter of the e -> down channel
    int n_max = 15;
    double alpha = kRecoilAlpha;

    /// Throws Error(InvalidArgument) on violated invariants.
    void validate() const;

    /// Non-fatal diagnostics (Lamb-Dicke parameters above the regime guard).
    std::vector<std::string> warnings() const;

    SystemParams with_n_max(int n) const
    {
        SystemParams copy = *this;
        copy.n_max = n;
        return copy;
    }
};

struct HilbertSpace {
    static constexpr int n_electronic = 3;
    int n_fock = 0;

    explicit HilbertSpace(int n_max);

    int n_max() const { return n_fock - 1; }
    int dim() const { return n_electronic * n_fock; }
    int index(Level level, int n) const { return static_cast<int>(level) * n_fock + n; }
};

/// Truncated ladder operators on n_fock levels.
OperatorMatrix annihilation(int n_fock);
OperatorMatrix position_quadrature(int n_fock); // (b + b^dag) / sqrt(2)
OperatorMatrix momentum_quadrature(int n_fock); // i (b - b^dag)
OperatorMatrix number_operator(int n_fock);

/// Electronic kets in the (minus, plus, excited) basis.
Eigen::Vector3cd ket_minus();
Eigen::Vector3cd ket_plus();
Eigen::Vector3cd ket_excited();
Eigen::Vector3cd ket_up();
Eigen::Vector3cd ket_down();

/// |a><b| on the electronic space.
Eigen::Matrix3cd outer(const Eigen::Vector3cd& a, const Eigen::Vector3cd& b);

/// Electronic (x) motional product on the model basis ordering.
OperatorMatrix tensor(const Eigen::Matrix3cd& electronic, const OperatorMatrix& motional);

struct HamiltonianTerms {
    HilbertSpace space{2};
    OperatorMatrix h_tr;
    OperatorMatrix h_int;
    OperatorMatrix v_eit0, v_eit1, v_eit2;
    OperatorMatrix v_ssh0, v_ssh1, v_ssh2;

    OperatorMatrix order0() const { return h_tr + h_int + v_eit0 + v_ssh0; }
    OperatorMatrix order1() const { return v_eit1 + v_ssh1; }
    OperatorMatrix order2() const { return v_eit2 + v_ssh2; }
    OperatorMatrix total() const { return order0() + order1() + order2(); }
};

/// Builds every Hamiltonian term of the selected scheme. The A and B beams are
/// assembled in the bare {up, down, e} picture with the phase phi on the
/// |e><down| leg and then expressed in the {-, +, e} basis, so phi = 0
/// reproduces the standard interaction-picture form exactly.
HamiltonianTerms build_hamiltonian(const SystemParams& params, Scheme scheme);

struct DressedStates {
    double mixing_angle = 0.0;
    double delta_d1 = 0.0;
    double delta_d2 = 0.0;
    double delta_e = 0.0;
    double delta_plus = 0.0;

    /// Columns are |D1>, |D2> in the (plus, excited) basis.
    Eigen::Matrix2d eigenvectors() const;
};

/// Dressing of |+> and |e> by Omega_A, energies measured from |->.
DressedStates dressed_states(const SystemParams& params);

/// eta_B / eta_A that cancels the blue sideband: 2 nu / Omega_B + 2.
double condition_ratio(double nu, double omega_b);

/// eta_A that satisfies the cancellation condition for the given B coupling.
double eta_a_for_condition(double nu, double omega_b, double eta_b);

/// Omega_B that satisfies the cancellation condition for given eta_A, eta_B.
double omega_b_for_condition(double nu, double eta_a, double eta_b);

/// Relative violation of the cancellation condition (0 when satisfied).
double condition_violation(const SystemParams& params);

/// Normalized |->|0> - i eta_A |+>|1>.
StateVector target_steady_state(const SystemParams& params, const HilbertSpace& space);

} // namespace darkcool

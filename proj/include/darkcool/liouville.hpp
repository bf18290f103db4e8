#pragma once

// Lamb-Dicke-expanded Lindblad superoperators on column-major vectorized
// density matrices: vec(A rho B) = (B^T (x) A) vec(rho).

#include <vector>

#include <Eigen/Sparse>

#include "darkcool/model.hpp"

namespace darkcool {

using SparseOp = Eigen::SparseMatrix<cplx>;

struct SuperOp {
    SystemParams params;
    Scheme scheme = Scheme::robust;
    HilbertSpace space{2};
    SparseOp order0_coherent;   // -i[H0, .]
    SparseOp order0_dissipative;
    SparseOp order0, order1, order2;
    SparseOp total;

    Eigen::Index dim() const { return space.dim(); }
};

/// Superoperator builders.
SparseOp to_sparse(const OperatorMatrix& m);
/// Kronecker product a (x) b.
SparseOp sparse_kron(const SparseOp& a, const SparseOp& b);
SparseOp left_multiply(const OperatorMatrix& a);             // rho -> A rho
SparseOp right_multiply(const OperatorMatrix& b);            // rho -> rho B
SparseOp sandwich(const OperatorMatrix& a, const OperatorMatrix& b); // rho -> A rho B
SparseOp commutator(const OperatorMatrix& h);                // rho -> -i[H, rho]
SparseOp lindblad(const OperatorMatrix& jump);               // J rho J^dag - {J^dag J, rho}/2

/// L with row `row` replaced by the trace functional (bordered steady-state system).
SparseOp bordered_liouvillian(const SparseOp& L, Eigen::Index dim, Eigen::Index row);

StateVector vectorize(const OperatorMatrix& rho);
OperatorMatrix unvectorize(const StateVector& v, Eigen::Index dim);

/// Order 0: per-channel form sum_i Gamma (2 s_ie rho s_ei - rho s_ee - s_ee rho),
/// i in {up, down}. Order 2: recoil 2 alpha Gamma eta_i^2 s_ie (2 q rho q - q^2 rho - rho q^2) s_ei.
SparseOp build_dissipator(const SystemParams& params, int order);

SuperOp build_liouvillian(const SystemParams& params, Scheme scheme);

double mean_phonon(const OperatorMatrix& rho, const HilbertSpace& space);

/// Electronic populations (minus, plus, excited).
Eigen::Vector3d electronic_populations(const OperatorMatrix& rho, const HilbertSpace& space);

struct SteadyStateResult {
    OperatorMatrix rho;
    double mean_n = 0.0;
    double fidelity_target = 0.0;
    double residual = 0.0;          // ||L vec(rho)||
    double relative_residual = 0.0; // residual / ||L||
    int n_max = 0;
    bool convergence_checked = false;
    bool converged = true;
    double mean_n_check = 0.0;      // result at n_max + 5 when checked
};

/// Bordered sparse solve of L rho = 0 with Tr rho = 1.
SteadyStateResult steady_state(const SuperOp& L);

struct SteadyStateOptions {
    bool check_convergence = true;
    int extra_levels = 5;
    double relative_tolerance = 0.01;
    double absolute_floor = 1e-9;
};

/// Builds the total Liouvillian, solves, and re-solves at n_max + extra_levels.
SteadyStateResult solve_steady_state(const SystemParams& params, Scheme scheme,
                                     const SteadyStateOptions& options = {});

struct EvolveOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-9;
    double initial_step = 1e-3;
    bool keep_states = false;
};

struct EvolutionRecord {
    std::vector<double> times;
    std::vector<double> mean_n;
    std::vector<Eigen::Vector3d> populations;
    std::vector<double> trace;
    std::vector<OperatorMatrix> states; // filled when keep_states
};

/// Adaptive Dormand-Prince integration of d vec(rho)/dt = L vec(rho); output at
/// every point of the strictly increasing grid t_grid (t_grid[0] is rho0's time).
EvolutionRecord evolve(const SparseOp& L, const HilbertSpace& space, const OperatorMatrix& rho0,
                       const std::vector<double>& t_grid, const EvolveOptions& options = {});

/// |psi><psi|.
OperatorMatrix projector(const StateVector& psi);

/// Electronic density matrix (x) motional Fock state |n><n|.
OperatorMatrix product_state(const HilbertSpace& space, Level level, int n);

} // namespace darkcool

#pragma once

// Monte-Carlo wave-function simulation of an ion chain with all axial modes.
//
// Basis ordering: ion electronic states (-, +, e) major, ion 0 most significant,
// followed by the Fock states of each mode, mode 0 most significant. For one ion this
// coincides with the single-ion HilbertSpace ordering.

#include <cstdint>
#include <vector>

#include <Eigen/Sparse>

#include "darkcool/liouville.hpp"
#include "darkcool/model.hpp"

namespace darkcool {

struct NormalModes {
    Eigen::VectorXd positions;   // equilibrium positions in units of the length scale
    Eigen::VectorXd frequencies; // ascending, in units of the center-of-mass frequency
    Eigen::MatrixXd vectors;     // vectors(i, m) = participation b_{i,m} of ion i in mode m
};

/// Axial normal modes of n_ions in a harmonic trap with Coulomb repulsion.
NormalModes normal_modes(int n_ions);

struct ChainConfig {
    int n_ions = 1;
    int addressed_mode = 0;          // 0-based; base.nu is the frequency of this mode
    SystemParams base;               // single-ion parameters, eta are the bare values
    Scheme scheme = Scheme::robust;
    std::vector<int> n_max;          // Fock cutoff per mode
    std::vector<double> initial_nbar; // thermal occupation per mode
    bool second_order = true;         // keep the eta^2 terms of the Hamiltonian
    int max_excited = -1;             // keep states with at most this many excited ions; < 0 keeps all
    long long dimension_cap = 200000; // on 3^N prod(n_max + 1)

    void validate() const;
    long long dimension() const;
};

/// Chain of n_ions addressed on `addressed_mode`, with a common Fock cutoff and initial occupation.
ChainConfig make_chain(int n_ions, int addressed_mode, const SystemParams& base, int n_max, double initial_nbar);

struct ChainModel {
    ChainConfig config;
    NormalModes modes;
    Eigen::VectorXd mode_frequencies;            // absolute, addressed mode equals base.nu
    Eigen::MatrixXd eta_a, eta_b;                // eta_{i,m}
    long long dim = 0;                           // dimension after the excitation restriction
    std::vector<long long> full_index;           // product-basis index of each retained state
    std::vector<long long> sub_index;            // inverse map, -1 when dropped
    double max_damping = 0.0;                    // largest decay rate 2 gamma * (excited ions) in H_eff
    Eigen::SparseMatrix<cplx, Eigen::RowMajor> hamiltonian;
    Eigen::SparseMatrix<cplx, Eigen::RowMajor> effective; // H - (i/2) sum J^dag J
    std::vector<std::vector<int>> occupation;    // occupation[m][k] = Fock number of mode m at retained state k
    std::vector<std::vector<int>> electronic;    // electronic[i][k] = level of ion i at retained state k
};

ChainModel build_chain(const ChainConfig& config);

struct JumpEvent {
    double time = 0.0;
    int ion = 0;
    int channel = 0; // 0: up, 1: down
};

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::vector<double> times;
    Eigen::MatrixXd mean_n; // (time, mode)
    std::vector<JumpEvent> jumps;
    bool norm_monotone = true;
    int step_halvings = 0;
};

struct TrajectoryOptions {
    double dt = 0.05;                  // nominal step, halved while the jump probability exceeds the limit
    double max_jump_probability = 0.1;
    int max_halvings = 20;
    int dense_levels = 4;              // step sizes dt / 2^k, k <= dense_levels, use precomputed propagators
    long long dense_limit = 3000;      // largest dimension with dense propagators
};

/// Per-trajectory seed derived from the master seed and the trajectory index.
std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index);

/// Initial pure state: every ion in |->, each mode in a Fock state drawn from its truncated thermal distribution.
StateVector sample_initial_state(const ChainModel& model, std::uint64_t seed);

/// Waiting-time trajectory on the output grid t_grid (starting at t_grid[0]).
TrajectoryRecord run_trajectory(const ChainModel& model, std::uint64_t seed, const std::vector<double>& t_grid,
                                const TrajectoryOptions& opts = {});

/// Runs n trajectories on `threads` workers; results are ordered by trajectory index.
std::vector<TrajectoryRecord> run_ensemble(const ChainModel& model, int n_trajectories, std::uint64_t master_seed,
                                           const std::vector<double>& t_grid, int threads = 1,
                                           const TrajectoryOptions& opts = {});

struct EnsembleAverage {
    std::vector<double> times;
    Eigen::MatrixXd mean_n;   // (time, mode)
    Eigen::MatrixXd std_error; // (time, mode)
    int trajectories = 0;
};

EnsembleAverage ensemble_average(const std::vector<TrajectoryRecord>& records);

/// Density matrix matching sample_initial_state in distribution, on the retained basis (dimension <= 4000).
OperatorMatrix initial_density_matrix(const ChainModel& model);

} // namespace darkcool

#include "darkcool/mcwf.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <string>
#include <thread>

#include <Eigen/Eigenvalues>

#include "darkcool/error.hpp"

namespace darkcool {

namespace {

using RowSparse = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

const cplx I(0.0, 1.0);

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Uniform in (0, 1) from the top 53 bits; portable across standard libraries.
double uniform(std::mt19937_64& rng)
{
    double u;
    do {
        u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    } while (u == 0.0);
    return u;
}

SparseOp identity(Eigen::Index n)
{
    SparseOp id(n, n);
    id.setIdentity();
    return id;
}

SparseOp kron_all(const std::vector<SparseOp>& factors)
{
    SparseOp out = factors.front();
    for (size_t k = 1; k < factors.size(); ++k) out = sparse_kron(out, factors[k]);
    return out;
}

struct Embedder {
    int n_ions;
    std::vector<int> n_fock;

    std::vector<SparseOp> identities() const
    {
        std::vector<SparseOp> f;
        for (int i = 0; i < n_ions; ++i) f.push_back(identity(3));
        for (int nf : n_fock) f.push_back(identity(nf));
        return f;
    }

    SparseOp electronic(int ion, const Eigen::Matrix3cd& op) const
    {
        auto f = identities();
        f[ion] = to_sparse(op);
        return kron_all(f);
    }

    SparseOp mode(int m, const OperatorMatrix& op) const
    {
        auto f = identities();
        f[n_ions + m] = to_sparse(op);
        return kron_all(f);
    }
};

double row_norm_bound(const RowSparse& h)
{
    double best = 0.0;
    for (int k = 0; k < h.outerSize(); ++k) {
        double s = 0.0;
        for (RowSparse::InnerIterator it(h, k); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

// exp(-i H t) psi by a Taylor series on substeps with |H| tau <= 2.
StateVector propagate(const RowSparse& h, double h_norm, const StateVector& psi, double t)
{
    const int substeps = std::max(1, static_cast<int>(std::ceil(h_norm * t / 2.0)));
    const double tau = t / substeps;
    StateVector out = psi;
    StateVector term(psi.size());
    for (int s = 0; s < substeps; ++s) {
        term = out;
        const double scale = out.norm();
        for (int k = 1; k < 60; ++k) {
            term = (-I * tau / static_cast<double>(k)) * (h * term);
            out += term;
            if (term.norm() <= 1e-15 * scale) break;
        }
    }
    return out;
}

std::vector<double> thermal_weights(double nbar, int n_max)
{
    std::vector<double> w(n_max + 1, 0.0);
    if (nbar <= 0.0) {
        w[0] = 1.0;
        return w;
    }
    const double x = nbar / (nbar + 1.0);
    double total = 0.0;
    for (int n = 0; n <= n_max; ++n) total += (w[n] = std::pow(x, n));
    for (double& v : w) v /= total;
    return w;
}

Eigen::RowVectorXd mean_occupations(const ChainModel& model, const StateVector& psi)
{
    Eigen::RowVectorXd out(static_cast<Eigen::Index>(model.occupation.size()));
    const double norm2 = psi.squaredNorm();
    for (size_t m = 0; m < model.occupation.size(); ++m) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < psi.size(); ++k) s += std::norm(psi(k)) * model.occupation[m][k];
        out(static_cast<Eigen::Index>(m)) = s / norm2;
    }
    return out;
}

} // namespace

NormalModes normal_modes(int n_ions)
{
    if (n_ions < 1) throw Error(ErrorCode::InvalidArgument, "chain needs at least one ion");
    const int n = n_ions;
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = (i - 0.5 * (n - 1)) * std::pow(static_cast<double>(n), 0.3) * 0.8;

    // Hessian of sum z^2/2 + sum_{i<j} 1/|z_i - z_j|.
    auto hessian = [n](const Eigen::VectorXd& x) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double c = 2.0 / std::pow(std::abs(x(i) - x(j)), 3);
                a(i, i) += c;
                a(i, j) -= c;
            }
        return a;
    };
    for (int iter = 0; iter < 100 && n > 1; ++iter) {
        Eigen::VectorXd g = z;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double d = z(i) - z(j);
                g(i) -= (d > 0.0 ? 1.0 : -1.0) / (d * d);
            }
        const Eigen::VectorXd step = hessian(z).ldlt().solve(g);
        z -= step;
        if (step.norm() < 1e-14) break;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(z));
    NormalModes out;
    out.positions = z;
    out.frequencies = es.eigenvalues().cwiseSqrt();
    out.vectors = es.eigenvectors();
    for (int m = 0; m < n; ++m) {
        Eigen::Index k = 0;
        out.vectors.col(m).cwiseAbs().maxCoeff(&k);
        if (out.vectors(k, m) < 0.0) out.vectors.col(m) *= -1.0;
    }
    return out;
}

void ChainConfig::validate() const
{
    base.validate();
    if (n_ions < 1) throw Error(ErrorCode::InvalidArgument, "chain needs at least one ion");
    if (addressed_mode < 0 || addressed_mode >= n_ions)
        throw Error(ErrorCode::InvalidArgument, "addressed mode index out of range");
    if (static_cast<int>(n_max.size()) != n_ions || static_cast<int>(initial_nbar.size()) != n_ions)
        throw Error(ErrorCode::InvalidArgument, "need one Fock cutoff and one initial occupation per mode");
    for (int c : n_max)
        if (c < 1) throw Error(ErrorCode::InvalidArgument, "Fock cutoff must be at least 1");
    for (double nb : initial_nbar)
        if (!(nb >= 0.0) || !std::isfinite(nb)) throw Error(ErrorCode::InvalidArgument, "initial occupation must be >= 0");
    if (dimension() > dimension_cap)
        throw Error(ErrorCode::DimensionCap,
                    "Hilbert-space dimension " + std::to_string(dimension()) + " exceeds cap " + std::to_string(dimension_cap));
}

long long ChainConfig::dimension() const
{
    long long d = 1;
    for (int i = 0; i < n_ions; ++i) {
        d *= 3;
        if (d > (1LL << 40)) return d;
    }
    for (int c : n_max) {
        d *= (c + 1);
        if (d > (1LL << 40)) return d;
    }
    return d;
}

ChainConfig make_chain(int n_ions, int addressed_mode, const SystemParams& base, int n_max, double initial_nbar)
{
    ChainConfig c;
    c.n_ions = n_ions;
    c.addressed_mode = addressed_mode;
    c.base = base;
    c.n_max.assign(std::max(n_ions, 0), n_max);
    c.initial_nbar.assign(std::max(n_ions, 0), initial_nbar);
    return c;
}

ChainModel build_chain(const ChainConfig& config)
{
    config.validate();
    const int n = config.n_ions;
    const SystemParams& p = config.base;

    ChainModel model;
    model.config = config;
    model.modes = normal_modes(n);
    const double f_addr = model.modes.frequencies(config.addressed_mode);
    model.mode_frequencies = p.nu * model.modes.frequencies / f_addr;
    model.eta_a.resize(n, n);
    model.eta_b.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m) {
            const double scale = model.modes.vectors(i, m) * std::sqrt(p.nu / model.mode_frequencies(m));
            model.eta_a(i, m) = p.eta_a * scale;
            model.eta_b(i, m) = p.eta_b * scale;
        }

    Embedder emb{n, {}};
    for (int c : config.n_max) emb.n_fock.push_back(c + 1);
    const Eigen::Index dim = static_cast<Eigen::Index>(config.dimension());

    std::vector<SparseOp> q(n);
    SparseOp h(dim, dim);
    for (int m = 0; m < n; ++m) {
        q[m] = emb.mode(m, position_quadrature(emb.n_fock[m]));
        h += model.mode_frequencies(m) * emb.mode(m, number_operator(emb.n_fock[m]));
    }

    const bool keep_eit = config.scheme != Scheme::ssh;
    const bool keep_ssh = config.scheme != Scheme::eit;
    const Eigen::Matrix3cd a_up = outer(ket_excited(), ket_up());
    const Eigen::Matrix3cd a_down = std::exp(I * p.phi) * outer(ket_excited(), ket_down());
    const Eigen::Matrix3cd b_leg = outer(ket_up(), ket_down());
    const Eigen::Matrix3cd e_e = outer(ket_excited(), ket_excited());
    const double order2 = config.second_order ? 1.0 : 0.0;

    SparseOp damping(dim, dim);
    for (int i = 0; i < n; ++i) {
        SparseOp xa(dim, dim), xb(dim, dim);
        for (int m = 0; m < n; ++m) {
            xa += model.eta_a(i, m) * q[m];
            xb += model.eta_b(i, m) * q[m];
        }
        const SparseOp xa2 = xa * xa;
        const SparseOp xb2 = xb * xb;
        const SparseOp up = emb.electronic(i, a_up);
        const SparseOp down = emb.electronic(i, a_down);
        const SparseOp ee = emb.electronic(i, e_e);

        SparseOp v = (p.omega_a / 2.0) * SparseOp(up + down);
        if (keep_eit) {
            v += (p.omega_a / 2.0) * SparseOp(I * std::sqrt(2.0) * SparseOp(SparseOp(up - down) * xa));
            v += (-order2 * p.omega_a / 2.0) * SparseOp(SparseOp(up + down) * xa2);
        }
        if (keep_ssh) {
            const SparseOp bl = emb.electronic(i, b_leg);
            v += (p.omega_b / 2.0) * bl;
            v += (p.omega_b / 2.0) * SparseOp(-I * std::sqrt(2.0) * SparseOp(bl * xb));
            v += (-order2 * p.omega_b / 2.0) * SparseOp(bl * xb2);
        }
        h += SparseOp(v + SparseOp(v.adjoint()));
        h += p.delta * ee;
        // Two channels of rate 2 gamma each: (1/2) sum J^dag J = 2 gamma |e><e|.
        damping += 2.0 * p.gamma * ee;
    }
    // Basis labels on the full product space, then restriction to at most max_excited excitations.
    std::vector<std::vector<int>> occ(n, std::vector<int>(dim)), lev(n, std::vector<int>(dim));
    for (Eigen::Index k = 0; k < dim; ++k) {
        Eigen::Index rest = k;
        for (int m = n - 1; m >= 0; --m) {
            occ[m][k] = static_cast<int>(rest % emb.n_fock[m]);
            rest /= emb.n_fock[m];
        }
        for (int i = n - 1; i >= 0; --i) {
            lev[i][k] = static_cast<int>(rest % 3);
            rest /= 3;
        }
    }
    const int max_excited = config.max_excited < 0 ? n : config.max_excited;
    model.sub_index.assign(dim, -1);
    for (Eigen::Index k = 0; k < dim; ++k) {
        int excited = 0;
        for (int i = 0; i < n; ++i) excited += lev[i][k] == static_cast<int>(Level::excited);
        if (excited > max_excited) continue;
        model.sub_index[k] = static_cast<long long>(model.full_index.size());
        model.full_index.push_back(k);
    }
    const Eigen::Index sub = static_cast<Eigen::Index>(model.full_index.size());
    std::vector<Eigen::Triplet<cplx>> sel;
    for (Eigen::Index r = 0; r < sub; ++r) sel.emplace_back(r, model.full_index[r], 1.0);
    SparseOp select(sub, dim);
    select.setFromTriplets(sel.begin(), sel.end());
    const SparseOp select_t = select.transpose();

    h.prune(cplx(0.0), 0.0);
    const SparseOp h_sub = select * h * select_t;
    const SparseOp d_sub = select * damping * select_t;
    model.dim = sub;
    model.hamiltonian = h_sub;
    model.effective = RowSparse(SparseOp(h_sub - I * d_sub));
    model.effective.makeCompressed();
    model.max_damping = 2.0 * p.gamma * max_excited;

    model.occupation.assign(n, std::vector<int>(sub));
    model.electronic.assign(n, std::vector<int>(sub));
    for (Eigen::Index r = 0; r < sub; ++r)
        for (int j = 0; j < n; ++j) {
            model.occupation[j][r] = occ[j][model.full_index[r]];
            model.electronic[j][r] = lev[j][model.full_index[r]];
        }
    return model;
}

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index)
{
    return splitmix64(master_seed ^ splitmix64(index + 1));
}

namespace {

StateVector draw_initial_state(const ChainModel& model, std::mt19937_64& rng)
{
    const int n = model.config.n_ions;
    std::vector<int> fock(n);
    for (int m = 0; m < n; ++m) {
        const auto w = thermal_weights(model.config.initial_nbar[m], model.config.n_max[m]);
        double u = uniform(rng);
        int k = 0;
        while (k + 1 < static_cast<int>(w.size()) && u > w[k]) u -= w[k++];
        fock[m] = k;
    }
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(model.dim));
    for (Eigen::Index k = 0; k < psi.size(); ++k) {
        bool match = true;
        for (int i = 0; i < n && match; ++i) match = model.electronic[i][k] == static_cast<int>(Level::minus);
        for (int m = 0; m < n && match; ++m) match = model.occupation[m][k] == fock[m];
        if (match) {
            psi(k) = 1.0;
            break;
        }
    }
    return psi;
}

} // namespace

StateVector sample_initial_state(const ChainModel& model, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return draw_initial_state(model, rng);
}

namespace {

// exp(-i H_eff tau) for tau = dt / 2^k. Dense matrices for the first levels of small models,
// a shifted sparse Taylor series otherwise.
class Propagator {
public:
    Propagator(const ChainModel& model, const TrajectoryOptions& opts) : dt_(opts.dt)
    {
        // exp(-i H_eff t) = exp(-c t) exp(-i (H_eff + i c) t), centring the damping spectrum.
        shift_ = 0.5 * model.max_damping;
        shifted_ = model.effective;
        for (Eigen::Index k = 0; k < shifted_.rows(); ++k) shifted_.coeffRef(k, k) += I * shift_;
        norm_ = row_norm_bound(shifted_);
        if (model.dim > opts.dense_limit) return;

        const int levels = std::min(opts.max_halvings, opts.dense_levels);
        const Eigen::Index n = static_cast<Eigen::Index>(model.dim);
        const double tau = std::ldexp(dt_, -levels);
        Eigen::MatrixXcd u(n, n);
        for (Eigen::Index c = 0; c < n; ++c) u.col(c) = apply_taylor(StateVector::Unit(n, c), tau);
        dense_.assign(levels + 1, Eigen::MatrixXcd());
        dense_[levels] = u;
        for (int k = levels - 1; k >= 0; --k) {
            dense_[k].noalias() = dense_[k + 1] * dense_[k + 1];
        }
    }

    StateVector operator()(const StateVector& psi, double tau) const
    {
        for (size_t k = 0; k < dense_.size(); ++k)
            if (tau == std::ldexp(dt_, -static_cast<int>(k))) return dense_[k] * psi;
        return apply_taylor(psi, tau);
    }

private:
    StateVector apply_taylor(const StateVector& psi, double tau) const
    {
        return std::exp(-shift_ * tau) * propagate(shifted_, norm_, psi, tau);
    }

    double dt_;
    double shift_ = 0.0;
    double norm_ = 0.0;
    RowSparse shifted_;
    std::vector<Eigen::MatrixXcd> dense_;
};

void check_trajectory_inputs(const std::vector<double>& t_grid, const TrajectoryOptions& opts)
{
    if (t_grid.empty()) throw Error(ErrorCode::InvalidArgument, "time grid is empty");
    for (size_t k = 1; k < t_grid.size(); ++k)
        if (!(t_grid[k] > t_grid[k - 1])) throw Error(ErrorCode::InvalidArgument, "time grid must be increasing");
    if (!(opts.dt > 0.0) || !(opts.max_jump_probability > 0.0 && opts.max_jump_probability < 1.0) ||
        opts.max_halvings < 0)
        throw Error(ErrorCode::InvalidArgument, "invalid trajectory options");
}

TrajectoryRecord trajectory(const ChainModel& model, const Propagator& advance, std::uint64_t seed,
                            const std::vector<double>& t_grid, const TrajectoryOptions& opts)
{
    const int n = model.config.n_ions;
    const double gamma = model.config.base.gamma;
    std::mt19937_64 rng(seed);

    TrajectoryRecord rec;
    rec.seed = seed;
    rec.times = t_grid;
    rec.mean_n.resize(static_cast<Eigen::Index>(t_grid.size()), n);

    StateVector psi = draw_initial_state(model, rng);
    double threshold = uniform(rng);
    double t = t_grid.front();
    int level = 0;
    rec.mean_n.row(0) = mean_occupations(model, psi);

    auto jump = [&](StateVector& state) {
        // Both channels of an ion carry the same weight 2 gamma P_e(ion).
        std::vector<double> weights(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double pe = 0.0;
            for (Eigen::Index k = 0; k < state.size(); ++k)
                if (model.electronic[i][k] == static_cast<int>(Level::excited)) pe += std::norm(state(k));
            total += (weights[i] = 4.0 * gamma * pe);
        }
        if (!(total > 0.0)) throw Error(ErrorCode::SolverFailure, "jump requested with no excited population");
        double u = uniform(rng) * total;
        int ion = 0;
        while (ion + 1 < n && u > weights[ion]) u -= weights[ion++];
        const int channel = uniform(rng) < 0.5 ? 0 : 1;

        // |c><e| on ion `ion`, with |up>, |down> expanded on (-, +).
        const Eigen::Vector3cd target = channel == 0 ? ket_up() : ket_down();
        long long stride = 1;
        for (int m = 0; m < n; ++m) stride *= model.config.n_max[m] + 1;
        for (int i = n - 1; i > ion; --i) stride *= 3;
        StateVector out = StateVector::Zero(state.size());
        for (Eigen::Index k = 0; k < state.size(); ++k) {
            if (model.electronic[ion][k] != static_cast<int>(Level::excited)) continue;
            const long long base = model.full_index[k] - stride * static_cast<int>(Level::excited);
            for (int l = 0; l < 2; ++l) out(model.sub_index[base + stride * l]) += target(l) * state(k);
        }
        state = out / out.norm();
        rec.jumps.push_back({t, ion, channel});
    };

    for (size_t out_idx = 1; out_idx < t_grid.size(); ++out_idx) {
        const double t_out = t_grid[out_idx];
        while (t < t_out) {
            const double step = std::ldexp(opts.dt, -level);
            const bool last = step >= t_out - t;
            const double h = last ? t_out - t : step;
            const double n0 = psi.squaredNorm();
            StateVector next = advance(psi, h);
            const double n1 = next.squaredNorm();
            if (n1 > n0 * (1.0 + 1e-10)) rec.norm_monotone = false;
            if (1.0 - n1 / n0 > opts.max_jump_probability) {
                if (++level > opts.max_halvings)
                    throw Error(ErrorCode::StepRuleViolation, "jump probability per step stays above the limit");
                ++rec.step_halvings;
                continue;
            }
            if (n1 > threshold) {
                psi = std::move(next);
                t = last ? t_out : t + h;
                level = std::max(0, level - 1);
                continue;
            }
            // Binary descent to the time where |psi|^2 crosses the threshold.
            double elapsed = 0.0;
            double size = h;
            for (int it = 0; it < 45; ++it) {
                size *= 0.5;
                StateVector trial = advance(psi, size);
                if (trial.squaredNorm() > threshold) {
                    psi = std::move(trial);
                    elapsed += size;
                }
            }
            psi = advance(psi, size);
            t += elapsed + size;
            jump(psi);
            threshold = uniform(rng);
        }
        rec.mean_n.row(static_cast<Eigen::Index>(out_idx)) = mean_occupations(model, psi);
    }
    return rec;
}

} // namespace

TrajectoryRecord run_trajectory(const ChainModel& model, std::uint64_t seed, const std::vector<double>& t_grid,
                                const TrajectoryOptions& opts)
{
    check_trajectory_inputs(t_grid, opts);
    const Propagator advance(model, opts);
    return trajectory(model, advance, seed, t_grid, opts);
}

std::vector<TrajectoryRecord> run_ensemble(const ChainModel& model, int n_trajectories, std::uint64_t master_seed,
                                           const std::vector<double>& t_grid, int threads,
                                           const TrajectoryOptions& opts)
{
    if (n_trajectories < 1) throw Error(ErrorCode::InvalidArgument, "need at least one trajectory");
    check_trajectory_inputs(t_grid, opts);
    const Propagator advance(model, opts);
    const int workers = std::max(1, std::min(threads, n_trajectories));
    std::vector<TrajectoryRecord> records(n_trajectories);
    std::vector<std::exception_ptr> errors(n_trajectories);
    std::atomic<int> next{0};
    auto work = [&] {
        for (int k = next++; k < n_trajectories; k = next++) {
            try {
                records[k] = trajectory(model, advance, trajectory_seed(master_seed, k), t_grid, opts);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return records;
}

EnsembleAverage ensemble_average(const std::vector<TrajectoryRecord>& records)
{
    if (records.size() < 2) throw Error(ErrorCode::InvalidArgument, "ensemble average needs at least two trajectories");
    const auto& first = records.front();
    for (const auto& r : records)
        if (r.times != first.times || r.mean_n.cols() != first.mean_n.cols())
            throw Error(ErrorCode::InvalidArgument, "trajectories were recorded on different grids");
    const double k = static_cast<double>(records.size());
    EnsembleAverage avg;
    avg.times = first.times;
    avg.trajectories = static_cast<int>(records.size());
    avg.mean_n = Eigen::MatrixXd::Zero(first.mean_n.rows(), first.mean_n.cols());
    Eigen::MatrixXd sq = avg.mean_n;
    for (const auto& r : records) {
        avg.mean_n += r.mean_n;
        sq += r.mean_n.cwiseProduct(r.mean_n);
    }
    avg.mean_n /= k;
    const Eigen::MatrixXd var = ((sq / k - avg.mean_n.cwiseProduct(avg.mean_n)) * (k / (k - 1.0))).cwiseMax(0.0);
    avg.std_error = (var / k).cwiseSqrt();
    return avg;
}

OperatorMatrix initial_density_matrix(const ChainModel& model)
{
    if (model.dim > 4000) throw Error(ErrorCode::DimensionCap, "initial density matrix limited to dimension 4000");
    const int n = model.config.n_ions;
    std::vector<std::vector<double>> w(n);
    for (int m = 0; m < n; ++m) w[m] = thermal_weights(model.config.initial_nbar[m], model.config.n_max[m]);
    OperatorMatrix rho = OperatorMatrix::Zero(model.dim, model.dim);
    for (Eigen::Index k = 0; k < rho.rows(); ++k) {
        bool dark = true;
        for (int i = 0; i < n && dark; ++i) dark = model.electronic[i][k] == static_cast<int>(Level::minus);
        if (!dark) continue;
        double p = 1.0;
        for (int m = 0; m < n; ++m) p *= w[m][model.occupation[m][k]];
        rho(k, k) = p;
    }
    return rho;
}

} // namespace darkcool

#include "darkcool/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseLU>
#include <boost/numeric/odeint.hpp>

#include "darkcool/error.hpp"

namespace darkcool {

namespace {

SparseOp kron(const SparseOp& a, const SparseOp& b) { return sparse_kron(a, b); }

SparseOp identity(Eigen::Index n)
{
    SparseOp id(n, n);
    id.setIdentity();
    return id;
}

double sparse_norm(const SparseOp& m)
{
    double s = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseOp::InnerIterator it(m, k); it; ++it) s += std::norm(it.value());
    return std::sqrt(s);
}

// Diagonal positions of the vectorized density matrix.
Eigen::Index diag_index(Eigen::Index i, Eigen::Index dim) { return i * dim + i; }

StateVector bordered_solve(const SparseOp& L, Eigen::Index dim, Eigen::Index row)
{
    const Eigen::Index n = L.rows();
    const SparseOp a = bordered_liouvillian(L, dim, row);
    Eigen::SparseLU<SparseOp, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw Error(ErrorCode::DegenerateNullSpace, "bordered Liouvillian is singular: " + lu.lastErrorMessage());
    StateVector rhs = StateVector::Zero(n);
    rhs(row) = 1.0;
    StateVector x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite())
        throw Error(ErrorCode::DegenerateNullSpace, "bordered solve failed");
    return x;
}

// Hermitize, clip tiny negative eigenvalues, renormalize.
OperatorMatrix physical_state(const OperatorMatrix& raw)
{
    OperatorMatrix rho = 0.5 * (raw + raw.adjoint());
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(rho);
    Eigen::VectorXd w = es.eigenvalues();
    if (w.minCoeff() < -1e-6)
        throw Error(ErrorCode::SolverFailure,
                    "steady state has negative eigenvalue " + std::to_string(w.minCoeff()));
    if (w.minCoeff() < 0.0) {
        w = w.cwiseMax(0.0);
        rho = es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    }
    return rho / rho.trace().real();
}

} // namespace

SparseOp bordered_liouvillian(const SparseOp& L, Eigen::Index dim, Eigen::Index row)
{
    const Eigen::Index n = L.rows();
    std::vector<Eigen::Triplet<cplx>> triplets;
    triplets.reserve(static_cast<size_t>(L.nonZeros() + dim));
    for (int k = 0; k < L.outerSize(); ++k)
        for (SparseOp::InnerIterator it(L, k); it; ++it)
            if (it.row() != row) triplets.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < dim; ++i) triplets.emplace_back(row, i * dim + i, 1.0);
    SparseOp a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

SparseOp to_sparse(const OperatorMatrix& m)
{
    SparseOp s = m.sparseView(cplx(0.0), 0.0);
    s.makeCompressed();
    return s;
}

SparseOp sparse_kron(const SparseOp& a, const SparseOp& b)
{
    std::vector<Eigen::Triplet<cplx>> triplets;
    triplets.reserve(static_cast<size_t>(a.nonZeros() * b.nonZeros()));
    for (int ka = 0; ka < a.outerSize(); ++ka)
        for (SparseOp::InnerIterator ia(a, ka); ia; ++ia)
            for (int kb = 0; kb < b.outerSize(); ++kb)
                for (SparseOp::InnerIterator ib(b, kb); ib; ++ib)
                    triplets.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                                          ia.value() * ib.value());
    SparseOp out(a.rows() * b.rows(), a.cols() * b.cols());
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

SparseOp left_multiply(const OperatorMatrix& a) { return kron(identity(a.rows()), to_sparse(a)); }

SparseOp right_multiply(const OperatorMatrix& b) { return kron(to_sparse(b.transpose()), identity(b.rows())); }

SparseOp sandwich(const OperatorMatrix& a, const OperatorMatrix& b)
{
    return kron(to_sparse(b.transpose()), to_sparse(a));
}

SparseOp commutator(const OperatorMatrix& h)
{
    const cplx I(0.0, 1.0);
    return SparseOp(-I * (left_multiply(h) - right_multiply(h)));
}

SparseOp lindblad(const OperatorMatrix& jump)
{
    const OperatorMatrix jj = jump.adjoint() * jump;
    return SparseOp(sandwich(jump, jump.adjoint()) - 0.5 * left_multiply(jj) - 0.5 * right_multiply(jj));
}

StateVector vectorize(const OperatorMatrix& rho)
{
    return Eigen::Map<const StateVector>(rho.data(), rho.size());
}

OperatorMatrix unvectorize(const StateVector& v, Eigen::Index dim)
{
    return Eigen::Map<const OperatorMatrix>(v.data(), dim, dim);
}

SparseOp build_dissipator(const SystemParams& params, int order)
{
    params.validate();
    const HilbertSpace space(params.n_max);
    const Eigen::Index n = space.dim();
    if (order != 0 && order != 2)
        throw Error(ErrorCode::InvalidArgument, "dissipator order must be 0 or 2");

    const int nf = space.n_fock;
    const OperatorMatrix id = OperatorMatrix::Identity(nf, nf);
    const OperatorMatrix q = position_quadrature(nf);
    const OperatorMatrix q2 = q * q;

    SparseOp out(n * n, n * n);
    const Eigen::Vector3cd channels[2] = {ket_up(), ket_down()};
    const double etas[2] = {params.eta_up, params.eta_down};
    for (int c = 0; c < 2; ++c) {
        const Eigen::Matrix3cd s = outer(channels[c], ket_excited());
        const Eigen::Matrix3cd sd = s.adjoint();
        if (order == 0) {
            out += lindblad(std::sqrt(2.0 * params.gamma) * tensor(s, id));
        } else {
            const double coeff = 2.0 * params.alpha * params.gamma * etas[c] * etas[c];
            if (coeff == 0.0) continue;
            SparseOp term = 2.0 * sandwich(tensor(s, q), tensor(sd, q));
            term -= sandwich(tensor(s, q2), tensor(sd, id));
            term -= sandwich(tensor(s, id), tensor(sd, q2));
            out += coeff * term;
        }
    }
    out.makeCompressed();
    return out;
}

SuperOp build_liouvillian(const SystemParams& params, Scheme scheme)
{
    const HamiltonianTerms h = build_hamiltonian(params, scheme);
    SuperOp L;
    L.params = params;
    L.scheme = scheme;
    L.space = h.space;
    L.order0_coherent = commutator(h.order0());
    L.order0_dissipative = build_dissipator(params, 0);
    L.order0 = L.order0_coherent + L.order0_dissipative;
    L.order1 = commutator(h.order1());
    L.order2 = SparseOp(commutator(h.order2()) + build_dissipator(params, 2));
    L.total = SparseOp(L.order0 + L.order1 + L.order2);
    for (SparseOp* m : {&L.order0_coherent, &L.order0_dissipative, &L.order0, &L.order1, &L.order2, &L.total}) {
        m->prune(cplx(0.0), 0.0);
        m->makeCompressed();
    }
    return L;
}

double mean_phonon(const OperatorMatrix& rho, const HilbertSpace& space)
{
    double s = 0.0;
    for (int el = 0; el < HilbertSpace::n_electronic; ++el)
        for (int n = 0; n < space.n_fock; ++n) {
            const int i = el * space.n_fock + n;
            s += n * rho(i, i).real();
        }
    return s;
}

Eigen::Vector3d electronic_populations(const OperatorMatrix& rho, const HilbertSpace& space)
{
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    for (int el = 0; el < HilbertSpace::n_electronic; ++el)
        for (int n = 0; n < space.n_fock; ++n) {
            const int i = el * space.n_fock + n;
            p(el) += rho(i, i).real();
        }
    return p;
}

OperatorMatrix projector(const StateVector& psi) { return psi * psi.adjoint(); }

OperatorMatrix product_state(const HilbertSpace& space, Level level, int n)
{
    OperatorMatrix rho = OperatorMatrix::Zero(space.dim(), space.dim());
    const int i = space.index(level, n);
    rho(i, i) = 1.0;
    return rho;
}

SteadyStateResult steady_state(const SuperOp& L)
{
    const Eigen::Index dim = L.dim();
    const HilbertSpace& space = L.space;
    const StateVector x1 = bordered_solve(L.total, dim, diag_index(space.index(Level::minus, 0), dim));
    const StateVector x2 = bordered_solve(L.total, dim, diag_index(space.index(Level::plus, 0), dim));
    const double scale = std::max(1.0, x1.norm());
    if ((x1 - x2).norm() > 1e-6 * scale)
        throw Error(ErrorCode::DegenerateNullSpace,
                    "steady state is not unique (independent bordered solves disagree by " +
                        std::to_string((x1 - x2).norm()) + ")");

    SteadyStateResult out;
    out.rho = physical_state(unvectorize(x1, dim));
    out.n_max = space.n_max();
    out.mean_n = mean_phonon(out.rho, space);
    const StateVector target = target_steady_state(L.params, space);
    out.fidelity_target = (target.adjoint() * out.rho * target)(0, 0).real();
    out.residual = (L.total * vectorize(out.rho)).norm();
    const double lnorm = sparse_norm(L.total);
    out.relative_residual = lnorm > 0.0 ? out.residual / lnorm : out.residual;
    if (out.relative_residual > 1e-6)
        throw Error(ErrorCode::SolverFailure,
                    "steady-state residual " + std::to_string(out.relative_residual) + " too large");
    return out;
}

SteadyStateResult solve_steady_state(const SystemParams& params, Scheme scheme, const SteadyStateOptions& options)
{
    SteadyStateResult out = steady_state(build_liouvillian(params, scheme));
    if (options.check_convergence) {
        const SteadyStateResult check =
            steady_state(build_liouvillian(params.with_n_max(params.n_max + options.extra_levels), scheme));
        out.convergence_checked = true;
        out.mean_n_check = check.mean_n;
        const double diff = std::abs(check.mean_n - out.mean_n);
        out.converged = diff <= options.relative_tolerance * std::abs(check.mean_n) + options.absolute_floor;
    }
    return out;
}

EvolutionRecord evolve(const SparseOp& L, const HilbertSpace& space, const OperatorMatrix& rho0,
                       const std::vector<double>& t_grid, const EvolveOptions& options)
{
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<cplx>;

    const Eigen::Index dim = space.dim();
    if (rho0.rows() != dim || rho0.cols() != dim || L.rows() != dim * dim)
        throw Error(ErrorCode::InvalidArgument, "evolve: dimension mismatch");
    if (t_grid.empty()) throw Error(ErrorCode::InvalidArgument, "evolve: empty time grid");
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw Error(ErrorCode::InvalidArgument, "evolve: time grid must be strictly increasing");

    EvolutionRecord rec;
    auto observe = [&](const State& x, double t) {
        const OperatorMatrix rho = Eigen::Map<const OperatorMatrix>(x.data(), dim, dim);
        rec.times.push_back(t);
        rec.mean_n.push_back(mean_phonon(rho, space));
        rec.populations.push_back(electronic_populations(rho, space));
        rec.trace.push_back(rho.trace().real());
        if (options.keep_states) rec.states.push_back(rho);
    };

    State x(rho0.data(), rho0.data() + rho0.size());
    if (t_grid.size() == 1) {
        observe(x, t_grid.front());
        return rec;
    }

    auto rhs = [&](const State& in, State& out, double) {
        Eigen::Map<const StateVector> v(in.data(), static_cast<Eigen::Index>(in.size()));
        Eigen::Map<StateVector> dv(out.data(), static_cast<Eigen::Index>(out.size()));
        dv.noalias() = L * v;
    };

    auto stepper = odeint::make_dense_output(options.abs_tol, options.rel_tol, odeint::runge_kutta_dopri5<State>());
    try {
        odeint::integrate_times(stepper, rhs, x, t_grid.begin(), t_grid.end(), options.initial_step, observe,
                                odeint::max_step_checker(10000000));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::StepFailure, std::string("integration failed: ") + e.what());
    }
    return rec;
}

} // namespace darkcool

#include "darkcool/rates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "darkcool/error.hpp"
#include "darkcool/liouville.hpp"

namespace darkcool {

namespace {

void require_perturbative(const SystemParams& params, double linewidth)
{
    if (!(params.omega_a > 0.0) || !(linewidth > 0.0))
        throw Error(ErrorCode::InvalidArgument, "perturbative formula undefined for omega_a = 0 or gamma = 0");
}

// Rate of the form num * Omega_A^2 Gamma / [4 Gamma^2 a^2 + 4 (Omega_A^2/2 - a b)^2],
// a = s nu + delta_plus, b = s nu + delta_e, s = +1 (A+) or -1 (A-).
double sideband_rate(const SystemParams& p, double linewidth, double s)
{
    require_perturbative(p, linewidth);
    const double nu = s * p.nu;
    const double delta_plus = p.omega_b;
    const double delta_e = p.delta + p.omega_b / 2.0;
    const double amp = 2.0 * p.eta_a * (nu + p.omega_b) - p.eta_b * p.omega_b;
    const double a = nu + delta_plus;
    const double b = nu + delta_e;
    const double oa2 = p.omega_a * p.omega_a;
    const double x = oa2 / 2.0 - a * b;
    const double den = 4.0 * linewidth * linewidth * a * a + 4.0 * x * x;
    return amp * amp * oa2 * linewidth / den;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

RateCoefficients finish(double a_plus, double a_minus, RateMethod method)
{
    RateCoefficients r;
    r.a_plus = a_plus;
    r.a_minus = a_minus;
    r.w = a_minus - a_plus;
    r.n_ss = r.w != 0.0 ? a_plus / r.w : std::numeric_limits<double>::infinity();
    r.method = method;
    return r;
}

} // namespace

std::string_view to_string(RateMethod method)
{
    switch (method) {
    case RateMethod::closed_form: return "closed_form";
    case RateMethod::numeric_projection: return "numeric_projection";
    case RateMethod::spectral: return "spectral";
    case RateMethod::evolve_fit: return "evolve_fit";
    }
    return "closed_form";
}

double aplus_numerator(const SystemParams& p)
{
    const double amp = 2.0 * p.eta_a * (p.nu + p.omega_b) - p.eta_b * p.omega_b;
    return amp * amp;
}

double aplus_formula(const SystemParams& params, double linewidth) { return sideband_rate(params, linewidth, 1.0); }

double aminus_formula(const SystemParams& params, double linewidth) { return sideband_rate(params, linewidth, -1.0); }

double cooling_rate_formula(const SystemParams& p, double linewidth)
{
    const double delta_plus = p.omega_b;
    const double delta_e = p.delta + p.omega_b / 2.0;
    const double a = p.nu - delta_plus;
    const double b = p.nu - delta_e;
    const double oa2 = p.omega_a * p.omega_a;
    const double x = oa2 / 2.0 - a * b;
    const double den = linewidth * linewidth * a * a + x * x;
    const double num = 4.0 * p.eta_a * p.eta_a * p.nu * p.nu * oa2 * linewidth;
    if (den == 0.0)
        throw Error(ErrorCode::InvalidArgument, "cooling rate undefined at delta_plus = nu with omega_a = 0");
    return num / den;
}

double aplus_closed_form(const SystemParams& params) { return aplus_formula(params, formula_linewidth(params)); }

double aminus_closed_form(const SystemParams& params) { return aminus_formula(params, formula_linewidth(params)); }

double cooling_rate_closed_form(const SystemParams& params, std::string* warning)
{
    if (warning) {
        warning->clear();
        const double v = params.omega_b != 0.0 ? condition_violation(params) : INFINITY;
        if (!(std::abs(v) <= 1e-6)) {
            std::ostringstream msg;
            msg << "cancellation condition violated (relative deviation " << v << ")";
            *warning = msg.str();
        }
    }
    return cooling_rate_formula(params, formula_linewidth(params));
}

RateCoefficients closed_form_rates(const SystemParams& params)
{
    return finish(aplus_closed_form(params), aminus_closed_form(params), RateMethod::closed_form);
}

RateCoefficients project_rate_equation(const SystemParams& params, Scheme scheme)
{
    const SystemParams p = params.with_n_max(kProjectionNMax);
    const SuperOp L = build_liouvillian(p, scheme);
    const HilbertSpace& space = L.space;
    const Eigen::Index dim = space.dim();
    const Eigen::Index big = dim * dim;
    const int nf = space.n_fock;

    auto diag = [dim](Eigen::Index i) { return i * dim + i; };
    auto pidx = [&](int n) { return diag(space.index(Level::minus, n)); };

    double l0_norm = 0.0;
    for (int k = 0; k < L.order0.outerSize(); ++k)
        for (SparseOp::InnerIterator it(L.order0, k); it; ++it) l0_norm += std::norm(it.value());
    l0_norm = std::sqrt(l0_norm);
    const double tol = 1e-8 * std::max(1.0, l0_norm);

    // Right null vectors p_n and left null vectors l_n of L0.
    const SparseOp l0_rows = L.order0.transpose();
    for (int n = 0; n < nf; ++n) {
        if (L.order0.col(pidx(n)).norm() > tol)
            throw Error(ErrorCode::NullSpaceMismatch,
                        "|-><-| (x) |n><n| is not stationary under the zeroth-order Liouvillian");
        StateVector row = StateVector::Zero(big);
        for (int el = 0; el < HilbertSpace::n_electronic; ++el) {
            const Eigen::Index i = diag(el * nf + n);
            row += l0_rows.col(i);
        }
        if (row.norm() > tol)
            throw Error(ErrorCode::NullSpaceMismatch, "motional populations are not conserved at zeroth order");
    }

    // M = L0 + sum_n p_n l_n^dag is invertible iff the null space is exactly span{p_n}.
    std::vector<Eigen::Triplet<cplx>> triplets;
    for (int k = 0; k < L.order0.outerSize(); ++k)
        for (SparseOp::InnerIterator it(L.order0, k); it; ++it)
            triplets.emplace_back(it.row(), it.col(), it.value());
    for (int n = 0; n < nf; ++n)
        for (int el = 0; el < HilbertSpace::n_electronic; ++el)
            triplets.emplace_back(pidx(n), diag(el * nf + n), 1.0);
    SparseOp m(big, big);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();

    Eigen::SparseLU<SparseOp, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(m);
    if (lu.info() != Eigen::Success)
        throw Error(ErrorCode::NullSpaceMismatch, "zeroth-order null space is larger than the dark-state sector");

    // R(m, n) = l_m^dag (L2 p_n - L1 L0^{-1} L1 p_n).
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nf, nf);
    for (int n = 0; n < nf; ++n) {
        const StateVector rhs = L.order1.col(pidx(n));
        const StateVector y = lu.solve(rhs);
        const double res = (m * y - rhs).norm();
        if (!y.allFinite() || res > 1e-8 * std::max(1.0, rhs.norm()))
            throw Error(ErrorCode::NullSpaceMismatch, "pseudo-inverse solve on the complement failed");
        const StateVector g = StateVector(L.order2.col(pidx(n))) - L.order1 * y;
        for (int k = 0; k < nf; ++k) {
            cplx s = 0.0;
            for (int el = 0; el < HilbertSpace::n_electronic; ++el) s += g(diag(el * nf + k));
            R(k, n) = s.real();
        }
    }

    // Linear birth-death structure: R(n+1, n) = A+ (n+1), R(n-1, n) = A- n.
    constexpr int kCheck = 3;
    std::array<double, kCheck + 1> ap{};
    std::array<double, kCheck> am{};
    for (int n = 0; n <= kCheck; ++n) ap[n] = R(n + 1, n) / (n + 1);
    for (int n = 1; n <= kCheck; ++n) am[n - 1] = R(n - 1, n) / n;
    const double a_plus = ap[0];
    const double a_minus = am[0];
    const double scale = std::max({std::abs(a_plus), std::abs(a_minus), 1e-300});
    for (double v : ap)
        if (std::abs(v - a_plus) > 1e-6 * scale)
            throw Error(ErrorCode::SolverFailure, "projected heating rate is not linear in n");
    for (double v : am)
        if (std::abs(v - a_minus) > 1e-6 * scale)
            throw Error(ErrorCode::SolverFailure, "projected cooling rate is not linear in n");

    auto clamp = [&](double v) {
        if (v < 0.0) {
            if (std::abs(v) > 1e-9 * scale)
                throw Error(ErrorCode::SolverFailure, "projected rate is negative");
            return 0.0;
        }
        return v;
    };
    return finish(clamp(a_plus), clamp(a_minus), RateMethod::numeric_projection);
}

TwoPeakPlacement two_peak_placement(double nu, double splitting)
{
    if (!(nu > 0.0)) throw Error(ErrorCode::InvalidArgument, "nu must be positive");
    if (!(std::abs(splitting) <= nu))
        throw Error(ErrorCode::InvalidArgument, "no real omega_a: |delta_e - delta_plus| must not exceed nu");
    TwoPeakPlacement t;
    t.delta_e = 0.5 * (3.0 * nu + splitting);
    t.delta_plus = 0.5 * (3.0 * nu - splitting);
    t.omega_a = std::sqrt(std::max(0.0, (nu * nu - splitting * splitting) / 2.0));
    t.omega_b = t.delta_plus;
    t.delta = t.delta_e - t.omega_b / 2.0;
    t.degenerate = std::abs(splitting) == nu;
    return t;
}

Eigen::Vector2d dressed_linewidths(const SystemParams& params)
{
    const DressedStates d = dressed_states(params);
    Eigen::Matrix2cd h;
    h << d.delta_plus, params.omega_a / std::sqrt(2.0),
         params.omega_a / std::sqrt(2.0), cplx(d.delta_e, -2.0 * params.gamma);
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(h, false);
    Eigen::Vector2cd ev = es.eigenvalues();
    if (ev(0).real() > ev(1).real()) std::swap(ev(0), ev(1));
    return Eigen::Vector2d(-2.0 * ev(0).imag(), -2.0 * ev(1).imag());
}

double slowest_internal_rate(const SystemParams& params) { return dressed_linewidths(params).minCoeff(); }

OptimizerResult optimize_cooling_rate(const SystemParams& base, const OptimizerOptions& opt)
{
    base.validate();
    OptimizerResult best;
    best.params = base;
    best.w = -1.0;

    auto build = [&](const Eigen::Vector3d& x) {
        SystemParams p = base;
        p.omega_a = x(0);
        p.omega_b = x(1);
        p.delta = x(2);
        p.eta_a = eta_a_for_condition(p.nu, p.omega_b, p.eta_b);
        return p;
    };
    // Negative W on the feasible set, +1 outside.
    auto objective = [&](const Eigen::Vector3d& x) {
        ++best.evaluations;
        if (!(x(0) > 0.0 && x(0) <= opt.omega_a_max && x(1) > 0.0 && x(1) <= opt.omega_b_max &&
              x(2) >= opt.delta_min && x(2) <= opt.delta_max))
            return 1.0;
        const SystemParams p = build(x);
        if (p.omega_a * p.eta_a >= opt.coupling_guard * p.nu) return 1.0;
        if (p.omega_b * p.eta_b >= opt.coupling_guard * p.nu) return 1.0;
        const double w = cooling_rate_formula(p, formula_linewidth(p));
        if (!std::isfinite(w) || w > opt.rate_guard * slowest_internal_rate(p)) return 1.0;
        return -w;
    };

    // Coordinate grid search.
    const int g = std::max(3, opt.grid_points);
    Eigen::Vector3d x_best(0.5, 1.0, 0.0);
    double f_best = objective(x_best);
    for (int i = 1; i <= g; ++i)
        for (int j = 1; j <= g; ++j)
            for (int k = 0; k < g; ++k) {
                const Eigen::Vector3d x(opt.omega_a_max * i / g, opt.omega_b_max * j / g,
                                        opt.delta_min + (opt.delta_max - opt.delta_min) * k / (g - 1));
                const double f = objective(x);
                if (f < f_best) {
                    f_best = f;
                    x_best = x;
                }
            }

    // Nelder-Mead polish.
    std::array<Eigen::Vector3d, 4> s;
    std::array<double, 4> fs{};
    const Eigen::Vector3d step(opt.omega_a_max / g, opt.omega_b_max / g, (opt.delta_max - opt.delta_min) / g);
    s[0] = x_best;
    for (int i = 0; i < 3; ++i) {
        s[i + 1] = x_best;
        s[i + 1](i) -= 0.5 * step(i);
    }
    for (int i = 0; i < 4; ++i) fs[i] = objective(s[i]);
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        std::array<int, 4> order{0, 1, 2, 3};
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        std::array<Eigen::Vector3d, 4> s2;
        std::array<double, 4> f2{};
        for (int i = 0; i < 4; ++i) {
            s2[i] = s[order[i]];
            f2[i] = fs[order[i]];
        }
        s = s2;
        fs = f2;
        if (std::abs(fs[3] - fs[0]) < 1e-14 && (s[3] - s[0]).norm() < 1e-10) break;

        const Eigen::Vector3d c = (s[0] + s[1] + s[2]) / 3.0;
        const Eigen::Vector3d xr = c + (c - s[3]);
        const double fr = objective(xr);
        if (fr < fs[0]) {
            const Eigen::Vector3d xe = c + 2.0 * (c - s[3]);
            const double fe = objective(xe);
            if (fe < fr) { s[3] = xe; fs[3] = fe; }
            else { s[3] = xr; fs[3] = fr; }
        } else if (fr < fs[2]) {
            s[3] = xr;
            fs[3] = fr;
        } else {
            const Eigen::Vector3d xc = fr < fs[3] ? c + 0.5 * (xr - c) : c + 0.5 * (s[3] - c);
            const double fc = objective(xc);
            if (fc < std::min(fr, fs[3])) {
                s[3] = xc;
                fs[3] = fc;
            } else {
                for (int i = 1; i < 4; ++i) {
                    s[i] = s[0] + 0.5 * (s[i] - s[0]);
                    fs[i] = objective(s[i]);
                }
            }
        }
    }
    const int ib = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    if (fs[ib] < f_best) {
        f_best = fs[ib];
        x_best = s[ib];
    }
    if (f_best >= 0.0) throw Error(ErrorCode::SolverFailure, "no feasible point satisfies the validity guards");
    best.params = build(x_best);
    best.w = -f_best;
    return best;
}

RateCoefficients numeric_rate_spectral(const SystemParams& params, Scheme scheme)
{
    const SuperOp L = build_liouvillian(params, scheme);
    const Eigen::Index dim = L.dim();
    const Eigen::Index big = dim * dim;
    const Eigen::Index row = L.space.index(Level::minus, 0) * (dim + 1);

    // On traceless matrices the bordered system inverts L, so Arnoldi on it
    // resolves the eigenvalues of L closest to zero (shift-invert at 0).
    Eigen::SparseLU<SparseOp, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(bordered_liouvillian(L.total, dim, row));
    if (lu.info() != Eigen::Success)
        throw Error(ErrorCode::DegenerateNullSpace, "bordered Liouvillian is singular");
    auto apply = [&](StateVector b) -> StateVector {
        b(row) = 0.0;
        return lu.solve(b);
    };

    const int m = static_cast<int>(std::min<Eigen::Index>(40, big - 1));
    Eigen::MatrixXcd V(big, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    StateVector v0 = vectorize(product_state(L.space, Level::minus, 1) - product_state(L.space, Level::minus, 0));
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    StateVector noise(big);
    for (Eigen::Index i = 0; i < big; ++i) noise(i) = cplx(uni(rng), uni(rng));
    OperatorMatrix nm = unvectorize(noise, dim);
    nm -= (nm.trace() / static_cast<double>(dim)) * OperatorMatrix::Identity(dim, dim);
    v0 += 1e-3 * vectorize(nm);
    V.col(0) = v0.normalized();
    int k_used = m;
    for (int k = 0; k < m; ++k) {
        StateVector w = apply(V.col(k));
        for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXcd h = V.leftCols(k + 1).adjoint() * w;
            w -= V.leftCols(k + 1) * h;
            H.block(0, k, k + 1, 1) += h;
        }
        H(k + 1, k) = w.norm();
        if (std::abs(H(k + 1, k)) < 1e-14) {
            k_used = k + 1;
            break;
        }
        V.col(k + 1) = w / H(k + 1, k);
    }

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(k_used, k_used));
    double w_rate = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k_used; ++i) {
        const cplx mu = es.eigenvalues()(i);
        if (std::abs(mu) < 1e-300) continue;
        const cplx lambda = 1.0 / mu;
        if (std::abs(lambda.imag()) >= 0.25 * params.nu || !(lambda.real() < 0.0)) continue;
        const StateVector x = V.leftCols(k_used) * es.eigenvectors().col(i);
        const double res = (L.total * x - lambda * x).norm() / x.norm();
        if (res > 1e-6 * std::max(1.0, std::abs(lambda))) continue;
        w_rate = std::min(w_rate, -lambda.real());
    }
    if (!std::isfinite(w_rate)) throw Error(ErrorCode::SolverFailure, "no converged motional relaxation eigenvalue");

    const SteadyStateResult ss = steady_state(L);
    RateCoefficients r;
    r.w = w_rate;
    r.n_ss = ss.mean_n;
    r.a_plus = w_rate * ss.mean_n;
    r.a_minus = r.a_plus + w_rate;
    r.method = RateMethod::spectral;
    return r;
}

RateCoefficients numeric_rate_evolve(const SystemParams& params, Scheme scheme, double t_max)
{
    const SuperOp L = build_liouvillian(params, scheme);
    const SteadyStateResult ss = steady_state(L);
    if (!(t_max > 0.0)) {
        double w_guess = 0.0;
        try {
            w_guess = closed_form_rates(params).w;
        } catch (const Error&) {
        }
        t_max = w_guess > 0.0 ? 4.0 / w_guess : 500.0;
    }
    const int points = 201;
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = t_max * i / (points - 1);
    const EvolutionRecord rec = evolve(L.total, L.space, product_state(L.space, Level::minus, 1), grid);

    std::vector<double> x, y;
    const double amp = 1.0 - ss.mean_n;
    for (size_t i = 0; i < rec.times.size(); ++i) {
        const double excess = (rec.mean_n[i] - ss.mean_n) / amp;
        if (rec.times[i] < 0.1 * t_max || excess < 1e-3) continue;
        x.push_back(rec.times[i]);
        y.push_back(std::log(excess));
    }
    if (x.size() < 5) throw Error(ErrorCode::PoorFit, "too few points above the steady-state floor");
    const LinearFit f = fit_line(x, y);
    if (f.r_squared < 0.95) throw Error(ErrorCode::PoorFit, "exponential fit R^2 = " + std::to_string(f.r_squared));

    RateCoefficients r;
    r.w = -f.slope;
    r.n_ss = ss.mean_n;
    r.a_plus = r.w * ss.mean_n;
    r.a_minus = r.a_plus + r.w;
    r.method = RateMethod::evolve_fit;
    return r;
}

std::vector<double> default_fluctuation_grid(int points)
{
    if (points < 2) throw Error(ErrorCode::InvalidArgument, "fluctuation grid needs at least 2 points");
    std::vector<double> g(points);
    const double lo = std::log(1e-3), hi = std::log(5e-2);
    for (int i = 0; i < points; ++i) g[i] = std::exp(lo + (hi - lo) * i / (points - 1));
    return g;
}

RobustnessFit robustness_exponent(const SystemParams& params, Scheme scheme, FluctuatingRabi which,
                                  const std::vector<double>& relative_grid)
{
    if (relative_grid.size() < 3) throw Error(ErrorCode::InvalidArgument, "fluctuation grid needs at least 3 points");
    const SteadyStateOptions no_check{false};
    RobustnessFit fit;
    fit.baseline_n = solve_steady_state(params, scheme, no_check).mean_n;
    const double omega = which == FluctuatingRabi::omega_a ? params.omega_a : params.omega_b;

    auto n_at = [&](double d) {
        SystemParams p = params;
        (which == FluctuatingRabi::omega_a ? p.omega_a : p.omega_b) = omega + d;
        return solve_steady_state(p, scheme, no_check).mean_n;
    };

    std::vector<double> lx, ly;
    for (double rel : relative_grid) {
        const double d = rel * omega;
        const double excess = 0.5 * (n_at(d) + n_at(-d)) - fit.baseline_n;
        fit.deviations.push_back(d);
        fit.excess.push_back(excess);
        if (!(excess > 0.0)) {
            std::ostringstream msg;
            msg << "non-positive excess " << excess << " at deviation " << d;
            throw Error(ErrorCode::PoorFit, msg.str());
        }
        lx.push_back(std::log(d));
        ly.push_back(std::log(excess));
    }
    const LinearFit f = fit_line(lx, ly);
    fit.exponent = f.slope;
    fit.r_squared = f.r_squared;
    if (f.r_squared < 0.95) {
        std::ostringstream msg;
        msg << "log-log fit R^2 = " << f.r_squared << " (slope " << f.slope << ")";
        throw Error(ErrorCode::PoorFit, msg.str());
    }
    return fit;
}

RobustnessExponents robustness_exponents(const SystemParams& params, const std::vector<double>& relative_grid)
{
    RobustnessExponents out;
    out.omega_a = robustness_exponent(params, Scheme::robust, FluctuatingRabi::omega_a, relative_grid);
    out.omega_b = robustness_exponent(params, Scheme::robust, FluctuatingRabi::omega_b, relative_grid);
    return out;
}

} // namespace darkcool

#include "darkcool/fano.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "darkcool/error.hpp"

namespace darkcool {

namespace {

std::vector<double> uniform_grid(int m, double k_min, double k_max)
{
    if (m < 2 || !(k_max > k_min)) throw Error(ErrorCode::InvalidArgument, "continuum grid needs m >= 2 and k_max > k_min");
    std::vector<double> k(m);
    for (int i = 0; i < m; ++i) k[i] = k_min + (k_max - k_min) * i / (m - 1);
    return k;
}

} // namespace

void ContinuumModel::validate() const
{
    if (k_grid.size() < 2) throw Error(ErrorCode::InvalidArgument, "continuum needs at least two modes");
    if (coupling.size() != k_grid.size())
        throw Error(ErrorCode::InvalidArgument, "coupling profile and k grid differ in length");
    for (size_t i = 1; i < k_grid.size(); ++i)
        if (!(k_grid[i] > k_grid[i - 1])) throw Error(ErrorCode::InvalidArgument, "k grid must be strictly increasing");
    for (double g : coupling)
        if (!std::isfinite(g)) throw Error(ErrorCode::InvalidArgument, "couplings must be finite");
    if (!std::isfinite(omega_a) || !std::isfinite(omega_b) || !std::isfinite(delta_e))
        throw Error(ErrorCode::InvalidArgument, "discrete-state parameters must be finite");
}

ContinuumModel flat_continuum(double omega_a, double omega_b, int m, double strength, double k_min, double k_max)
{
    ContinuumModel model;
    model.k_grid = uniform_grid(m, k_min, k_max);
    const double g = strength * std::sqrt((k_max - k_min) / (m - 1));
    model.coupling.assign(m, g);
    model.omega_a = omega_a;
    model.omega_b = omega_b;
    return model;
}

ContinuumModel tapered_continuum(double omega_a, double omega_b, int m, double width, double strength,
                                 double k_min, double k_max)
{
    ContinuumModel model = flat_continuum(omega_a, omega_b, m, strength, k_min, k_max);
    for (int i = 0; i < m; ++i) {
        const double x = model.k_grid[i] / width;
        model.coupling[i] /= std::sqrt(1.0 + x * x);
    }
    return model;
}

double grid_spacing(const ContinuumModel& model)
{
    return (model.k_grid.back() - model.k_grid.front()) / static_cast<double>(model.k_grid.size() - 1);
}

ContinuumSpectrum diagonalize_continuum(const ContinuumModel& model)
{
    model.validate();
    const int m = static_cast<int>(model.k_grid.size());
    const int n = m + 2;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    h(0, 0) = model.omega_b;
    h(1, 1) = model.delta_e;
    h(0, 1) = h(1, 0) = model.omega_a / std::sqrt(2.0);
    for (int i = 0; i < m; ++i) {
        h(i + 2, i + 2) = model.k_grid[i];
        h(1, i + 2) = h(i + 2, 1) = model.coupling[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::SolverFailure, "continuum diagonalization failed");
    ContinuumSpectrum out;
    out.energies = es.eigenvalues();
    out.eigenvectors = es.eigenvectors();
    out.overlap_plus = out.eigenvectors.row(0).transpose();
    out.overlap_e = out.eigenvectors.row(1).transpose();
    return out;
}

double fano_zero(const ContinuumSpectrum& s)
{
    const Eigen::Index n = s.energies.size();
    const Eigen::VectorXd f = s.overlap_e.cwiseProduct(s.overlap_plus);
    // Largest-weight sign change; noise-level products away from the node are ignored.
    const double floor = 1e-12 * f.cwiseAbs().maxCoeff();
    double best_weight = -1.0;
    double k0 = 0.0;
    Eigen::Index prev = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(f(i)) <= floor) continue;
        if (prev >= 0 && (f(prev) > 0.0) != (f(i) > 0.0)) {
            const double weight = std::abs(s.overlap_plus(prev)) + std::abs(s.overlap_plus(i));
            if (weight > best_weight) {
                best_weight = weight;
                const double t = f(prev) / (f(prev) - f(i));
                k0 = s.energies(prev) + t * (s.energies(i) - s.energies(prev));
            }
        }
        prev = i;
    }
    if (best_weight < 0.0) throw Error(ErrorCode::NoCrossing, "<e|k><+|k> does not change sign");
    return k0;
}

double fano_zero(const ContinuumModel& model) { return fano_zero(diagonalize_continuum(model)); }

SidebandAmplitudes sideband_amplitudes(const SystemParams& p)
{
    SidebandAmplitudes a;
    a.red = p.eta_a * (p.nu - p.omega_b) + p.eta_b * p.omega_b / 2.0;
    a.blue = -p.eta_a * (p.omega_b + p.nu) + p.eta_b * p.omega_b / 2.0;
    return a;
}

} // namespace darkcool

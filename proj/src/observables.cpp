#include "polaron/observables.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include "fftw_lock.hpp"

namespace polaron {

namespace {

const ComplexField& orbital(const MeanFieldState& state, Species species) {
    return species == Species::bath ? state.bath : state.imp;
}

double particle_number(const MixtureParams& p, Species species) {
    return static_cast<double>(species == Species::bath ? p.n_bath : p.n_imp);
}

RealVector trap(const Grid1D& grid, double mass, double omega) {
    RealVector v(grid.n_points());
    for (std::size_t j = 0; j < v.size(); ++j) {
        v[j] = 0.5 * mass * omega * omega * grid.x(j) * grid.x(j);
    }
    return v;
}

void require_same_size(std::size_t a, std::size_t b) {
    if (a != b) throw Error(Errc::size_mismatch, "densities must share one grid");
}

}  // namespace

RealVector one_body_density(const MeanFieldState& state, Species species) {
    RealVector rho = abs_squared(orbital(state, species).values);
    const double n = particle_number(state.params, species);
    for (double& r : rho) r *= n;
    return rho;
}

RealVector one_body_density(const CorrelatedState& state, Species species) {
    const CISpace& sp = *state.space;
    const Eigen::MatrixXcd rho = one_body_matrix(state, species);
    const auto& modes =
        species == Species::bath ? sp.basis().bath_modes : sp.basis().imp_modes;
    RealVector out(sp.grid().n_points(), 0.0);
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
        for (Eigen::Index j = 0; j < rho.cols(); ++j) {
            const double r = rho(i, j).real();
            if (r == 0.0) continue;
            for (std::size_t x = 0; x < out.size(); ++x) out[x] += r * modes[i][x] * modes[j][x];
        }
    }
    return out;
}

double mean_position(const MeanFieldState& state, Species species) {
    const ComplexField& phi = orbital(state, species);
    double s = 0.0;
    for (std::size_t j = 0; j < phi.values.size(); ++j) s += phi.grid.x(j) * std::norm(phi.values[j]);
    return s * phi.grid.spacing() / phi.norm_squared();
}

double mean_momentum(const MeanFieldState& state, Species species) {
    const ComplexField& phi = orbital(state, species);
    const ComplexVector d = SineTransform(phi.grid).derivative(phi.values);
    Complex s{};
    for (std::size_t j = 0; j < d.size(); ++j) s += std::conj(phi.values[j]) * d[j];
    return s.imag() * phi.grid.spacing() / phi.norm_squared();
}

double mean_position(const CorrelatedState& state, Species species) {
    const Eigen::MatrixXcd rho = one_body_matrix(state, species);
    const Eigen::MatrixXcd& x = state.space->position_matrix(species);
    // <sum_kl x_kl a_k^dagger a_l> = sum_kl x_kl rho_kl
    const double n = particle_number(state.space->params(), species);
    return x.cwiseProduct(rho).sum().real() / n;
}

double mean_momentum(const CorrelatedState& state, Species species) {
    const Eigen::MatrixXcd rho = one_body_matrix(state, species);
    const Eigen::MatrixXcd& p = state.space->momentum_matrix(species);
    const double n = particle_number(state.space->params(), species);
    return p.cwiseProduct(rho).sum().real() / n;
}

EnergyComponents energy_components(const MeanFieldState& state, const MeanFieldState* reference) {
    if (reference == nullptr) {
        throw Error(Errc::missing_reference, "bath energy needs the t = 0 reference state");
    }
    const MeanFieldEnergy now = mean_field_energy(state);
    const MeanFieldEnergy ref = mean_field_energy(*reference);
    return EnergyComponents{now.bath() - ref.bath(), now.impurity(), now.interspecies};
}

EffectivePotential time_averaged_effective_potential(const TimeSeries<RealVector>& bath_densities,
                                                     const MixtureParams& params,
                                                     const Grid1D& grid, double averaging_time) {
    if (!(averaging_time > 0.0)) {
        throw Error(Errc::invalid_argument, "averaging time must be positive");
    }
    const auto& ts = bath_densities.times;
    if (ts.size() < 2 || ts.front() > 1e-9 || ts.back() < averaging_time - 1e-9) {
        throw Error(Errc::series_too_short,
                    "density series must cover [0, " + std::to_string(averaging_time) + "]");
    }
    if (averaging_time < 100.0) {
        std::clog << "warning: time average over T = " << averaging_time
                  << " < 100 may retain oscillation artefacts\n";
    }

    const std::size_t n = grid.n_points();
    RealVector integral(n, 0.0);
    for (std::size_t s = 0; s + 1 < ts.size() && ts[s] < averaging_time; ++s) {
        const double t1 = std::min(ts[s + 1], averaging_time);
        const double w = t1 - ts[s];
        const auto& a = bath_densities.values[s];
        const auto& b = bath_densities.values[s + 1];
        require_same_size(a.size(), n);
        require_same_size(b.size(), n);
        // Linear interpolation inside the last interval if T falls within it.
        const double frac = (t1 - ts[s]) / (ts[s + 1] - ts[s]);
        for (std::size_t j = 0; j < n; ++j) {
            const double end = a[j] + frac * (b[j] - a[j]);
            integral[j] += 0.5 * w * (a[j] + end);
        }
    }

    EffectivePotential v{grid, trap(grid, params.mass_imp, params.omega),
                         PotentialKind::time_averaged_repulsive};
    for (std::size_t j = 0; j < n; ++j) v.values[j] += params.g_bi_post * integral[j] / averaging_time;
    return v;
}

std::pair<EffectivePotential, EffectivePotential> instantaneous_effective_potentials(
    const MeanFieldState& state) {
    const MixtureParams& p = state.params;
    const Grid1D& grid = state.grid();
    const double g = std::abs(p.g_bi_post);
    const RealVector rho_b = one_body_density(state, Species::bath);
    const RealVector rho_i = one_body_density(state, Species::impurity);

    EffectivePotential on_bath{grid, trap(grid, p.mass_bath, p.omega),
                               PotentialKind::instantaneous_bath};
    EffectivePotential on_imp{grid, trap(grid, p.mass_imp, p.omega),
                              PotentialKind::instantaneous_impurity};
    for (std::size_t j = 0; j < grid.n_points(); ++j) {
        on_bath.values[j] -= g * rho_i[j];
        on_imp.values[j] -= g * rho_b[j];
    }
    return {std::move(on_bath), std::move(on_imp)};
}

DecompositionFit density_decomposition_fit(std::span<const double> bath_density,
                                           std::span<const double> initial_bath_density,
                                           std::span<const double> impurity_density,
                                           const Grid1D& grid, std::size_t n_bath) {
    const std::size_t n = grid.n_points();
    require_same_size(bath_density.size(), n);
    require_same_size(initial_bath_density.size(), n);
    require_same_size(impurity_density.size(), n);
    const double imp_norm = integrate(impurity_density, grid);
    if (!(imp_norm > 0.0)) throw Error(Errc::invalid_argument, "impurity density must be non-zero");

    // Residual r(A) = d - A u with d = rho_B(t) - rho_B(0), u = N_B rho_I - rho_B(0).
    const double nb = static_cast<double>(n_bath);
    double du = 0.0, uu = 0.0, dd = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double d = bath_density[j] - initial_bath_density[j];
        const double u = nb * impurity_density[j] / imp_norm - initial_bath_density[j];
        du += d * u;
        uu += u * u;
        dd += d * d;
    }
    double a = uu > 0.0 ? du / uu : 0.0;
    a = std::clamp(a, 0.0, 1.0);
    const double h = grid.spacing();
    const double r2 = std::max(0.0, dd - 2.0 * a * du + a * a * uu);
    return DecompositionFit{a, std::sqrt(r2 * h), std::sqrt(dd * h)};
}

EigenStates effective_potential_eigenstates(const EffectivePotential& potential, double mass,
                                            std::size_t n_states) {
    const Grid1D& grid = potential.grid;
    const auto n = static_cast<Eigen::Index>(grid.n_points());
    if (n_states == 0 || n_states > 20 || static_cast<Eigen::Index>(n_states) > n) {
        throw Error(Errc::invalid_count, "n_states must lie in 1..20");
    }
    if (!(mass > 0.0)) throw Error(Errc::invalid_argument, "mass must be positive");
    if (potential.values.size() != grid.n_points()) {
        throw Error(Errc::size_mismatch, "potential does not match its grid");
    }

    // Sine-DVR kinetic matrix S diag(k^2/2m) S with S the orthonormal DST-I matrix.
    Eigen::MatrixXd s(n, n);
    const double norm = std::sqrt(2.0 / static_cast<double>(n + 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index m = 0; m < n; ++m) {
            s(i, m) = norm * std::sin(std::numbers::pi * static_cast<double>((i + 1) * (m + 1)) /
                                      static_cast<double>(n + 1));
        }
    }
    Eigen::VectorXd kinetic(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        const double k = grid.wavenumber(static_cast<std::size_t>(m));
        kinetic(m) = k * k / (2.0 * mass);
    }
    Eigen::MatrixXd h = s * kinetic.asDiagonal() * s;
    for (Eigen::Index i = 0; i < n; ++i) h(i, i) += potential.values[static_cast<std::size_t>(i)];

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) throw Error(Errc::no_convergence, "eigensolver failed");

    EigenStates out;
    const double scale = 1.0 / std::sqrt(grid.spacing());
    for (std::size_t k = 0; k < n_states; ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        out.energies.push_back(solver.eigenvalues()(col));
        RealVector psi(grid.n_points());
        Eigen::Index imax = 0;
        solver.eigenvectors().col(col).cwiseAbs().maxCoeff(&imax);
        const double sign = solver.eigenvectors()(imax, col) < 0.0 ? -1.0 : 1.0;
        for (Eigen::Index j = 0; j < n; ++j) psi[j] = sign * scale * solver.eigenvectors()(j, col);
        out.wavefunctions.push_back(std::move(psi));
    }
    return out;
}

double dominant_frequency(const TimeSeries<double>& series) {
    const std::size_t n = series.size();
    if (n < 8) throw Error(Errc::series_too_short, "need at least 8 samples for a spectrum");
    const double dt = (series.times.back() - series.times.front()) / static_cast<double>(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(series.times[i] - series.times[i - 1] - dt) > 1e-6 * dt) {
            throw Error(Errc::invalid_argument, "frequency extraction needs uniform sampling");
        }
    }

    double mean = 0.0;
    for (double v : series.values) mean += v;
    mean /= static_cast<double>(n);

    const std::size_t padded = 8 * n;
    std::vector<double> in(padded, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                  static_cast<double>(n - 1));
        in[i] = (series.values[i] - mean) * w;
    }
    std::vector<fftw_complex> out(padded / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(padded), in.data(), out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    std::vector<double> mag(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
    std::size_t peak = 1;
    for (std::size_t k = 1; k < mag.size(); ++k) {
        if (mag[k] > mag[peak]) peak = k;
    }
    double offset = 0.0;
    if (peak + 1 < mag.size()) {
        const double a = mag[peak - 1], b = mag[peak], c = mag[peak + 1];
        const double denom = a - 2.0 * b + c;
        if (denom != 0.0) offset = 0.5 * (a - c) / denom;
    }
    return 2.0 * std::numbers::pi * (static_cast<double>(peak) + offset) /
           (static_cast<double>(padded) * dt);
}

double thomas_fermi_radius(std::span<const double> density, const Grid1D& grid, double fraction) {
    require_same_size(density.size(), grid.n_points());
    const double peak = *std::max_element(density.begin(), density.end());
    double radius = 0.0;
    for (std::size_t j = 0; j < density.size(); ++j) {
        if (density[j] >= fraction * peak) radius = std::max(radius, std::abs(grid.x(j)));
    }
    return radius;
}

}  // namespace polaron

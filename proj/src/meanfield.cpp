#include "polaron/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "polaron/error.hpp"

namespace polaron {

void MixtureParams::validate() const {
    auto fail = [](const std::string& what) { throw Error(Errc::invalid_argument, what); };
    if (n_bath < 1) fail("n_bath must be at least 1");
    if (n_imp != 1) fail("n_imp must be 1");
    if (!(mass_bath > 0.0) || !(mass_imp > 0.0)) fail("masses must be positive");
    if (!(omega > 0.0)) fail("omega must be positive");
    for (double v : {g_bb, g_bi_pre, g_bi_post, x0, u0}) {
        if (!std::isfinite(v)) fail("couplings and quench parameters must be finite");
    }
}

namespace {

RealVector trap_potential(const Grid1D& grid, double mass, double omega) {
    RealVector v(grid.n_points());
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double x = grid.x(j);
        v[j] = 0.5 * mass * omega * omega * x * x;
    }
    return v;
}

double weighted_sum(std::span<const double> weights, std::span<const Complex> phi) {
    double sum = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) sum += weights[j] * std::norm(phi[j]);
    return sum;
}

double quartic_sum(std::span<const Complex> phi) {
    double sum = 0.0;
    for (const auto& v : phi) {
        const double r = std::norm(v);
        sum += r * r;
    }
    return sum;
}

ComplexField thomas_fermi_guess(const MixtureParams& params, const Grid1D& grid) {
    ComplexField phi(grid);
    const double g_eff = params.g_bb * static_cast<double>(params.n_bath - 1);
    const double mw = params.mass_bath * params.omega;
    if (g_eff > 0.0) {
        const double mu = thomas_fermi_mu(params);
        // Inverted parabola plus a Gaussian floor that smooths the edge.
        const double width2 = 1.0 / mw;
        for (std::size_t j = 0; j < grid.n_points(); ++j) {
            const double x = grid.x(j);
            const double tf = std::max(0.0, (mu - 0.5 * mw * params.omega * x * x) / g_eff);
            phi.values[j] = std::sqrt(tf) + 1e-3 * std::exp(-0.5 * x * x / width2);
        }
    } else {
        for (std::size_t j = 0; j < grid.n_points(); ++j) {
            const double x = grid.x(j);
            phi.values[j] = std::exp(-0.5 * mw * x * x);
        }
    }
    phi.normalize();
    return phi;
}

}  // namespace

double thomas_fermi_mu(const MixtureParams& params) {
    const double n = static_cast<double>(params.n_bath);
    return std::pow(3.0 * n * params.g_bb * params.omega * std::sqrt(params.mass_bath) /
                        (4.0 * std::numbers::sqrt2),
                    2.0 / 3.0);
}

double bath_energy_per_particle(const ComplexField& phi, const MixtureParams& params) {
    const Grid1D& grid = phi.grid;
    const SineTransform dst(grid);
    const RealVector trap = trap_potential(grid, params.mass_bath, params.omega);
    const double g_eff = params.g_bb * static_cast<double>(params.n_bath - 1);
    const double kinetic = dst.gradient_norm_squared(phi.values) / (2.0 * params.mass_bath);
    const double potential = weighted_sum(trap, phi.values) * grid.spacing();
    const double interaction = 0.5 * g_eff * quartic_sum(phi.values) * grid.spacing();
    return kinetic + potential + interaction;
}

ComplexField ground_state_bath(const MixtureParams& params, const Grid1D& grid,
                               const GroundStateOptions& options) {
    params.validate();
    if (!(options.tolerance > 0.0)) {
        throw Error(Errc::invalid_argument, "ground-state tolerance must be positive");
    }
    const RealVector trap = trap_potential(grid, params.mass_bath, params.omega);
    const double g_eff = params.g_bb * static_cast<double>(params.n_bath - 1);

    ComplexField phi = thomas_fermi_guess(params, grid);
    std::size_t steps_taken = 0;
    constexpr std::size_t check_every = 20;

    for (double dtau : options.dtau_schedule) {
        const KineticPropagator half(grid, params.mass_bath, Complex{-0.5 * dtau, 0.0});
        double energy = bath_energy_per_particle(phi, params);
        bool converged = false;
        while (!converged) {
            for (std::size_t s = 0; s < check_every; ++s) {
                half.apply(phi.values);
                for (std::size_t j = 0; j < phi.values.size(); ++j) {
                    const double v = trap[j] + g_eff * std::norm(phi.values[j]);
                    phi.values[j] *= std::exp(-dtau * v);
                }
                half.apply(phi.values);
                phi.normalize();
            }
            steps_taken += check_every;
            const double next = bath_energy_per_particle(phi, params);
            const double rate =
                std::abs(next - energy) / (std::abs(next) * dtau * static_cast<double>(check_every));
            energy = next;
            converged = rate < options.tolerance;
            if (!converged && steps_taken >= options.max_steps) {
                throw Error(Errc::no_convergence,
                            "imaginary-time relaxation exceeded " +
                                std::to_string(options.max_steps) + " steps");
            }
        }
    }
    return phi;
}

ComplexField coherent_impurity(const MixtureParams& params, const Grid1D& grid) {
    params.validate();
    if (!grid.contains(params.x0)) {
        throw Error(Errc::invalid_argument, "impurity centre x0 lies outside the grid");
    }
    const double mw = params.mass_imp * params.omega;
    const double prefactor = std::pow(mw / std::numbers::pi, 0.25);
    ComplexField phi(grid);
    for (std::size_t j = 0; j < grid.n_points(); ++j) {
        const double d = grid.x(j) - params.x0;
        phi.values[j] = prefactor * std::exp(Complex{-0.5 * mw * d * d, params.k0() * d});
    }
    phi.normalize();
    return phi;
}

MeanFieldState prepare_initial_state(const MixtureParams& params, const Grid1D& grid,
                                     const GroundStateOptions& options) {
    return MeanFieldState{ground_state_bath(params, grid, options),
                          coherent_impurity(params, grid), params, 0.0};
}

MeanFieldEnergy mean_field_energy(const MeanFieldState& state) {
    const MixtureParams& p = state.params;
    const Grid1D& grid = state.grid();
    const double h = grid.spacing();
    const SineTransform dst(grid);
    const double nb = static_cast<double>(p.n_bath);
    const double ni = static_cast<double>(p.n_imp);

    const RealVector trap_b = trap_potential(grid, p.mass_bath, p.omega);
    const RealVector trap_i = trap_potential(grid, p.mass_imp, p.omega);

    double overlap = 0.0;
    for (std::size_t j = 0; j < grid.n_points(); ++j) {
        overlap += std::norm(state.bath.values[j]) * std::norm(state.imp.values[j]);
    }

    MeanFieldEnergy e;
    e.bath_kinetic = nb * dst.gradient_norm_squared(state.bath.values) / (2.0 * p.mass_bath);
    e.bath_potential = nb * weighted_sum(trap_b, state.bath.values) * h;
    e.bath_interaction = 0.5 * p.g_bb * nb * (nb - 1.0) * quartic_sum(state.bath.values) * h;
    e.imp_kinetic = ni * dst.gradient_norm_squared(state.imp.values) / (2.0 * p.mass_imp);
    e.imp_potential = ni * weighted_sum(trap_i, state.imp.values) * h;
    e.interspecies = p.g_bi_post * nb * ni * overlap * h;
    return e;
}

namespace {

class CoupledSplitStep {
public:
    CoupledSplitStep(const MeanFieldState& state, double dt)
        : dt_(dt),
          params_(state.params),
          half_bath_(state.grid(), params_.mass_bath, Complex{0.0, -0.5 * dt}),
          half_imp_(state.grid(), params_.mass_imp, Complex{0.0, -0.5 * dt}),
          full_bath_(state.grid(), params_.mass_bath, Complex{0.0, -dt}),
          full_imp_(state.grid(), params_.mass_imp, Complex{0.0, -dt}),
          trap_bath_(trap_potential(state.grid(), params_.mass_bath, params_.omega)),
          trap_imp_(trap_potential(state.grid(), params_.mass_imp, params_.omega)) {}

    // Strang steps with adjacent half-kinetic factors fused.
    void advance(MeanFieldState& state, std::size_t n_steps) const {
        if (n_steps == 0) return;
        half_bath_.apply(state.bath.values);
        half_imp_.apply(state.imp.values);
        for (std::size_t s = 0; s < n_steps; ++s) {
            potential_step(state);
            if (s + 1 < n_steps) {
                full_bath_.apply(state.bath.values);
                full_imp_.apply(state.imp.values);
            } else {
                half_bath_.apply(state.bath.values);
                half_imp_.apply(state.imp.values);
            }
        }
    }

private:
    void potential_step(MeanFieldState& state) const {
        const double nb = static_cast<double>(params_.n_bath);
        const double ni = static_cast<double>(params_.n_imp);
        const double g_self = params_.g_bb * (nb - 1.0);
        const double g_on_bath = params_.g_bi_post * ni;
        const double g_on_imp = params_.g_bi_post * nb;
        auto& b = state.bath.values;
        auto& im = state.imp.values;
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double rb = std::norm(b[j]);
            const double ri = std::norm(im[j]);
            const double vb = trap_bath_[j] + g_self * rb + g_on_bath * ri;
            const double vi = trap_imp_[j] + g_on_imp * rb;
            b[j] *= std::polar(1.0, -dt_ * vb);
            im[j] *= std::polar(1.0, -dt_ * vi);
        }
    }

    double dt_;
    MixtureParams params_;
    KineticPropagator half_bath_, half_imp_, full_bath_, full_imp_;
    RealVector trap_bath_, trap_imp_;
};

void check_norms(const MeanFieldState& state, double reference_bath, double reference_imp) {
    const double nb = state.bath.norm_squared();
    const double ni = state.imp.norm_squared();
    if (!std::isfinite(nb) || !std::isfinite(ni) || std::abs(nb - reference_bath) > 1e-6 ||
        std::abs(ni - reference_imp) > 1e-6) {
        throw Error(Errc::step_instability,
                    "norm drift exceeded 1e-6 at t = " + std::to_string(state.time) +
                        "; reduce dt");
    }
}

}  // namespace

void propagate(const MeanFieldState& initial, const PropagationOptions& options,
               const SnapshotObserver& observer) {
    initial.params.validate();
    if (!(options.dt > 0.0) || !(options.t_final >= 0.0) || options.sample_every == 0) {
        throw Error(Errc::invalid_argument, "propagation requires dt > 0, t_final >= 0, stride > 0");
    }
    for (const ComplexField* f : {&initial.bath, &initial.imp}) {
        if (std::abs(f->norm_squared() - 1.0) > 1e-8) {
            throw Error(Errc::invalid_argument, "initial orbitals must be unit-normalized");
        }
    }

    const auto total_steps = static_cast<std::size_t>(std::llround(options.t_final / options.dt));
    const CoupledSplitStep stepper(initial, options.dt);
    MeanFieldState state = initial;
    const double t0 = initial.time;
    const double norm_b = state.bath.norm_squared();
    const double norm_i = state.imp.norm_squared();

    if (observer) observer(state);
    std::size_t done = 0;
    while (done < total_steps) {
        const std::size_t chunk = std::min(options.sample_every, total_steps - done);
        stepper.advance(state, chunk);
        done += chunk;
        state.time = t0 + static_cast<double>(done) * options.dt;
        check_norms(state, norm_b, norm_i);
        if (observer) observer(state);
    }
}

std::vector<MeanFieldState> propagate(const MeanFieldState& initial,
                                      const PropagationOptions& options) {
    std::vector<MeanFieldState> snapshots;
    propagate(initial, options, [&](const MeanFieldState& s) { snapshots.push_back(s); });
    return snapshots;
}

}  // namespace polaron

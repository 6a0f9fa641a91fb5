#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "polaron/observables.hpp"

namespace polaron {

/// Damped oscillator x'' + (gamma/m) x' + omega^2 x = 0 with P = m x'.
struct DampedModel {
    double m_eff = 1.0;
    double omega_eff = 0.1;
    double gamma_eff = 0.0;
    double x0 = 0.0;
    double p0 = 0.0;

    double decay_rate() const noexcept { return gamma_eff / (2.0 * m_eff); }
    /// omega_0^2 = omega_eff^2 - (gamma/2m)^2; positive when underdamped.
    double omega0_squared() const noexcept {
        return omega_eff * omega_eff - decay_rate() * decay_rate();
    }
};

struct PhasePoint {
    double x = 0.0;
    double p = 0.0;
};

/// Closed-form underdamped position and momentum at time t.
/// Throws Error(overdamped_parameters) when omega0^2 <= 0.
PhasePoint damped_trajectory(const DampedModel& model, double t);

enum class FitStatus { converged, not_converged, overdamped, not_applicable };

const char* to_string(FitStatus status) noexcept;

struct FitResult {
    DampedModel model;
    double residual_rms = 0.0;
    /// One-sigma uncertainties of (m_eff, omega_eff, gamma_eff).
    std::array<double, 3> uncertainties{};
    FitStatus status = FitStatus::not_converged;
    /// Best objective value over the multi-start lattice, per start point.
    std::vector<double> start_objectives;
    double objective = 0.0;
};

struct FitOptions {
    std::vector<double> mass_factors{0.8, 1.0, 1.3, 2.0};
    std::vector<double> omega_factors{0.5, 1.0, 1.5};
    std::vector<double> gammas{0.0, 0.02, 0.1};
    std::size_t max_iterations = 300;
};

/// Joint least-squares fit of (m_eff, omega_eff, gamma_eff) to <X_I(t)> and
/// <P_I(t)>, residuals scaled by each series' peak magnitude. x0 and p0 stay
/// fixed; m_imp and omega_trap set the multi-start lattice.
FitResult fit_effective_parameters(const TimeSeries<double>& x_series,
                                   const TimeSeries<double>& p_series, double x0, double p0,
                                   double m_imp, double omega_trap,
                                   const FitOptions& options = {});

/// The damped-quasiparticle description holds for -2.5 < g_BI < 0.95.
bool fit_applicable(double g_bi) noexcept;

/// As fit_effective_parameters, but returns status not_applicable outside
/// the window instead of fitting.
FitResult fit_quench_trajectory(const TimeSeries<double>& x_series,
                                const TimeSeries<double>& p_series, const MixtureParams& params,
                                const FitOptions& options = {});

struct BecScales {
    double healing_length = 0.0;
    double sound_speed = 0.0;
};

/// xi = (2 m_B g_BB n0)^(-1/2), u_c = sqrt(g_BB n0 / m_B).
BecScales bec_scales(double n0, double g_bb, double mass_bath);

struct FrohlichParams {
    double n0 = 1.0;
    double g_bb = 1.0;
    double g_bi = 0.0;
    double mass_bath = 1.0;
    double mass_imp = 1.0;
    /// Quadrature cutoff; 0 selects one whose k^-4 tail is below 1e-8 relative.
    double k_max = 0.0;
};

struct FrohlichResult {
    double m_eff = 0.0;
    double a_integral = 0.0;
    double k_max = 0.0;
    /// Analytic bound on the neglected [k_max, inf) contribution, relative to A.
    double relative_tail = 0.0;
};

/// Second-order Froehlich effective mass m_I + 4 g_BI^2 A.
FrohlichResult frohlich_mass(const FrohlichParams& params);

}  // namespace polaron

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "polaron/error.hpp"
#include "polaron/fewbody.hpp"
#include "polaron/grid.hpp"
#include "polaron/meanfield.hpp"
#include "polaron/mixture.hpp"

namespace polaron {

/// Values sampled at strictly increasing times.
template <class T>
struct TimeSeries {
    std::vector<double> times;
    std::vector<T> values;

    void push_back(double t, T value) {
        if (!times.empty() && !(t > times.back())) {
            throw Error(Errc::invalid_argument, "time series requires strictly increasing times");
        }
        times.push_back(t);
        values.push_back(std::move(value));
    }
    std::size_t size() const noexcept { return times.size(); }
    bool empty() const noexcept { return times.empty(); }
};

/// rho^(1)(x) on the grid; integrates to the species' particle number.
RealVector one_body_density(const MeanFieldState& state, Species species);
RealVector one_body_density(const CorrelatedState& state, Species species);

double mean_position(const MeanFieldState& state, Species species = Species::impurity);
double mean_momentum(const MeanFieldState& state, Species species = Species::impurity);
/// Per-particle expectation values from the mode-basis one-body matrix.
double mean_position(const CorrelatedState& state, Species species = Species::impurity);
double mean_momentum(const CorrelatedState& state, Species species = Species::impurity);

struct EnergyComponents {
    double bath = 0.0;  ///< relative to the reference (t = 0) bath energy
    double impurity = 0.0;
    double interspecies = 0.0;
};

/// Throws Error(missing_reference) when reference is null.
EnergyComponents energy_components(const MeanFieldState& state, const MeanFieldState* reference);

enum class PotentialKind { time_averaged_repulsive, instantaneous_bath, instantaneous_impurity };

struct EffectivePotential {
    Grid1D grid;
    RealVector values;
    PotentialKind kind;
};

/// Bare impurity trap plus g_BI times the trapezoidal time average of the bath
/// density over [0, T].
EffectivePotential time_averaged_effective_potential(const TimeSeries<RealVector>& bath_densities,
                                                     const MixtureParams& params,
                                                     const Grid1D& grid, double averaging_time);

/// (bath, impurity) potentials: trap minus |g_BI| times the other species' density.
std::pair<EffectivePotential, EffectivePotential> instantaneous_effective_potentials(
    const MeanFieldState& state);

struct DecompositionFit {
    double a = 0.0;  ///< clipped to [0, 1]
    double residual_norm = 0.0;
    double residual_norm_at_zero = 0.0;
};

/// Least-squares A in rho_B(t) ~ (1 - A) rho_B(0) + A N_B rho_I(t) / int rho_I.
DecompositionFit density_decomposition_fit(std::span<const double> bath_density,
                                           std::span<const double> initial_bath_density,
                                           std::span<const double> impurity_density,
                                           const Grid1D& grid, std::size_t n_bath);

struct EigenStates {
    RealVector energies;
    std::vector<RealVector> wavefunctions;  ///< unit-normalized under integrate
};

/// Lowest eigenpairs of -(1/2m) d^2/dx^2 + V(x) in the sine DVR.
EigenStates effective_potential_eigenstates(const EffectivePotential& potential, double mass,
                                            std::size_t n_states);

/// Angular frequency of the largest spectral peak: mean removed, Hann window,
/// 8x zero padding, quadratic interpolation around the peak bin.
double dominant_frequency(const TimeSeries<double>& series);

/// Outermost |x| where the density reaches the given fraction of its peak.
double thomas_fermi_radius(std::span<const double> density, const Grid1D& grid,
                           double fraction = 0.01);

}  // namespace polaron

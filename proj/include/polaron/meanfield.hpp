#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "polaron/grid.hpp"
#include "polaron/mixture.hpp"

namespace polaron {

/// Product-state mean-field ansatz: one unit-normalized orbital per species.
struct MeanFieldState {
    ComplexField bath;
    ComplexField imp;
    MixtureParams params;
    double time = 0.0;

    const Grid1D& grid() const noexcept { return bath.grid; }
};

struct GroundStateOptions {
    /// Relative energy change per unit imaginary time at which a stage stops.
    double tolerance = 1e-10;
    std::size_t max_steps = 1'000'000;
    /// Imaginary-time steps, coarse to fine; each stage restarts from the last.
    std::vector<double> dtau_schedule{0.05, 0.01, 0.002};
};

/// Gross-Pitaevskii energy per bath particle of a unit-normalized orbital,
/// with self-interaction weighted by (N_B - 1).
double bath_energy_per_particle(const ComplexField& phi, const MixtureParams& params);

/// Analytic Thomas-Fermi chemical potential for N_B bosons.
double thomas_fermi_mu(const MixtureParams& params);

/// Imaginary-time split-step relaxation of the bath orbital with g_BI = 0.
ComplexField ground_state_bath(const MixtureParams& params, const Grid1D& grid,
                               const GroundStateOptions& options = {});

/// Coherent state of the trap centred at x0 carrying wavenumber k0,
/// renormalized on the discrete grid.
ComplexField coherent_impurity(const MixtureParams& params, const Grid1D& grid);

/// Bath ground state times coherent impurity, at t = 0.
MeanFieldState prepare_initial_state(const MixtureParams& params, const Grid1D& grid,
                                     const GroundStateOptions& options = {});

/// Mean-field energy pieces under the post-quench coupling.
struct MeanFieldEnergy {
    double bath_kinetic = 0.0;
    double bath_potential = 0.0;
    double bath_interaction = 0.0;
    double imp_kinetic = 0.0;
    double imp_potential = 0.0;
    double interspecies = 0.0;

    double bath() const noexcept { return bath_kinetic + bath_potential + bath_interaction; }
    double impurity() const noexcept { return imp_kinetic + imp_potential; }
    double total() const noexcept { return bath() + impurity() + interspecies; }
};

MeanFieldEnergy mean_field_energy(const MeanFieldState& state);

struct PropagationOptions {
    double dt = 1e-3;
    double t_final = 150.0;
    std::size_t sample_every = 100;
};

using SnapshotObserver = std::function<void(const MeanFieldState&)>;

/// Real-time Strang-split evolution of the coupled orbitals under g_bi_post.
/// The observer sees t = 0, every sample_every steps, and the final state.
void propagate(const MeanFieldState& initial, const PropagationOptions& options,
               const SnapshotObserver& observer);

std::vector<MeanFieldState> propagate(const MeanFieldState& initial,
                                      const PropagationOptions& options);

}  // namespace polaron

#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "polaron/bundle.hpp"
#include "polaron/config.hpp"
#include "polaron/fewbody.hpp"
#include "polaron/meanfield.hpp"
#include "polaron/observables.hpp"

namespace polaron {

struct MeanFieldRun {
    MeanFieldState initial;
    TimeSeries<double> x_imp, p_imp, x_bath;
    TimeSeries<EnergyComponents> energies;
    TimeSeries<double> total_energy, norm_bath, norm_imp;
    TimeSeries<RealVector> bath_densities;
    /// Density decomposition weight A per sample.
    TimeSeries<double> decomposition_a;
    /// t = 0, the first sample at or after each imaging time, and the final state.
    std::vector<MeanFieldState> snapshots;
};

MeanFieldRun run_mean_field(const ExperimentConfig& config);

struct CIRun {
    std::shared_ptr<const CIHamiltonian> hamiltonian;
    TimeSeries<double> x_imp, p_imp, x_bath, entropy, energy, norm;
    TimeSeries<RealVector> schmidt;
    std::vector<CorrelatedState> snapshots;
};

CIRun run_ci(const ExperimentConfig& config);

/// |a_C - a_C'| / |a_C| per time, where C is the reference. Entries whose
/// reference magnitude falls below epsilon hold the absolute deviation and
/// are flagged.
struct DeviationSeries {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<bool> flagged;

    double max() const;
};

/// Throws Error(mismatched_time_grids) unless both series share their times.
DeviationSeries relative_deviation(const TimeSeries<double>& reference,
                                   const TimeSeries<double>& other, double epsilon = 1e-3);

struct ConvergencePair {
    std::size_t reference_d_imp = 0;
    std::size_t other_d_imp = 0;
    DeviationSeries position;
    DeviationSeries entropy;
};

struct ConvergenceReport {
    /// Consecutive ladder entries, the larger basis as reference.
    std::vector<ConvergencePair> pairs;
};

ConvergenceReport convergence_study(const std::vector<CIRun>& runs,
                                    const std::vector<std::size_t>& d_imp_ladder);

/// CI runs over config.converge_d_imp, one worker per basis size.
ConvergenceReport run_convergence_study(const ExperimentConfig& config, std::size_t threads,
                                        std::vector<CIRun>* runs = nullptr);

/// Verbs. Each writes its files into the bundle and refreshes the manifest.
void prepare_bundle(const ExperimentConfig& config, const Bundle& bundle);
void run_bundle(const ExperimentConfig& config, const Bundle& bundle, std::size_t threads);
void image_bundle(const ExperimentConfig& config, const Bundle& bundle, std::size_t threads);
void fit_bundle(const ExperimentConfig& config, const Bundle& bundle);
void converge_bundle(const ExperimentConfig& config, const Bundle& bundle, std::size_t threads);
void frohlich_bundle(const ExperimentConfig& config, const Bundle& bundle, std::size_t threads = 1);

}  // namespace polaron

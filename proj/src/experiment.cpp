#include "polaron/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "polaron/quasiparticle.hpp"
#include "polaron/singleshot.hpp"

namespace polaron {

namespace {

using nlohmann::ordered_json;

constexpr const char* length_unit = " [l_perp]";
constexpr const char* time_unit = " [1/omega_perp]";
constexpr const char* energy_unit = " [hbar omega_perp]";
constexpr const char* momentum_unit = " [hbar/l_perp]";
constexpr const char* density_unit = " [1/l_perp]";

void warn_pre_quench(const MixtureParams& params) {
    if (params.g_bi_pre != 0.0) {
        std::clog << "warning: g_bi_pre = " << params.g_bi_pre
                  << " is ignored; the initial state is the uncoupled product state\n";
    }
}

// First sampled time at or after each imaging time, plus the final time.
bool is_capture_time(double t, double previous, const ExperimentConfig& config, bool final_step) {
    if (final_step || t == 0.0) return true;
    for (double t_im : config.imaging.times) {
        if (t_im > previous + 1e-12 && t_im <= t + 1e-12) return true;
    }
    return false;
}

std::string time_tag(double t) { return format_double(t); }

std::string snapshot_name(double t) { return "snapshots/state_t" + time_tag(t) + ".bin"; }

}  // namespace

MeanFieldRun run_mean_field(const ExperimentConfig& config) {
    config.validate();
    warn_pre_quench(config.mixture);
    const Grid1D grid = config.grid.build();
    MeanFieldState initial = prepare_initial_state(config.mixture, grid);
    MeanFieldRun run{initial, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
    const RealVector rho_b0 = one_body_density(initial, Species::bath);

    const auto steps = static_cast<std::size_t>(std::llround(config.t_final / config.dt));
    const double t_end = static_cast<double>(steps) * config.dt;
    double previous = -1.0;
    auto observer = [&](const MeanFieldState& s) {
        run.x_imp.push_back(s.time, mean_position(s, Species::impurity));
        run.p_imp.push_back(s.time, mean_momentum(s, Species::impurity));
        run.x_bath.push_back(s.time, mean_position(s, Species::bath));
        run.energies.push_back(s.time, energy_components(s, &run.initial));
        run.total_energy.push_back(s.time, mean_field_energy(s).total());
        run.norm_bath.push_back(s.time, s.bath.norm_squared());
        run.norm_imp.push_back(s.time, s.imp.norm_squared());
        RealVector rho_b = one_body_density(s, Species::bath);
        run.decomposition_a.push_back(
            s.time, density_decomposition_fit(rho_b, rho_b0, one_body_density(s, Species::impurity),
                                              grid, config.mixture.n_bath)
                        .a);
        run.bath_densities.push_back(s.time, std::move(rho_b));
        const bool final_step = std::abs(s.time - t_end) < 0.5 * config.dt;
        if (is_capture_time(s.time, previous, config, final_step)) run.snapshots.push_back(s);
        previous = s.time;
    };
    PropagationOptions opts{config.dt, config.t_final, config.snapshot_stride};
    propagate(initial, opts, observer);
    return run;
}

CIRun run_ci(const ExperimentConfig& config) {
    config.validate();
    if (config.solver != SolverKind::ci) {
        throw ConfigError(Errc::constraint_violation, "solver", "run_ci needs solver = ci");
    }
    warn_pre_quench(config.mixture);
    const Grid1D grid = config.grid.build();
    auto space = std::make_shared<const CISpace>(
        config.mixture, harmonic_mode_basis(config.mixture, grid, config.d_bath, config.d_imp));
    auto hamiltonian =
        std::make_shared<const CIHamiltonian>(build_hamiltonian(space, config.mixture.g_bi_post));
    const CorrelatedState initial = quench_initial_state(space);
    const auto states =
        evolve(initial, *hamiltonian, CIEvolutionOptions{config.ci_dt, config.t_final,
                                                         config.ci_snapshot_stride});
    CIRun run;
    run.hamiltonian = hamiltonian;
    double previous = -1.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto& s = states[i];
        run.x_imp.push_back(s.time, mean_position(s, Species::impurity));
        run.p_imp.push_back(s.time, mean_momentum(s, Species::impurity));
        run.x_bath.push_back(s.time, mean_position(s, Species::bath));
        SchmidtSpectrum spectrum = schmidt_spectrum(s);
        run.entropy.push_back(s.time, vn_entropy(spectrum));
        run.schmidt.push_back(s.time, std::move(spectrum.lambdas));
        run.energy.push_back(s.time, energy_expectation(*hamiltonian, s));
        run.norm.push_back(s.time, s.norm_squared());
        if (is_capture_time(s.time, previous, config, i + 1 == states.size())) {
            run.snapshots.push_back(s);
        }
        previous = s.time;
    }
    return run;
}

double DeviationSeries::max() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
}

DeviationSeries relative_deviation(const TimeSeries<double>& reference,
                                   const TimeSeries<double>& other, double epsilon) {
    if (reference.times.size() != other.times.size()) {
        throw Error(Errc::mismatched_time_grids, "deviation series have different lengths");
    }
    DeviationSeries out;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (std::abs(reference.times[i] - other.times[i]) > 1e-9) {
            throw Error(Errc::mismatched_time_grids, "deviation series sample different times");
        }
        const double diff = std::abs(reference.values[i] - other.values[i]);
        const double denom = std::abs(reference.values[i]);
        const bool guarded = denom < epsilon;
        out.times.push_back(reference.times[i]);
        out.values.push_back(guarded ? diff : diff / denom);
        out.flagged.push_back(guarded);
    }
    return out;
}

ConvergenceReport convergence_study(const std::vector<CIRun>& runs,
                                    const std::vector<std::size_t>& d_imp_ladder) {
    if (runs.size() != d_imp_ladder.size()) {
        throw Error(Errc::size_mismatch, "one run per ladder entry is required");
    }
    ConvergenceReport report;
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
        const CIRun& ref = runs[i + 1];
        const CIRun& other = runs[i];
        report.pairs.push_back(ConvergencePair{d_imp_ladder[i + 1], d_imp_ladder[i],
                                               relative_deviation(ref.x_imp, other.x_imp),
                                               relative_deviation(ref.entropy, other.entropy)});
    }
    return report;
}

ConvergenceReport run_convergence_study(const ExperimentConfig& config, std::size_t threads,
                                        std::vector<CIRun>* runs_out) {
    ExperimentConfig base = config;
    base.solver = SolverKind::ci;
    base.validate();
    const auto& ladder = base.converge_d_imp;
    std::vector<CIRun> runs(ladder.size());
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&](std::size_t i) {
        try {
            ExperimentConfig c = base;
            c.d_imp = ladder[i];
            runs[i] = run_ci(c);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, ladder.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < ladder.size(); i += workers) work(i);
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    ConvergenceReport report = convergence_study(runs, ladder);
    if (runs_out != nullptr) *runs_out = std::move(runs);
    return report;
}

namespace {

void write_density_table(const Bundle& bundle, const std::string& name,
                         const std::vector<MeanFieldState>& states) {
    const Grid1D& grid = states.front().grid();
    CsvTable table;
    table.columns.push_back(std::string("x") + length_unit);
    std::vector<RealVector> cols;
    for (const auto& s : states) {
        table.columns.push_back("rho_B@t=" + time_tag(s.time) + density_unit);
        table.columns.push_back("rho_I@t=" + time_tag(s.time) + density_unit);
        cols.push_back(one_body_density(s, Species::bath));
        cols.push_back(one_body_density(s, Species::impurity));
    }
    for (std::size_t j = 0; j < grid.n_points(); ++j) {
        std::vector<double> row{grid.x(j)};
        for (const auto& c : cols) row.push_back(c[j]);
        table.add_row(std::move(row));
    }
    bundle.write_text(name, to_csv(table));
}

void write_density_table(const Bundle& bundle, const std::string& name,
                         const std::vector<CorrelatedState>& states) {
    const Grid1D& grid = states.front().space->grid();
    CsvTable table;
    table.columns.push_back(std::string("x") + length_unit);
    std::vector<RealVector> cols;
    for (const auto& s : states) {
        table.columns.push_back("rho_B@t=" + time_tag(s.time) + density_unit);
        table.columns.push_back("rho_I@t=" + time_tag(s.time) + density_unit);
        cols.push_back(one_body_density(s, Species::bath));
        cols.push_back(one_body_density(s, Species::impurity));
    }
    for (std::size_t j = 0; j < grid.n_points(); ++j) {
        std::vector<double> row{grid.x(j)};
        for (const auto& c : cols) row.push_back(c[j]);
        table.add_row(std::move(row));
    }
    bundle.write_text(name, to_csv(table));
}

void write_config_echo(const ExperimentConfig& config, const Bundle& bundle) {
    bundle.write_text("config.txt", serialize_config(config));
}

ordered_json ground_state_summary(const ExperimentConfig& config, const MeanFieldState& state) {
    const RealVector rho = one_body_density(state, Species::bath);
    const double peak = *std::max_element(rho.begin(), rho.end());
    const BecScales scales = bec_scales(peak, config.mixture.g_bb, config.mixture.mass_bath);
    const double mu_tf = thomas_fermi_mu(config.mixture);
    ordered_json j;
    j["peak_density"] = peak;
    j["thomas_fermi_peak_density"] = mu_tf / config.mixture.g_bb;
    j["thomas_fermi_radius"] = thomas_fermi_radius(rho, state.grid());
    j["thomas_fermi_mu"] = mu_tf;
    j["sound_speed"] = scales.sound_speed;
    j["healing_length"] = scales.healing_length;
    j["bath_energy_per_particle"] = bath_energy_per_particle(state.bath, config.mixture);
    return j;
}

CsvTable fit_input(const Bundle& bundle) {
    return parse_csv(bundle.read_text("observables.csv"));
}

ordered_json fit_to_json(const FitResult& fit) {
    ordered_json j;
    j["status"] = to_string(fit.status);
    if (fit.status == FitStatus::not_applicable) return j;
    j["m_eff"] = fit.model.m_eff;
    j["omega_eff"] = fit.model.omega_eff;
    j["gamma_eff"] = fit.model.gamma_eff;
    j["sigma_m_eff"] = fit.uncertainties[0];
    j["sigma_omega_eff"] = fit.uncertainties[1];
    j["sigma_gamma_eff"] = fit.uncertainties[2];
    j["x0"] = fit.model.x0;
    j["p0"] = fit.model.p0;
    j["residual_rms"] = fit.residual_rms;
    j["objective"] = fit.objective;
    return j;
}

void write_fit(const ExperimentConfig& config, const Bundle& bundle) {
    const CsvTable table = fit_input(bundle);
    TimeSeries<double> xs, ps;
    const auto t = table.values("t");
    const auto x = table.values("X_I");
    const auto p = table.values("P_I");
    for (std::size_t i = 0; i < t.size(); ++i) {
        xs.push_back(t[i], x[i]);
        ps.push_back(t[i], p[i]);
    }
    const FitResult fit = fit_quench_trajectory(xs, ps, config.mixture);
    bundle.write_text("fit.json", fit_to_json(fit).dump(2) + "\n");
}

void write_shot_csv(const Bundle& bundle, const std::string& name, const ShotImage& image) {
    CsvTable table;
    table.columns = {std::string("x") + length_unit, std::string("intensity") + density_unit};
    for (std::size_t j = 0; j < image.grid.n_points(); ++j) {
        table.add_row({image.grid.x(j), image.intensity[j]});
    }
    bundle.write_text(name, to_csv(table));
}

void write_relative_csv(const Bundle& bundle, const std::string& name, const ShotImage& image) {
    CsvTable table;
    table.columns = {std::string("x_r") + length_unit, std::string("intensity") + density_unit};
    for (std::size_t j = 0; j < image.grid.n_points(); ++j) {
        table.add_row({image.grid.x(j), image.intensity[j]});
    }
    bundle.write_text(name, to_csv(table));
}

std::uint64_t imaging_seed(std::uint64_t seed, std::size_t time_index) {
    return seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(time_index);
}

void write_shots(const ExperimentConfig& config, const Bundle& bundle,
                 const std::vector<std::pair<double, std::vector<Shot>>>& batches) {
    ordered_json meta;
    meta["n_shots"] = config.imaging.n_shots;
    meta["psf_width"] = config.imaging.psf_width;
    ordered_json entries = ordered_json::array();
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto& [t, shots] = batches[b];
        const std::string dir = "shots/t" + time_tag(t) + "/";
        for (std::size_t k = 0; k < shots.size(); ++k) {
            write_shot_csv(bundle, dir + "bath_" + std::to_string(k) + ".csv", shots[k].bath);
            write_shot_csv(bundle, dir + "impurity_" + std::to_string(k) + ".csv", shots[k].impurity);
        }
        const auto baths = bath_images(shots);
        write_shot_csv(bundle, dir + "average_bath.csv", average_images(baths));
        write_shot_csv(bundle, dir + "average_impurity.csv", average_images(impurity_images(shots)));
        write_relative_csv(bundle, dir + "comoving_bath.csv",
                           comoving_average(baths, impurity_centroids(shots)));
        entries.push_back({{"t_im", t}, {"seed", imaging_seed(config.seed, b)}});
    }
    meta["images"] = entries;
    bundle.write_text("shots/shots.json", meta.dump(2) + "\n");
}

std::vector<std::string> stored_snapshots(const Bundle& bundle) {
    std::vector<std::string> out;
    for (const auto& f : bundle.files()) {
        if (f.rfind("snapshots/", 0) == 0 && f.size() > 4 && f.substr(f.size() - 4) == ".bin") {
            out.push_back(f);
        }
    }
    return out;
}

// Final state when no times are given, else the first state at or after each t_im.
std::vector<std::size_t> imaging_indices(const ExperimentConfig& config,
                                         const std::vector<double>& times) {
    std::vector<std::size_t> out;
    if (config.imaging.times.empty()) {
        out.push_back(times.size() - 1);
        return out;
    }
    for (double t_im : config.imaging.times) {
        const auto it = std::find_if(times.begin(), times.end(),
                                     [&](double t) { return t >= t_im - 1e-12; });
        if (it != times.end()) out.push_back(static_cast<std::size_t>(it - times.begin()));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

template <class State>
void image_states(const ExperimentConfig& config, const Bundle& bundle,
                  const std::vector<State>& states, std::size_t threads) {
    const auto psf = PointSpreadFunction::make(config.imaging.psf_width);
    std::vector<double> times;
    for (const auto& s : states) times.push_back(s.time);
    std::vector<std::pair<double, std::vector<Shot>>> batches;
    for (std::size_t i : imaging_indices(config, times)) {
        batches.emplace_back(times[i],
                             sample_shots(states[i], psf, imaging_seed(config.seed, batches.size()),
                                          config.imaging.n_shots, threads));
    }
    write_shots(config, bundle, batches);
}

std::shared_ptr<const CISpace> ci_space(const ExperimentConfig& config) {
    const Grid1D grid = config.grid.build();
    return std::make_shared<const CISpace>(
        config.mixture, harmonic_mode_basis(config.mixture, grid, config.d_bath, config.d_imp));
}

void write_mean_field_outputs(const ExperimentConfig& config, const Bundle& bundle,
                              const MeanFieldRun& run) {
    CsvTable obs;
    obs.columns = {std::string("t") + time_unit,      std::string("X_I") + length_unit,
                   std::string("P_I") + momentum_unit, std::string("X_B") + length_unit,
                   std::string("E_B") + energy_unit,  std::string("E_I") + energy_unit,
                   std::string("E_BI") + energy_unit, std::string("E_total") + energy_unit,
                   "norm_B [1]",                      "norm_I [1]",
                   "A [1]"};
    for (std::size_t i = 0; i < run.x_imp.size(); ++i) {
        const auto& e = run.energies.values[i];
        obs.add_row({run.x_imp.times[i], run.x_imp.values[i], run.p_imp.values[i],
                     run.x_bath.values[i], e.bath, e.impurity, e.interspecies,
                     run.total_energy.values[i], run.norm_bath.values[i], run.norm_imp.values[i],
                     run.decomposition_a.values[i]});
    }
    bundle.write_text("observables.csv", to_csv(obs));
    for (const auto& s : run.snapshots) bundle.write_bytes(snapshot_name(s.time), encode_snapshot(s));
    write_density_table(bundle, "densities.csv", run.snapshots);

    const Grid1D& grid = run.initial.grid();
    const MeanFieldState& last = run.snapshots.back();
    const double g = config.mixture.g_bi_post;
    CsvTable pot;
    pot.columns = {std::string("x") + length_unit};
    std::vector<RealVector> cols;
    ordered_json eigen = ordered_json::object();
    CsvTable states;
    states.columns = {"potential [kind]", "n [1]", std::string("E_n") + energy_unit,
                      std::string("x") + length_unit, "psi_n [l_perp^-1/2]"};
    auto add_potential = [&](const std::string& label, const EffectivePotential& v, double mass) {
        pot.columns.push_back(label + energy_unit);
        cols.push_back(v.values);
        const EigenStates es = effective_potential_eigenstates(v, mass, 5);
        eigen[label] = es.energies;
        for (std::size_t n = 0; n < es.energies.size(); ++n) {
            for (std::size_t j = 0; j < grid.n_points(); ++j) {
                states.add_row({static_cast<double>(v.kind), static_cast<double>(n), es.energies[n],
                                grid.x(j), es.wavefunctions[n][j]});
            }
        }
    };
    if (g >= 0.0) {
        add_potential("V_I_time_averaged",
                      time_averaged_effective_potential(run.bath_densities, config.mixture, grid,
                                                        last.time),
                      config.mixture.mass_imp);
    } else {
        const auto [vb, vi] = instantaneous_effective_potentials(last);
        add_potential("V_B_instantaneous", vb, config.mixture.mass_bath);
        add_potential("V_I_instantaneous", vi, config.mixture.mass_imp);
    }
    for (std::size_t j = 0; j < grid.n_points(); ++j) {
        std::vector<double> row{grid.x(j)};
        for (const auto& c : cols) row.push_back(c[j]);
        pot.add_row(std::move(row));
    }
    bundle.write_text("effective_potential.csv", to_csv(pot));
    bundle.write_text("effective_eigenstates.csv", to_csv(states));

    ordered_json summary;
    summary["solver"] = to_string(config.solver);
    summary["ground_state"] = ground_state_summary(config, run.initial);
    summary["dominant_frequency"] = dominant_frequency(run.x_imp);
    double drift_b = 0.0, drift_i = 0.0;
    for (double n : run.norm_bath.values) drift_b = std::max(drift_b, std::abs(n - 1.0));
    for (double n : run.norm_imp.values) drift_i = std::max(drift_i, std::abs(n - 1.0));
    summary["max_norm_drift"] = std::max(drift_b, drift_i);
    const double e0 = run.total_energy.values.front();
    double drift_e = 0.0;
    for (double e : run.total_energy.values) drift_e = std::max(drift_e, std::abs(e - e0));
    summary["max_relative_energy_drift"] = drift_e / std::max(std::abs(e0), 1e-300);
    summary["effective_potential_eigenvalues"] = eigen;
    const DecompositionFit dec = density_decomposition_fit(
        one_body_density(last, Species::bath), one_body_density(run.initial, Species::bath),
        one_body_density(last, Species::impurity), grid, config.mixture.n_bath);
    summary["density_decomposition_a"] = dec.a;
    bundle.write_text("summary.json", summary.dump(2) + "\n");
}

void write_ci_outputs(const ExperimentConfig& config, const Bundle& bundle, const CIRun& run) {
    CsvTable obs;
    obs.columns = {std::string("t") + time_unit,      std::string("X_I") + length_unit,
                   std::string("P_I") + momentum_unit, std::string("X_B") + length_unit,
                   "S_VN [1]",                        std::string("E_total") + energy_unit,
                   "norm [1]"};
    for (std::size_t k = 0; k < config.d_imp; ++k) obs.columns.push_back("lambda_" + std::to_string(k + 1) + " [1]");
    for (std::size_t i = 0; i < run.x_imp.size(); ++i) {
        std::vector<double> row{run.x_imp.times[i], run.x_imp.values[i], run.p_imp.values[i],
                                run.x_bath.values[i], run.entropy.values[i], run.energy.values[i],
                                run.norm.values[i]};
        const RealVector& lambdas = run.schmidt.values[i];
        for (std::size_t k = 0; k < config.d_imp; ++k) row.push_back(k < lambdas.size() ? lambdas[k] : 0.0);
        obs.add_row(std::move(row));
    }
    bundle.write_text("observables.csv", to_csv(obs));
    for (const auto& s : run.snapshots) bundle.write_bytes(snapshot_name(s.time), encode_snapshot(s));
    write_density_table(bundle, "densities.csv", run.snapshots);

    ordered_json summary;
    summary["solver"] = to_string(config.solver);
    summary["dimension"] = run.hamiltonian->space->dimension();
    summary["dominant_frequency"] = dominant_frequency(run.x_imp);
    double drift_n = 0.0, drift_e = 0.0;
    const double e0 = run.energy.values.front();
    for (double n : run.norm.values) drift_n = std::max(drift_n, std::abs(n - 1.0));
    for (double e : run.energy.values) drift_e = std::max(drift_e, std::abs(e - e0));
    summary["max_norm_drift"] = drift_n;
    summary["max_energy_drift"] = drift_e;
    summary["max_entropy"] = *std::max_element(run.entropy.values.begin(), run.entropy.values.end());
    summary["schmidt_spectrum_final"] = schmidt_spectrum(run.snapshots.back()).lambdas;
    bundle.write_text("summary.json", summary.dump(2) + "\n");
}

}  // namespace

void prepare_bundle(const ExperimentConfig& config, const Bundle& bundle) {
    config.validate();
    warn_pre_quench(config.mixture);
    write_config_echo(config, bundle);
    const Grid1D grid = config.grid.build();
    if (config.solver == SolverKind::mean_field) {
        const MeanFieldState s = prepare_initial_state(config.mixture, grid);
        bundle.write_bytes(snapshot_name(0.0), encode_snapshot(s));
        write_density_table(bundle, "densities.csv", std::vector<MeanFieldState>{s});
        bundle.write_text("ground_state.json", ground_state_summary(config, s).dump(2) + "\n");
    } else {
        const CorrelatedState s = quench_initial_state(ci_space(config));
        bundle.write_bytes(snapshot_name(0.0), encode_snapshot(s));
        write_density_table(bundle, "densities.csv", std::vector<CorrelatedState>{s});
        ordered_json j;
        j["dimension"] = s.space->dimension();
        j["entropy"] = vn_entropy(schmidt_spectrum(s));
        bundle.write_text("ground_state.json", j.dump(2) + "\n");
    }
    bundle.write_manifest(config, "prepare");
}

void run_bundle(const ExperimentConfig& config, const Bundle& bundle, std::size_t threads) {
    config.validate();
    write_config_echo(config, bundle);
    if (config.solver == SolverKind::mean_field) {
        const MeanFieldRun run = run_mean_field(config);
        write_mean_field_outputs(config, bundle, run);
        if (config.imaging.n_shots > 0) image_states(config, bundle, run.snapshots, threads);
    } else {
        const CIRun run = run_ci(config);
        write_ci_outputs(config, bundle, run);
        if (config.imaging.n_shots > 0) image_states(config, bundle, run.snapshots, threads);
    }
    if (config.fit) write_fit(config, bundle);
    bundle.write_manifest(config, "run");
}

void image_bundle(const ExperimentConfig& config, const Bundle& bundle, std::size_t threads) {
    config.validate();
    if (config.imaging.n_shots == 0) {
        throw ConfigError(Errc::constraint_violation, "n_shots", "imaging needs n_shots > 0");
    }
    const auto names = stored_snapshots(bundle);
    if (names.empty()) throw Error(Errc::io_failure, "bundle holds no snapshots to image");
    std::vector<std::pair<double, std::vector<std::uint8_t>>> raw;
    for (const auto& n : names) {
        auto bytes = bundle.read_bytes(n);
        const double t = decode_snapshot_header(bytes).time;
        raw.emplace_back(t, std::move(bytes));
    }
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (config.solver == SolverKind::mean_field) {
        std::vector<MeanFieldState> states;
        for (const auto& [t, bytes] : raw) states.push_back(decode_mean_field_snapshot(bytes, config.mixture));
        image_states(config, bundle, states, threads);
    } else {
        const auto space = ci_space(config);
        std::vector<CorrelatedState> states;
        for (const auto& [t, bytes] : raw) states.push_back(decode_ci_snapshot(bytes, space));
        image_states(config, bundle, states, threads);
    }
    bundle.write_manifest(config, "image");
}

void fit_bundle(const ExperimentConfig& config, const Bundle& bundle) {
    config.validate();
    write_fit(config, bundle);
    bundle.write_manifest(config, "fit");
}

void converge_bundle(const ExperimentConfig& config, const Bundle& bundle, std::size_t threads) {
    std::vector<CIRun> runs;
    const ConvergenceReport report = run_convergence_study(config, threads, &runs);
    write_config_echo(config, bundle);
    ExperimentConfig ci = config;
    ci.solver = SolverKind::ci;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        ExperimentConfig c = ci;
        c.d_imp = config.converge_d_imp[i];
        CsvTable obs;
        obs.columns = {std::string("t") + time_unit, std::string("X_I") + length_unit, "S_VN [1]"};
        for (std::size_t k = 0; k < runs[i].x_imp.size(); ++k) {
            obs.add_row({runs[i].x_imp.times[k], runs[i].x_imp.values[k], runs[i].entropy.values[k]});
        }
        bundle.write_text("converge/d_imp_" + std::to_string(c.d_imp) + ".csv", to_csv(obs));
    }
    ordered_json summary = ordered_json::array();
    for (const auto& pair : report.pairs) {
        CsvTable dev;
        dev.columns = {std::string("t") + time_unit, "dX_I [1]", "dX_I_absolute [flag]", "dS_VN [1]",
                       "dS_VN_absolute [flag]"};
        for (std::size_t k = 0; k < pair.position.times.size(); ++k) {
            dev.add_row({pair.position.times[k], pair.position.values[k],
                         pair.position.flagged[k] ? 1.0 : 0.0, pair.entropy.values[k],
                         pair.entropy.flagged[k] ? 1.0 : 0.0});
        }
        const std::string name = "converge/deviation_" + std::to_string(pair.other_d_imp) + "_vs_" +
                                 std::to_string(pair.reference_d_imp) + ".csv";
        bundle.write_text(name, to_csv(dev));
        summary.push_back({{"reference_d_imp", pair.reference_d_imp},
                           {"other_d_imp", pair.other_d_imp},
                           {"max_dX_I", pair.position.max()},
                           {"max_dS_VN", pair.entropy.max()}});
    }
    bundle.write_text("converge/summary.json", summary.dump(2) + "\n");
    bundle.write_manifest(ci, "converge");
}

void frohlich_bundle(const ExperimentConfig& config, const Bundle& bundle, std::size_t threads) {
    config.validate();
    write_config_echo(config, bundle);
    double n0 = config.frohlich_n0;
    if (n0 == 0.0) {
        const MeanFieldState s = prepare_initial_state(config.mixture, config.grid.build());
        n0 = interpolate(s.grid(), one_body_density(s, Species::bath), 0.0);
    }

    const auto& couplings = config.frohlich_g_bi;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<FitResult> fits(couplings.size());
    if (config.frohlich_fit) {
        std::exception_ptr failure;
        std::mutex failure_mutex;
        const std::size_t workers = std::max<std::size_t>(1, std::min(threads, couplings.size()));
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < couplings.size(); i += workers) {
                    try {
                        ExperimentConfig c = config;
                        c.solver = SolverKind::mean_field;
                        c.mixture.g_bi_post = couplings[i];
                        if (!fit_applicable(couplings[i])) {
                            fits[i].status = FitStatus::not_applicable;
                            continue;
                        }
                        const MeanFieldRun run = run_mean_field(c);
                        fits[i] = fit_quench_trajectory(run.x_imp, run.p_imp, c.mixture);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    CsvTable table;
    table.columns = {"g_BI [hbar omega_perp l_perp]", "m_eff_fit [m_B]", "omega_eff [omega_perp]",
                     "gamma_eff [m_B omega_perp]",    "residual_rms [1]", "m_eff_frohlich [m_B]",
                     "A [m_B/hbar^2]",                "k_max [1/l_perp]", "relative_tail [1]"};
    for (std::size_t i = 0; i < couplings.size(); ++i) {
        const double g = couplings[i];
        FrohlichParams p{n0, config.mixture.g_bb, g, config.mixture.mass_bath,
                         config.mixture.mass_imp, 0.0};
        const FrohlichResult r = frohlich_mass(p);
        const FitResult& f = fits[i];
        const bool fitted = config.frohlich_fit && f.status != FitStatus::not_applicable;
        table.add_row({g, fitted ? f.model.m_eff : nan, fitted ? f.model.omega_eff : nan,
                       fitted ? f.model.gamma_eff : nan, fitted ? f.residual_rms : nan, r.m_eff,
                       r.a_integral, r.k_max, r.relative_tail});
    }
    bundle.write_text("frohlich.csv", to_csv(table));
    ordered_json meta;
    meta["n0"] = n0;
    meta["n0_source"] = config.frohlich_n0 > 0.0 ? "config" : "trap-centre density";
    ordered_json statuses = ordered_json::array();
    for (const auto& f : fits) statuses.push_back(config.frohlich_fit ? to_string(f.status) : "skipped");
    meta["fit_status"] = statuses;
    bundle.write_text("frohlich.json", meta.dump(2) + "\n");
    bundle.write_manifest(config, "frohlich");
}

}  // namespace polaron

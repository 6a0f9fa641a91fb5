#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "polaron/bundle.hpp"
#include "polaron/config.hpp"
#include "polaron/experiment.hpp"

namespace {

constexpr int exit_config_error = 2;
constexpr int exit_solver_error = 3;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "flat key = value configuration file");
    cmd->add_option("--seed", c.seed, "RNG seed, overrides the config");
    cmd->add_option("--out", c.out, "output bundle directory, overrides output_dir");
    cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

polaron::ExperimentConfig resolve(const Common& c) {
    polaron::ExperimentConfig config =
        c.config_path.empty() ? polaron::parse_config("") : polaron::load_config(c.config_path);
    if (c.seed) config.seed = *c.seed;
    if (!c.out.empty()) config.output_dir = c.out;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1D Bose polaron quench simulator"};
    app.require_subcommand(1);
    Common common;
    auto* prepare = app.add_subcommand("prepare", "ground state and initial impurity only");
    auto* run = app.add_subcommand("run", "full quench protocol");
    auto* image = app.add_subcommand("image", "single-shot images of stored snapshots");
    auto* fit = app.add_subcommand("fit", "effective parameters of a stored trajectory");
    auto* converge = app.add_subcommand("converge", "CI basis convergence study");
    auto* frohlich = app.add_subcommand("frohlich", "Froehlich effective mass over g_bi");
    for (auto* cmd : {prepare, run, image, fit, converge, frohlich}) add_common(cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config_error;
    }

    polaron::ExperimentConfig config;
    try {
        config = resolve(common);
    } catch (const polaron::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config_error;
    }

    try {
        const polaron::Bundle bundle(config.output_dir);
        if (*prepare) polaron::prepare_bundle(config, bundle);
        if (*run) polaron::run_bundle(config, bundle, common.threads);
        if (*image) polaron::image_bundle(config, bundle, common.threads);
        if (*fit) polaron::fit_bundle(config, bundle);
        if (*converge) polaron::converge_bundle(config, bundle, common.threads);
        if (*frohlich) polaron::frohlich_bundle(config, bundle, common.threads);
    } catch (const polaron::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return exit_solver_error;
    }
    std::cout << config.output_dir << "\n";
    return 0;
}

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "polaron/error.hpp"
#include "polaron/experiment.hpp"

using namespace polaron;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("polaron_test_" + name);
    fs::remove_all(p);
    return p;
}

TimeSeries<double> series(std::initializer_list<double> values, double dt = 1.0) {
    TimeSeries<double> s;
    double t = 0.0;
    for (double v : values) {
        s.push_back(t, v);
        t += dt;
    }
    return s;
}

ExperimentConfig small_ci() {
    ExperimentConfig c;
    c.solver = SolverKind::ci;
    c.mixture.n_bath = 2;
    c.mixture.g_bi_post = 1.0;
    c.mixture.u0 = -0.2;
    c.d_bath = 4;
    c.d_imp = 4;
    c.t_final = 5.0;
    c.imaging.n_shots = 8;
    c.imaging.times = {2.5};
    c.fit = false;
    c.seed = 1234;
    return c;
}

ExperimentConfig small_mean_field() {
    ExperimentConfig c;
    c.grid = GridSpec{-40.0, 40.0, 400};
    c.mixture.n_bath = 20;
    c.mixture.u0 = -0.3;
    c.t_final = 20.0;
    c.fit = false;
    return c;
}

}  // namespace

TEST_CASE("relative deviation") {
    const auto a = series({1.0, -2.0, 0.5});
    const DeviationSeries same = relative_deviation(a, a);
    CHECK(same.max() == 0.0);

    const auto ref = series({2.0, 1e-4, -4.0});
    const auto other = series({2.2, 3e-4, -3.0});
    const DeviationSeries d = relative_deviation(ref, other);
    CHECK(d.values[0] == doctest::Approx(0.1));
    CHECK(d.flagged[1]);
    CHECK(d.values[1] == doctest::Approx(2e-4));
    CHECK_FALSE(d.flagged[2]);
    CHECK(d.values[2] == doctest::Approx(0.25));
    CHECK(d.max() == doctest::Approx(0.25));

    try {
        relative_deviation(ref, series({1.0, 2.0, 3.0}, 0.5));
        FAIL("expected mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::mismatched_time_grids);
    }
    CHECK_THROWS_AS(relative_deviation(ref, series({1.0})), Error);
}

TEST_CASE("convergence pairs use the larger basis as reference") {
    std::vector<CIRun> runs(3);
    runs[0].x_imp = series({1.0, 1.2});
    runs[1].x_imp = series({1.0, 1.1});
    runs[2].x_imp = series({1.0, 1.0});
    for (auto& r : runs) r.entropy = series({0.0, 0.5});
    const ConvergenceReport rep = convergence_study(runs, {4, 6, 8});
    REQUIRE(rep.pairs.size() == 2);
    CHECK(rep.pairs[0].reference_d_imp == 6);
    CHECK(rep.pairs[0].other_d_imp == 4);
    CHECK(rep.pairs[0].position.values[1] == doctest::Approx(0.1 / 1.1));
    CHECK(rep.pairs[1].reference_d_imp == 8);
    CHECK(rep.pairs[1].position.values[1] == doctest::Approx(0.1));
    CHECK(rep.pairs[1].entropy.max() == 0.0);
}

TEST_CASE("uncoupled mean-field run oscillates harmonically") {
    const MeanFieldRun run = run_mean_field(small_mean_field());
    REQUIRE(run.x_imp.size() == 201);
    for (std::size_t i = 0; i < run.x_imp.size(); ++i) {
        const double t = run.x_imp.times[i];
        CHECK(run.x_imp.values[i] == doctest::Approx(-3.0 * std::sin(0.1 * t)).epsilon(1e-3));
        CHECK(run.energies.values[i].interspecies == 0.0);
        CHECK(std::abs(run.energies.values[i].bath) < 1e-8);
    }
    CHECK(run.snapshots.front().time == 0.0);
    CHECK(run.snapshots.back().time == doctest::Approx(20.0));
}

TEST_CASE("CI bundles are reproducible byte for byte") {
    const ExperimentConfig c = small_ci();
    const fs::path a = fresh_dir("ci_a"), b = fresh_dir("ci_b");
    const Bundle ba(a), bb(b);
    run_bundle(c, ba, 1);
    run_bundle(c, bb, 3);
    const auto files = ba.files();
    CHECK(files == bb.files());
    CHECK(ba.exists("observables.csv"));
    CHECK(ba.exists("shots/shots.json"));
    for (const auto& f : files) CHECK(ba.read_bytes(f) == bb.read_bytes(f));
    CHECK(ba.read_text("manifest.json") == bb.read_text("manifest.json"));

    const auto manifest = nlohmann::json::parse(ba.read_text("manifest.json"));
    CHECK(manifest["format"] == bundle_format);
    CHECK(manifest["seed"] == 1234);
    REQUIRE(manifest["files"].size() == files.size());
    for (const auto& entry : manifest["files"]) {
        const std::string path = entry["path"];
        const auto bytes = ba.read_bytes(path);
        CHECK(entry["bytes"] == bytes.size());
        CHECK(entry["sha256"] == sha256_hex(bytes));
    }
    const CsvTable obs = parse_csv(ba.read_text("observables.csv"));
    for (double n : obs.values("norm")) CHECK(std::abs(n - 1.0) < 1e-10);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("verbs chain on one bundle") {
    ExperimentConfig c = small_mean_field();
    c.mixture.g_bi_post = 0.5;
    c.t_final = 60.0;
    c.imaging.n_shots = 4;
    const fs::path root = fresh_dir("verbs");
    const Bundle b(root);
    prepare_bundle(c, b);
    CHECK(b.exists("ground_state.json"));
    run_bundle(c, b, 1);
    image_bundle(c, b, 2);
    fit_bundle(c, b);
    CHECK(b.exists("fit.json"));
    CHECK(b.exists("effective_potential.csv"));
    const auto manifest = nlohmann::json::parse(b.read_text("manifest.json"));
    CHECK(manifest["verbs"] == nlohmann::json::array({"prepare", "run", "image", "fit"}));

    const Bundle empty(fresh_dir("empty"));
    CHECK_THROWS_AS(fit_bundle(c, empty), Error);
    fs::remove_all(root);
}

TEST_CASE("Froehlich verb tabulates the coupling ladder") {
    ExperimentConfig c;
    c.frohlich_n0 = 3.04;
    const fs::path root = fresh_dir("frohlich");
    const Bundle b(root);
    frohlich_bundle(c, b);
    const CsvTable t = parse_csv(b.read_text("frohlich.csv"));
    CHECK(t.rows.size() == c.frohlich_g_bi.size());
    CHECK(t.values("m_eff_frohlich").front() == 1.0);
    CHECK(std::isnan(t.values("m_eff_fit").front()));
    fs::remove_all(root);
}

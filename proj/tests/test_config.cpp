#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "polaron/bundle.hpp"
#include "polaron/config.hpp"

using namespace polaron;

namespace {

Errc parse_error(const std::string& text, std::string* key = nullptr) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        if (key) *key = e.key();
        return e.code();
    }
    FAIL("expected a config error for: " << text);
    return Errc::io_failure;
}

}  // namespace

TEST_CASE("defaults describe the reference mixture") {
    const ExperimentConfig c = parse_config("");
    CHECK(c == ExperimentConfig{});
    CHECK(c.mixture.n_bath == 100);
    CHECK(c.mixture.omega == 0.1);
    CHECK(c.grid.n_points == 1000);
    CHECK(c.solver == SolverKind::mean_field);
    CHECK(c.t_final == 150.0);
}

TEST_CASE("parsing and serialization round-trip") {
    const ExperimentConfig c = parse_config(R"(
# attractive quench
g_bi_post = -2   # strong
u0 = -0.87
solver = ci
n_bath = 3
d_imp = 10
imaging_times = 10, 75.5, 150
n_shots = 400
fit = false
seed = 18446744073709551615
frohlich_g_bi = 0, 0.1
)");
    CHECK(c.mixture.g_bi_post == -2.0);
    CHECK(c.mixture.u0 == -0.87);
    CHECK(c.mixture.k0() == -0.87);
    CHECK(c.solver == SolverKind::ci);
    CHECK(c.imaging.times == std::vector<double>{10.0, 75.5, 150.0});
    CHECK_FALSE(c.fit);
    CHECK(c.seed == 18446744073709551615ull);
    const ExperimentConfig back = parse_config(serialize_config(c));
    CHECK(back == c);
    CHECK(config_keys().size() == 31);
    CHECK(parse_config(serialize_config(ExperimentConfig{})) == ExperimentConfig{});
    CHECK(std::stod(format_double(0.1)) == 0.1);
    CHECK(format_double(1e-3) == "0.001");
}

TEST_CASE("config errors name their key") {
    std::string key;
    CHECK(parse_error("omega_trap = 1\n", &key) == Errc::unknown_key);
    CHECK(key == "omega_trap");
    CHECK(parse_error("omega = fast\n", &key) == Errc::invalid_value);
    CHECK(key == "omega");
    CHECK(parse_error("omega = 0.1\nomega = 0.2\n", &key) == Errc::invalid_value);
    CHECK(parse_error("n_bath 10\n") == Errc::invalid_value);
    CHECK(parse_error("solver = ci\nn_bath = 100\n", &key) == Errc::constraint_violation);
    CHECK(key == "n_bath");
    CHECK(parse_error("n_imp = 2\n", &key) == Errc::constraint_violation);
    CHECK(key == "n_imp");
    CHECK(parse_error("x0 = 90\n", &key) == Errc::constraint_violation);
    CHECK(key == "x0");
    CHECK(parse_error("imaging_times = 200\n", &key) == Errc::constraint_violation);
    CHECK(key == "imaging_times");
    CHECK(parse_error("dt = -1\n", &key) == Errc::constraint_violation);
    CHECK(key == "dt");
    CHECK(parse_error("solver = exact\n", &key) == Errc::invalid_value);
    CHECK(parse_error("n_bath = -3\n") == Errc::invalid_value);
    CHECK_THROWS_AS(load_config("/nonexistent/polaron.cfg"), Error);
}

TEST_CASE("csv tables") {
    CsvTable t{{"t [1/omega_perp]", "x_imp [l_perp]"}, {}};
    t.add_row({0.0, 1.5});
    t.add_row({0.1, -2.25e-7});
    CHECK_THROWS_AS(t.add_row({1.0}), Error);
    const CsvTable back = parse_csv(to_csv(t));
    CHECK(back.columns == t.columns);
    CHECK(back.rows == t.rows);
    CHECK(back.column("x_imp") == 1);
    CHECK(back.values("t") == std::vector<double>{0.0, 0.1});
    CHECK_THROWS_AS(back.column("p_imp"), Error);
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex(std::string{}) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string{"abc"}) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("snapshot encoding") {
    MixtureParams p;
    p.n_bath = 10;
    p.x0 = 1.0;
    const Grid1D g = Grid1D::build(-20.0, 20.0, 128);
    MeanFieldState s = prepare_initial_state(p, g);
    s.time = 12.5;
    const auto bytes = encode_snapshot(s);
    REQUIRE(bytes.size() == 64 + 2 * 128 * 16);
    CHECK(std::memcmp(bytes.data(), "PLRNSNAP", 8) == 0);
    const SnapshotHeader h = decode_snapshot_header(bytes);
    CHECK(h.kind == SnapshotKind::mean_field);
    CHECK(h.n_points == 128);
    CHECK(h.time == 12.5);
    CHECK(h.x_min == -20.0);
    const MeanFieldState back = decode_mean_field_snapshot(bytes, p);
    CHECK(back.bath.values == s.bath.values);
    CHECK(back.imp.values == s.imp.values);
    CHECK(back.time == 12.5);

    auto broken = bytes;
    broken[0] = 'X';
    CHECK_THROWS_AS(decode_snapshot_header(broken), Error);
    broken = bytes;
    broken.resize(100);
    CHECK_THROWS_AS(decode_mean_field_snapshot(broken, p), Error);
}

TEST_CASE("bundle manifest lists every file with its checksum") {
    const auto root = std::filesystem::temp_directory_path() / "polaron_test_bundle";
    std::filesystem::remove_all(root);
    const Bundle b(root);
    b.write_text("a.csv", "t\n0\n");
    b.write_text("sub/b.txt", "hello");
    CHECK(b.files() == std::vector<std::string>{"a.csv", "sub/b.txt"});
    b.write_manifest(ExperimentConfig{}, "prepare");
    b.write_manifest(ExperimentConfig{}, "run");
    const std::string m = b.read_text("manifest.json");
    CHECK(m.find(bundle_format) != std::string::npos);
    CHECK(m.find(sha256_hex(std::string{"hello"})) != std::string::npos);
    CHECK(m.find("\"prepare\"") != std::string::npos);
    CHECK(m.find("\"run\"") != std::string::npos);
    CHECK(b.files().size() == 2);
    CHECK_THROWS_AS(b.read_text("missing.csv"), Error);
    std::filesystem::remove_all(root);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "polaron/error.hpp"
#include "polaron/grid.hpp"
#include "polaron/mixture.hpp"

namespace polaron {

/// Config failure that names the offending key.
class ConfigError : public Error {
public:
    ConfigError(Errc code, std::string key, const std::string& message);

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

enum class SolverKind { mean_field, ci };

const char* to_string(SolverKind kind) noexcept;

struct GridSpec {
    double x_min = -80.0;
    double x_max = 80.0;
    std::size_t n_points = 1000;

    Grid1D build() const { return Grid1D::build(x_min, x_max, n_points); }
    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct ImagingSpec {
    std::size_t n_shots = 0;
    double psf_width = 1.0;
    /// Empty means the final snapshot only.
    std::vector<double> times;
    friend bool operator==(const ImagingSpec&, const ImagingSpec&) = default;
};

struct ExperimentConfig {
    GridSpec grid;
    MixtureParams mixture;
    SolverKind solver = SolverKind::mean_field;
    std::size_t d_bath = 6;
    std::size_t d_imp = 8;
    double dt = 1e-3;
    double ci_dt = 0.05;
    double t_final = 150.0;
    std::size_t snapshot_stride = 100;
    std::size_t ci_snapshot_stride = 2;
    ImagingSpec imaging;
    bool fit = true;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    /// Impurity basis ladder for the convergence study.
    std::vector<std::size_t> converge_d_imp{4, 6, 8};
    /// Couplings of the Froehlich mass curve.
    std::vector<double> frohlich_g_bi{0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
    /// Bath density for the Froehlich curve; 0 selects the simulated trap-centre density.
    double frohlich_n0 = 0.0;
    /// Also run and fit a mean-field quench per coupling in the fit window.
    bool frohlich_fit = false;

    /// Throws ConfigError(constraint_violation) naming the first broken key.
    void validate() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses the flat format: one `key = value` per line, `#` starts a comment,
/// lists are comma separated. Missing keys keep their defaults.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Known keys in serialization order.
std::vector<std::string> config_keys();

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

}  // namespace polaron

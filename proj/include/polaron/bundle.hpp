#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polaron/config.hpp"
#include "polaron/fewbody.hpp"
#include "polaron/meanfield.hpp"

namespace polaron {

inline constexpr const char* bundle_format = "polaron-bundle/1";

/// Numeric table whose headers name their units.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_row(std::vector<double> row);
    /// Index of the column whose header starts with name (before any " [").
    std::size_t column(const std::string& name) const;
    std::vector<double> values(const std::string& name) const;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);

/// Binary snapshot: 64-byte little-endian header (magic, version, kind,
/// n_species, n_points, time, x_min, x_max) then complex doubles.
enum class SnapshotKind : std::uint32_t { mean_field = 0, ci_amplitudes = 1 };

struct SnapshotHeader {
    std::uint32_t version = 1;
    SnapshotKind kind = SnapshotKind::mean_field;
    std::uint32_t n_species = 2;
    std::uint64_t n_points = 0;
    double time = 0.0;
    double x_min = 0.0;
    double x_max = 0.0;
};

std::vector<std::uint8_t> encode_snapshot(const MeanFieldState& state);
std::vector<std::uint8_t> encode_snapshot(const CorrelatedState& state);
SnapshotHeader decode_snapshot_header(std::span<const std::uint8_t> bytes);
/// Rebuilds a mean-field state; params supply everything the header does not.
MeanFieldState decode_mean_field_snapshot(std::span<const std::uint8_t> bytes,
                                          const MixtureParams& params);
CorrelatedState decode_ci_snapshot(std::span<const std::uint8_t> bytes,
                                   std::shared_ptr<const CISpace> space);

/// Output directory with a manifest listing every file and its checksum.
class Bundle {
public:
    explicit Bundle(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    void write_text(const std::string& relative, const std::string& content) const;
    void write_bytes(const std::string& relative, std::span<const std::uint8_t> bytes) const;
    std::string read_text(const std::string& relative) const;
    std::vector<std::uint8_t> read_bytes(const std::string& relative) const;
    bool exists(const std::string& relative) const;
    /// Regular files below the root, sorted, excluding the manifest.
    std::vector<std::string> files() const;

    /// Rewrites manifest.json: format tag, config echo, seed, appended verb
    /// history, and a sha256 for every file.
    void write_manifest(const ExperimentConfig& config, const std::string& verb) const;

private:
    std::filesystem::path root_;
};

}  // namespace polaron

#include "polaron/bundle.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace polaron {

static_assert(std::endian::native == std::endian::little,
              "snapshot encoding assumes a little-endian host");

void CsvTable::add_row(std::vector<double> row) {
    if (row.size() != columns.size()) {
        throw Error(Errc::size_mismatch, "CSV row has " + std::to_string(row.size()) +
                                             " values for " + std::to_string(columns.size()) +
                                             " columns");
    }
    rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const std::string& h = columns[c];
        const auto bracket = h.find(" [");
        if (h.substr(0, bracket) == name) return c;
    }
    throw Error(Errc::invalid_argument, "CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::values(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

std::string to_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c > 0) out += ',';
        out += table.columns[c];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) out += ',';
            out += format_double(row[c]);
        }
        out += '\n';
    }
    return out;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(l);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        return cells;
    };
    if (!std::getline(in, line)) throw Error(Errc::io_failure, "empty CSV");
    table.columns = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line)) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw Error(Errc::io_failure, "non-numeric CSV cell '" + cell + "'");
            }
        }
        table.add_row(std::move(row));
    }
    return table;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::io_failure, "sha256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string sha256_hex(const std::string& text) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace {

constexpr char snapshot_magic[8] = {'P', 'L', 'R', 'N', 'S', 'N', 'A', 'P'};
constexpr std::size_t header_size = 64;

template <class T>
void put(std::vector<std::uint8_t>& out, std::size_t offset, T value) {
    std::memcpy(out.data() + offset, &value, sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> in, std::size_t offset) {
    T value;
    std::memcpy(&value, in.data() + offset, sizeof(T));
    return value;
}

std::vector<std::uint8_t> encode(const SnapshotHeader& h,
                                 std::span<const std::span<const Complex>> blocks) {
    std::size_t payload = 0;
    for (auto b : blocks) payload += b.size();
    std::vector<std::uint8_t> out(header_size + payload * sizeof(Complex), 0);
    std::memcpy(out.data(), snapshot_magic, sizeof(snapshot_magic));
    put(out, 8, h.version);
    put(out, 12, static_cast<std::uint32_t>(h.kind));
    put(out, 16, h.n_species);
    put(out, 24, h.n_points);
    put(out, 32, h.time);
    put(out, 40, h.x_min);
    put(out, 48, h.x_max);
    std::size_t offset = header_size;
    for (auto b : blocks) {
        std::memcpy(out.data() + offset, b.data(), b.size() * sizeof(Complex));
        offset += b.size() * sizeof(Complex);
    }
    return out;
}

std::span<const Complex> payload(std::span<const std::uint8_t> bytes, std::size_t block,
                                 std::size_t n) {
    return {reinterpret_cast<const Complex*>(bytes.data() + header_size) + block * n, n};
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const MeanFieldState& state) {
    const Grid1D& g = state.grid();
    SnapshotHeader h{1, SnapshotKind::mean_field, 2, g.n_points(), state.time, g.x_min(), g.x_max()};
    const std::span<const Complex> blocks[] = {state.bath.values, state.imp.values};
    return encode(h, blocks);
}

std::vector<std::uint8_t> encode_snapshot(const CorrelatedState& state) {
    const Grid1D& g = state.space->grid();
    SnapshotHeader h{1, SnapshotKind::ci_amplitudes, 1,
                     static_cast<std::uint64_t>(state.amplitudes.size()), state.time, g.x_min(),
                     g.x_max()};
    const std::span<const Complex> blocks[] = {
        std::span<const Complex>(state.amplitudes.data(), state.amplitudes.size())};
    return encode(h, blocks);
}

SnapshotHeader decode_snapshot_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < header_size ||
        std::memcmp(bytes.data(), snapshot_magic, sizeof(snapshot_magic)) != 0) {
        throw Error(Errc::io_failure, "not a polaron snapshot");
    }
    SnapshotHeader h;
    h.version = get<std::uint32_t>(bytes, 8);
    h.kind = static_cast<SnapshotKind>(get<std::uint32_t>(bytes, 12));
    h.n_species = get<std::uint32_t>(bytes, 16);
    h.n_points = get<std::uint64_t>(bytes, 24);
    h.time = get<double>(bytes, 32);
    h.x_min = get<double>(bytes, 40);
    h.x_max = get<double>(bytes, 48);
    if (h.version != 1) throw Error(Errc::io_failure, "unsupported snapshot version");
    if (bytes.size() != header_size + h.n_species * h.n_points * sizeof(Complex)) {
        throw Error(Errc::io_failure, "snapshot payload size does not match its header");
    }
    return h;
}

MeanFieldState decode_mean_field_snapshot(std::span<const std::uint8_t> bytes,
                                          const MixtureParams& params) {
    const SnapshotHeader h = decode_snapshot_header(bytes);
    if (h.kind != SnapshotKind::mean_field || h.n_species != 2) {
        throw Error(Errc::io_failure, "snapshot does not hold mean-field orbitals");
    }
    const Grid1D grid = Grid1D::build(h.x_min, h.x_max, h.n_points);
    auto block = [&](std::size_t b) {
        const auto s = payload(bytes, b, h.n_points);
        return ComplexField(grid, ComplexVector(s.begin(), s.end()));
    };
    return MeanFieldState{block(0), block(1), params, h.time};
}

CorrelatedState decode_ci_snapshot(std::span<const std::uint8_t> bytes,
                                   std::shared_ptr<const CISpace> space) {
    const SnapshotHeader h = decode_snapshot_header(bytes);
    if (h.kind != SnapshotKind::ci_amplitudes || h.n_points != space->dimension()) {
        throw Error(Errc::io_failure, "snapshot does not match the CI space");
    }
    const auto s = payload(bytes, 0, h.n_points);
    Eigen::VectorXcd amps(static_cast<Eigen::Index>(h.n_points));
    std::copy(s.begin(), s.end(), amps.data());
    return CorrelatedState{std::move(space), std::move(amps), h.time};
}

Bundle::Bundle(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw Error(Errc::io_failure, "cannot create " + root_.string() + ": " + ec.message());
}

void Bundle::write_bytes(const std::string& relative, std::span<const std::uint8_t> bytes) const {
    const auto path = root_ / relative;
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
}

void Bundle::write_text(const std::string& relative, const std::string& content) const {
    write_bytes(relative,
                std::span(reinterpret_cast<const std::uint8_t*>(content.data()), content.size()));
}

std::vector<std::uint8_t> Bundle::read_bytes(const std::string& relative) const {
    const auto path = root_ / relative;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string Bundle::read_text(const std::string& relative) const {
    const auto bytes = read_bytes(relative);
    return {bytes.begin(), bytes.end()};
}

bool Bundle::exists(const std::string& relative) const {
    return std::filesystem::is_regular_file(root_ / relative);
}

std::vector<std::string> Bundle::files() const {
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = entry.path().lexically_relative(root_).generic_string();
        if (rel != "manifest.json") out.push_back(rel);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void Bundle::write_manifest(const ExperimentConfig& config, const std::string& verb) const {
    using nlohmann::ordered_json;
    ordered_json verbs = ordered_json::array();
    if (exists("manifest.json")) {
        try {
            const auto old = ordered_json::parse(read_text("manifest.json"));
            if (old.contains("verbs")) verbs = old["verbs"];
        } catch (const ordered_json::exception&) {
            throw Error(Errc::io_failure, "existing manifest.json is not valid JSON");
        }
    }
    verbs.push_back(verb);

    ordered_json manifest;
    manifest["format"] = bundle_format;
    manifest["seed"] = config.seed;
    manifest["verbs"] = verbs;
    ordered_json echo = ordered_json::object();
    std::istringstream lines(serialize_config(config));
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find(" = ");
        echo[line.substr(0, eq)] = line.substr(eq + 3);
    }
    manifest["config"] = echo;
    ordered_json files = ordered_json::array();
    for (const auto& rel : this->files()) {
        const auto bytes = read_bytes(rel);
        files.push_back({{"path", rel}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    manifest["files"] = files;
    write_text("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace polaron

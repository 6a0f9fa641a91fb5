#include "polaron/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>
#include <type_traits>

namespace polaron {

ConfigError::ConfigError(Errc code, std::string key, const std::string& message)
    : Error(code, "'" + key + "': " + message), key_(std::move(key)) {}

const char* to_string(SolverKind kind) noexcept {
    return kind == SolverKind::ci ? "ci" : "mean-field";
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string& key, std::string_view text) {
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw ConfigError(Errc::invalid_value, key, "expected a finite number, got '" +
                                                        std::string(text) + "'");
    }
    return value;
}

std::uint64_t parse_unsigned(const std::string& key, std::string_view text) {
    std::uint64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError(Errc::invalid_value, key, "expected a non-negative integer, got '" +
                                                        std::string(text) + "'");
    }
    return value;
}

bool parse_bool(const std::string& key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(Errc::invalid_value, key, "expected true or false, got '" +
                                                    std::string(text) + "'");
}

template <class T, class F>
std::string join(const std::vector<T>& values, F format) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ", ";
        out += format(values[i]);
    }
    return out;
}

struct Field {
    const char* key;
    std::function<void(ExperimentConfig&, const std::string&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class Member>
Field real_field(const char* key, Member member) {
    return {key,
            [member](ExperimentConfig& c, const std::string& k, std::string_view v) {
                member(c) = parse_double(k, v);
            },
            [member](const ExperimentConfig& c) {
                return format_double(member(c));
            }};
}

template <class Member>
Field count_field(const char* key, Member member) {
    return {key,
            [member](ExperimentConfig& c, const std::string& k, std::string_view v) {
                member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(
                    parse_unsigned(k, v));
            },
            [member](const ExperimentConfig& c) {
                return std::to_string(member(c));
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> t;
        t.push_back(real_field("x_min", [](auto& c) -> auto& { return c.grid.x_min; }));
        t.push_back(real_field("x_max", [](auto& c) -> auto& { return c.grid.x_max; }));
        t.push_back(count_field("n_points",
                                [](auto& c) -> auto& { return c.grid.n_points; }));
        t.push_back(count_field("n_bath",
                                [](auto& c) -> auto& { return c.mixture.n_bath; }));
        t.push_back(count_field("n_imp",
                                [](auto& c) -> auto& { return c.mixture.n_imp; }));
        t.push_back(real_field("mass_bath",
                               [](auto& c) -> auto& { return c.mixture.mass_bath; }));
        t.push_back(real_field("mass_imp",
                               [](auto& c) -> auto& { return c.mixture.mass_imp; }));
        t.push_back(real_field("omega", [](auto& c) -> auto& { return c.mixture.omega; }));
        t.push_back(real_field("g_bb", [](auto& c) -> auto& { return c.mixture.g_bb; }));
        t.push_back(real_field("g_bi_pre",
                               [](auto& c) -> auto& { return c.mixture.g_bi_pre; }));
        t.push_back(real_field("g_bi_post",
                               [](auto& c) -> auto& { return c.mixture.g_bi_post; }));
        t.push_back(real_field("x0", [](auto& c) -> auto& { return c.mixture.x0; }));
        t.push_back(real_field("u0", [](auto& c) -> auto& { return c.mixture.u0; }));
        t.push_back({"solver",
                     [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                         if (v == "mean-field") {
                             c.solver = SolverKind::mean_field;
                         } else if (v == "ci") {
                             c.solver = SolverKind::ci;
                         } else {
                             throw ConfigError(Errc::invalid_value, k,
                                               "expected mean-field or ci, got '" +
                                                   std::string(v) + "'");
                         }
                     },
                     [](const ExperimentConfig& c) { return std::string(to_string(c.solver)); }});
        t.push_back(count_field("d_bath", [](auto& c) -> auto& { return c.d_bath; }));
        t.push_back(count_field("d_imp", [](auto& c) -> auto& { return c.d_imp; }));
        t.push_back(real_field("dt", [](auto& c) -> auto& { return c.dt; }));
        t.push_back(real_field("ci_dt", [](auto& c) -> auto& { return c.ci_dt; }));
        t.push_back(real_field("t_final", [](auto& c) -> auto& { return c.t_final; }));
        t.push_back(count_field("snapshot_stride",
                                [](auto& c) -> auto& { return c.snapshot_stride; }));
        t.push_back(count_field("ci_snapshot_stride", [](auto& c) -> auto& {
            return c.ci_snapshot_stride;
        }));
        t.push_back(count_field("n_shots",
                                [](auto& c) -> auto& { return c.imaging.n_shots; }));
        t.push_back(real_field("psf_width",
                               [](auto& c) -> auto& { return c.imaging.psf_width; }));
        t.push_back({"imaging_times",
                     [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                         c.imaging.times.clear();
                         for (auto item : split_list(v)) c.imaging.times.push_back(parse_double(k, item));
                     },
                     [](const ExperimentConfig& c) { return join(c.imaging.times, format_double); }});
        t.push_back({"fit",
                     [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                         c.fit = parse_bool(k, v);
                     },
                     [](const ExperimentConfig& c) { return std::string(c.fit ? "true" : "false"); }});
        t.push_back({"output_dir",
                     [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                         if (v.empty()) throw ConfigError(Errc::invalid_value, k, "must not be empty");
                         c.output_dir = std::string(v);
                     },
                     [](const ExperimentConfig& c) { return c.output_dir; }});
        t.push_back({"seed",
                     [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                         c.seed = parse_unsigned(k, v);
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.seed); }});
        t.push_back({"converge_d_imp",
                     [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                         c.converge_d_imp.clear();
                         for (auto item : split_list(v)) {
                             c.converge_d_imp.push_back(static_cast<std::size_t>(parse_unsigned(k, item)));
                         }
                     },
                     [](const ExperimentConfig& c) {
                         return join(c.converge_d_imp, [](std::size_t d) { return std::to_string(d); });
                     }});
        t.push_back({"frohlich_g_bi",
                     [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                         c.frohlich_g_bi.clear();
                         for (auto item : split_list(v)) c.frohlich_g_bi.push_back(parse_double(k, item));
                     },
                     [](const ExperimentConfig& c) { return join(c.frohlich_g_bi, format_double); }});
        t.push_back(real_field("frohlich_n0", [](auto& c) -> auto& { return c.frohlich_n0; }));
        t.push_back({"frohlich_fit",
                     [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                         c.frohlich_fit = parse_bool(k, v);
                     },
                     [](const ExperimentConfig& c) {
                         return std::string(c.frohlich_fit ? "true" : "false");
                     }});
        return t;
    }();
    return table;
}

void require(bool ok, const char* key, const std::string& message) {
    if (!ok) throw ConfigError(Errc::constraint_violation, key, message);
}

}  // namespace

void ExperimentConfig::validate() const {
    require(grid.x_min < grid.x_max, "x_max", "must exceed x_min");
    require(grid.n_points >= 8, "n_points", "must be at least 8");
    require(mixture.n_bath >= 1, "n_bath", "must be at least 1");
    require(mixture.n_imp == 1, "n_imp", "only a single impurity is supported");
    require(mixture.mass_bath > 0.0, "mass_bath", "must be positive");
    require(mixture.mass_imp > 0.0, "mass_imp", "must be positive");
    require(mixture.omega > 0.0, "omega", "must be positive");
    require(grid.x_min < mixture.x0 && mixture.x0 < grid.x_max, "x0", "must lie inside the box");
    require(dt > 0.0, "dt", "must be positive");
    require(ci_dt > 0.0, "ci_dt", "must be positive");
    require(t_final > 0.0, "t_final", "must be positive");
    require(snapshot_stride >= 1, "snapshot_stride", "must be at least 1");
    require(ci_snapshot_stride >= 1, "ci_snapshot_stride", "must be at least 1");
    require(imaging.psf_width > 0.0, "psf_width", "must be positive");
    for (double t : imaging.times) {
        require(t >= 0.0 && t <= t_final, "imaging_times", "must lie within [0, t_final]");
    }
    require(frohlich_n0 >= 0.0, "frohlich_n0", "must be non-negative");
    if (solver == SolverKind::ci) {
        require(mixture.n_bath <= 4, "n_bath", "the ci solver supports at most 4 bath bosons");
        require(d_bath >= 1 && d_bath <= 16, "d_bath", "must lie in [1, 16]");
        require(d_imp >= 1, "d_imp", "must be at least 1");
    }
    for (std::size_t d : converge_d_imp) require(d >= 1, "converge_d_imp", "entries must be >= 1");
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig config;
    std::vector<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                                : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(Errc::invalid_value, std::string(line),
                              "line " + std::to_string(line_no) + " is not key = value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(),
                                     [&](const Field& f) { return key == f.key; });
        if (it == table.end()) throw ConfigError(Errc::unknown_key, key, "unknown key");
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
            throw ConfigError(Errc::invalid_value, key, "given more than once");
        }
        seen.push_back(key);
        it->set(config, key, value);
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_failure, "cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& config) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(config);
        out += '\n';
    }
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.emplace_back(f.key);
    return keys;
}

}  // namespace polaron

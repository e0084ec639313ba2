#include "fjup/config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fjup/inference.hpp"

namespace fjup {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '#' || line[i] == ';') return line.substr(0, i);
    }
    return line;
}

double to_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw std::invalid_argument("config: " + what + ": not a number: '" + s + "'");
    }
    return v;
}

long to_long(const std::string& s, const std::string& what) {
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') {
        throw std::invalid_argument("config: " + what + ": not an integer: '" + s + "'");
    }
    return v;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

IniFile IniFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    IniFile ini = parse_string(buf.str(), path);
    std::filesystem::path parent = std::filesystem::path(path).parent_path();
    ini.base_dir_ = parent.empty() ? "." : parent.string();
    return ini;
}

IniFile IniFile::parse_string(const std::string& text, const std::string& label) {
    IniFile ini;
    ini.source_ = text;
    ini.label_ = label;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']' || body.size() < 3) {
                throw std::invalid_argument("config: " + label + ":" + std::to_string(lineno) +
                                            ": malformed section header '" + body + "'");
            }
            section = trim(body.substr(1, body.size() - 2));
            continue;
        }
        std::size_t eq = body.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: " + label + ":" + std::to_string(lineno) +
                                        ": expected 'key = value', got '" + body + "'");
        }
        std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument("config: " + label + ":" + std::to_string(lineno) +
                                        ": empty key");
        }
        if (section.empty()) {
            throw std::invalid_argument("config: " + label + ":" + std::to_string(lineno) +
                                        ": key '" + key + "' outside any [section]");
        }
        auto& sec = ini.sections_[section];
        if (sec.count(key)) {
            throw std::invalid_argument("config: " + label + ":" + std::to_string(lineno) +
                                        ": duplicate key '" + key + "' in [" + section + "]");
        }
        sec[key] = Entry{value, lineno, false};
    }
    return ini;
}

bool IniFile::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return false;
    return s->second.count(key) > 0;
}

std::string IniFile::get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s != sections_.end()) {
        auto k = s->second.find(key);
        if (k != s->second.end()) {
            k->second.used = true;
            return k->second.value;
        }
    }
    throw std::invalid_argument("config: missing key '" + key + "' in section [" + section + "] (" +
                                label_ + ")");
}

std::string IniFile::get_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double IniFile::get_double(const std::string& section, const std::string& key) const {
    return to_double(get(section, key), "[" + section + "] " + key);
}

double IniFile::get_double_or(const std::string& section, const std::string& key,
                              double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long IniFile::get_long(const std::string& section, const std::string& key) const {
    return to_long(get(section, key), "[" + section + "] " + key);
}

long IniFile::get_long_or(const std::string& section, const std::string& key, long fallback) const {
    return has(section, key) ? get_long(section, key) : fallback;
}

bool IniFile::get_bool_or(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: [" + section + "] " + key + ": expected a boolean, got '" +
                                v + "'");
}

std::vector<double> IniFile::get_doubles(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split_ws(get(section, key))) {
        out.push_back(to_double(tok, "[" + section + "] " + key));
    }
    if (out.empty()) {
        throw std::invalid_argument("config: [" + section + "] " + key + ": empty list");
    }
    return out;
}

std::vector<std::string> IniFile::get_tokens(const std::string& section,
                                             const std::string& key) const {
    std::vector<std::string> out = split_ws(get(section, key));
    if (out.empty()) {
        throw std::invalid_argument("config: [" + section + "] " + key + ": empty list");
    }
    return out;
}

void IniFile::require_consumed() const {
    std::string unknown;
    for (const auto& [section, keys] : sections_) {
        for (const auto& [key, entry] : keys) {
            if (!entry.used) {
                if (!unknown.empty()) unknown += ", ";
                unknown += "[" + section + "] " + key + " (line " + std::to_string(entry.line) + ")";
            }
        }
    }
    if (!unknown.empty()) {
        throw std::invalid_argument("config: unknown key(s) in " + label_ + ": " + unknown);
    }
}

std::string IniFile::resolve_path(const std::string& value) const {
    std::filesystem::path p(value);
    if (p.is_absolute()) return value;
    return (std::filesystem::path(base_dir_) / p).string();
}

ServiceModel parse_service_model(const IniFile& ini, const std::vector<std::string>& tokens,
                                 const std::string& what) {
    auto want = [&](std::size_t n) {
        if (tokens.size() != n) {
            throw std::invalid_argument("config: " + what + ": expected " + std::to_string(n - 1) +
                                        " parameter(s) after '" + tokens[0] + "'");
        }
    };
    if (tokens.empty()) throw std::invalid_argument("config: " + what + ": empty model spec");
    const std::string& kind = tokens[0];
    ServiceModel model;
    if (kind == "exp") {
        want(2);
        model = Exponential{to_double(tokens[1], what)};
    } else if (kind == "gamma") {
        want(3);
        model = GammaService{to_double(tokens[1], what), to_double(tokens[2], what)};
    } else if (kind == "weibull") {
        want(3);
        model = WeibullService{to_double(tokens[1], what), to_double(tokens[2], what)};
    } else if (kind == "lognormal") {
        want(3);
        model = LogNormalService{to_double(tokens[1], what), to_double(tokens[2], what)};
    } else if (kind == "mm") {
        want(2);
        model = MarkovModulatedExp{load_mmpp(ini.resolve_path(tokens[1]))};
    } else {
        throw std::invalid_argument("config: " + what + ": unknown model kind '" + kind +
                                    "' (expected exp|gamma|weibull|lognormal|mm)");
    }
    validate(model);
    return model;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        std::optional<std::uint64_t> seed_override,
                                        std::optional<std::string> out_override) {
    ExperimentConfig cfg;
    cfg.ini = IniFile::parse_file(path);
    cfg.scenario = cfg.ini.get_or("experiment", "scenario", "unnamed");
    cfg.grid.step_exp2 = static_cast<int>(cfg.ini.get_long_or("grid", "step_exp2", 14));
    cfg.grid.tail_tol = cfg.ini.get_double_or("grid", "tail_tol", 1e-9);
    if (cfg.grid.step_exp2 < 4 || cfg.grid.step_exp2 > 24) {
        throw std::invalid_argument("config: [grid] step_exp2 out of range [4,24]");
    }
    if (!(cfg.grid.tail_tol > 0.0) || cfg.grid.tail_tol >= 1e-2) {
        throw std::invalid_argument("config: [grid] tail_tol out of range (0, 1e-2)");
    }
    cfg.seed = seed_override ? *seed_override
                             : static_cast<std::uint64_t>(cfg.ini.get_long_or("output", "seed", 1));
    if (seed_override && cfg.ini.has("output", "seed")) cfg.ini.get("output", "seed");
    cfg.out_dir = out_override ? *out_override : cfg.ini.get_or("output", "dir", "out");
    if (out_override && cfg.ini.has("output", "dir")) cfg.ini.get("output", "dir");
    return cfg;
}

TrafficConfig parse_traffic(const IniFile& ini) {
    TrafficConfig traffic;
    std::vector<std::string> arrival = ini.get_tokens("traffic", "arrival");
    if (arrival[0] == "exp") {
        if (arrival.size() != 2) {
            throw std::invalid_argument("config: [traffic] arrival: expected 'exp RATE'");
        }
        traffic.arrival = ExpArrivals{to_double(arrival[1], "[traffic] arrival")};
    } else if (arrival[0] == "mmpp") {
        if (arrival.size() != 2) {
            throw std::invalid_argument("config: [traffic] arrival: expected 'mmpp FILE'");
        }
        traffic.arrival = MmppArrivals{load_mmpp(ini.resolve_path(arrival[1]))};
    } else {
        throw std::invalid_argument("config: [traffic] arrival: unknown kind '" + arrival[0] +
                                    "' (expected exp|mmpp)");
    }
    std::vector<std::string> batch = ini.get_tokens("traffic", "batch");
    if (batch.size() != 2) {
        throw std::invalid_argument("config: [traffic] batch: expected 'fixed K' or 'poisson MEAN'");
    }
    if (batch[0] == "fixed") {
        traffic.batch = FixedBatch{static_cast<int>(to_long(batch[1], "[traffic] batch"))};
    } else if (batch[0] == "poisson") {
        traffic.batch = PoissonBatch{to_double(batch[1], "[traffic] batch")};
    } else {
        throw std::invalid_argument("config: [traffic] batch: unknown kind '" + batch[0] +
                                    "' (expected fixed|poisson)");
    }
    traffic.horizon = ini.get_long("traffic", "horizon");
    if (traffic.horizon < 0) throw std::invalid_argument("config: [traffic] horizon must be >= 0");
    return traffic;
}

PathConfig parse_paths(const IniFile& ini) {
    PathConfig paths;
    long count = ini.get_long("paths", "count");
    if (count < 1 || count > 64) {
        throw std::invalid_argument("config: [paths] count out of range [1,64]");
    }
    for (long i = 1; i <= count; ++i) {
        std::string key = "service_" + std::to_string(i);
        paths.services.push_back(
            parse_service_model(ini, ini.get_tokens("paths", key), "[paths] " + key));
    }
    std::string stepping = ini.get_or("paths", "stepping", "per_packet");
    if (stepping == "per_packet") {
        paths.stepping = MmStepping::PerPacket;
    } else if (stepping == "per_chunk") {
        paths.stepping = MmStepping::PerChunk;
    } else {
        throw std::invalid_argument(
            "config: [paths] stepping: expected per_packet|per_chunk, got '" + stepping + "'");
    }
    return paths;
}

}  // namespace fjup

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fjup/chunk_cdf.hpp"
#include "fjup/service_model.hpp"
#include "fjup/simulator.hpp"

namespace fjup {

// Sectioned key-value config file.  '#' and ';' start comments, keys are
// unique per section, values keep internal whitespace (lists are
// whitespace-separated).  Reads are tracked so a command can reject keys it
// never consumed -- typos should fail loudly, not silently do nothing.
class IniFile {
  public:
    static IniFile parse_file(const std::string& path);
    static IniFile parse_string(const std::string& text, const std::string& label = "<string>");

    bool has(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key, double fallback) const;
    long get_long(const std::string& section, const std::string& key) const;
    long get_long_or(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
    std::vector<std::string> get_tokens(const std::string& section, const std::string& key) const;

    // throws listing every key that was never read
    void require_consumed() const;

    // raw file bytes, hashed into every CSV this config produces
    const std::string& source() const { return source_; }
    // directory of the config file; relative paths in values resolve here
    const std::string& base_dir() const { return base_dir_; }
    std::string resolve_path(const std::string& value) const;

  private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    std::map<std::string, std::map<std::string, Entry>> sections_;
    std::string source_;
    std::string label_;
    std::string base_dir_ = ".";
};

// `exp RATE`, `gamma SHAPE RATE`, `weibull SCALE SHAPE`, `lognormal MU SIGMA`,
// or `mm FILE` (loaded via load_mmpp, relative to the config file)
ServiceModel parse_service_model(const IniFile& ini, const std::vector<std::string>& tokens,
                                 const std::string& what);

// common blocks shared by the simulation-driven commands
struct ExperimentConfig {
    std::string scenario;
    GridSpec grid;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    IniFile ini;
};

ExperimentConfig load_experiment_config(const std::string& path,
                                        std::optional<std::uint64_t> seed_override,
                                        std::optional<std::string> out_override);

// [traffic] block -> TrafficConfig (seed filled by the caller per replication)
TrafficConfig parse_traffic(const IniFile& ini);

// [paths] block -> per-path service models + Markov stepping mode
PathConfig parse_paths(const IniFile& ini);

}  // namespace fjup

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace fjup {

// FNV-1a, used to stamp outputs with a digest of (config bytes, seed)
std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t config_hash(const std::string& config_bytes, std::uint64_t seed);

// CSV with a `# config-hash:` provenance line, then a header row.  Cell
// counts are checked against the header on every row.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, std::uint64_t hash, const std::vector<std::string>& columns);

    void row(const std::vector<std::string>& cells);

    static std::string num(double v);
    static std::string num(long v);
    static std::string num(int v) { return num(static_cast<long>(v)); }

  private:
    std::ofstream out_;
    std::string path_;
    std::size_t columns_;
};

}  // namespace fjup

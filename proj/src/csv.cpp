#include "fjup/csv.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace fjup {

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t config_hash(const std::string& config_bytes, std::uint64_t seed) {
    std::uint64_t h = fnv1a64(config_bytes);
    char seed_bytes[32];
    std::snprintf(seed_bytes, sizeof seed_bytes, "seed=%llu", static_cast<unsigned long long>(seed));
    return fnv1a64(seed_bytes, h);
}

CsvWriter::CsvWriter(const std::string& path, std::uint64_t hash,
                     const std::vector<std::string>& columns)
    : out_(path), path_(path), columns_(columns.size()) {
    if (!out_) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
    char line[64];
    std::snprintf(line, sizeof line, "# config-hash: %016llx", static_cast<unsigned long long>(hash));
    out_ << line << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out_ << ',';
        out_ << columns[i];
    }
    out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) {
        throw std::logic_error("csv: row width " + std::to_string(cells.size()) +
                               " does not match header width " + std::to_string(columns_) + " in " +
                               path_);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw std::runtime_error("csv: write failed on '" + path_ + "'");
}

std::string CsvWriter::num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string CsvWriter::num(long v) {
    return std::to_string(v);
}

}  // namespace fjup

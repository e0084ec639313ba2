#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fjup {

// splitmix64 step; also used as the mixing function for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream derivation rule: fold each tag into the running seed with one
// splitmix64 round.  Replication r runs with seed (master XOR r), and every
// purpose inside a run derives its own substream via a stream tag, so
// schedulers compared under the same master seed see identical traffic and
// per-path packet-time streams.
inline std::uint64_t derive_seed(std::uint64_t seed) { return seed; }

template <class... Tags>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
    std::uint64_t s = seed ^ (tag + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    std::uint64_t mixed = splitmix64(s);
    return derive_seed(mixed, rest...);
}

// Cheap counter-style generator for keyed substreams.  The subgradient
// estimator draws one of these per (decision, sample, path, history index),
// which makes resampled service times a pure function of the key; mt19937_64
// would pay a full state init per key.
class KeyedRng {
  public:
    explicit KeyedRng(std::uint64_t seed) : state_(seed) {}

    // uniform on (0,1); never returns 0 so log() is safe
    double uniform() {
        return static_cast<double>(splitmix64(state_) >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    int categorical(const std::vector<double>& probs) {
        double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u <= acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    // Marsaglia-Tsang; `rate` is the inverse scale
    double gamma(double shape, double rate) {
        if (shape < 1.0) {
            double g = gamma(shape + 1.0, rate);
            return g * std::pow(uniform(), 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
        }
    }

  private:
    std::uint64_t state_;
};

// Bulk-simulation engine.  One Rng per stream (arrivals, batch sizes, one per
// path); the simulator never shares an engine between streams.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {
        // top 53 bits, shifted into (0,1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    int poisson(double mean) {
        std::poisson_distribution<int> d(mean);
        return d(engine_);
    }

    double gamma(double shape, double rate) {
        std::gamma_distribution<double> d(shape, 1.0 / rate);
        return d(engine_);
    }

    // index into a discrete distribution given cumulative row weights
    int categorical(const std::vector<double>& probs) {
        double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u <= acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace fjup

#pragma once

#include <variant>
#include <vector>

#include "fjup/service_model.hpp"

namespace fjup {

// Discretization grid: 2^step_exp2 cells covering [0, T] where T is the
// chunk mean plus 12 standard deviations; tail_tol is the mass the grid is
// allowed to leave beyond T.
struct GridSpec {
    int step_exp2 = 14;
    double tail_tol = 1e-9;
};

// k = 0: no work on this path, F(x) = 1 for all x >= 0
struct DegenerateZero {};

struct ErlangCdf {
    int shape;
    double rate;
};

struct GammaCdf {
    double shape;
    double rate;
};

// values[i] = F(i * step); monotone, values.back() within tail_tol of 1
struct DiscretizedCdf {
    double step;
    std::vector<double> values;
};

using ChunkCdf = std::variant<DegenerateZero, ErlangCdf, GammaCdf, DiscretizedCdf>;

// CDF of the service time of a k-packet chunk (sum of k i.i.d. packet times).
// Exponential and gamma packets stay analytic; weibull and lognormal packets
// are discretized and self-convolved on the grid.  Modulated models are
// rejected: chunk-level CDFs need an i.i.d. packet law.
ChunkCdf chunk_cdf(const ServiceModel& model, int k, const GridSpec& grid = {});

double cdf(const ChunkCdf& f, double x);
double survival(const ChunkCdf& f, double x);

// E[X] computed as the integral of the survival function
double chunk_mean(const ChunkCdf& f);

// point beyond which the survival function is below the grid tail tolerance
double upper_support(const ChunkCdf& f, const GridSpec& grid = {});

// log E[exp(theta * S)] for a k-packet chunk.  Throws std::domain_error when
// the MGF does not exist at theta (theta at or past the gamma boundary,
// positive theta for heavy-tailed packet laws).
double mgf_log(const ServiceModel& model, int k, double theta, const GridSpec& grid = {});

}  // namespace fjup

#pragma once

#include <string>
#include <variant>
#include <vector>

namespace fjup {

// Markov-modulated exponential parameters; doubles as the fitted model the
// EM trainer returns, so it lives here rather than in the inference header.
struct MmppParams {
    std::vector<double> initial;             // state occupancy at step 1
    std::vector<std::vector<double>> trans;  // row-stochastic transition matrix
    std::vector<double> rates;               // per-state exponential rate

    int states() const { return static_cast<int>(rates.size()); }
    void validate() const;  // throws std::invalid_argument with the offending field
};

// stationary distribution of the embedded chain (pi A = pi)
std::vector<double> stationary_distribution(const MmppParams& params);

// stationary-weighted mean rate; this is the weight proportional allocation
// uses for modulated paths (two-state (1,3) chain with uniform stationary -> 2)
double stationary_mean_rate(const MmppParams& params);

struct Exponential {
    double rate;
};

struct GammaService {
    double shape;
    double rate;
};

struct WeibullService {
    double scale;
    double shape;
};

struct LogNormalService {
    double mu;
    double sigma;
};

struct MarkovModulatedExp {
    MmppParams params;
};

using ServiceModel =
    std::variant<Exponential, GammaService, WeibullService, LogNormalService, MarkovModulatedExp>;

void validate(const ServiceModel& model);

// Per-packet mean/variance for the i.i.d. models; throws for the modulated
// model, whose packet law depends on the chain state.
double packet_mean(const ServiceModel& model);
double packet_variance(const ServiceModel& model);

// Mean service rate used for proportional weights: 1/mean for i.i.d. models,
// stationary mean rate for modulated ones.
double mean_service_rate(const ServiceModel& model);

// single-packet CDF at x (i.i.d. models only)
double packet_cdf(const ServiceModel& model, double x);

bool is_iid(const ServiceModel& model);

std::string describe(const ServiceModel& model);

}  // namespace fjup

#pragma once

#include <string>
#include <vector>

#include "fjup/rng.hpp"
#include "fjup/service_model.hpp"
#include "fjup/simulator.hpp"

namespace fjup {

// Conjugate gamma posterior over a path's exponential packet rate: density
// proportional to lambda^(shape-1) e^(-rate * lambda).  Observing a chunk of
// k packets finishing in s adds (k, s).
struct GammaPosterior {
    double shape = 1.0;
    double rate = 1.0;
};

GammaPosterior posterior_update(const GammaPosterior& post, int packets, double observed);

// mean of the hierarchical predictive for a K*-packet chunk: K* rate/(shape-1)
double predictive_mean(const GammaPosterior& post, int packets);

// lambda ~ Gamma(shape, rate), then S* ~ Gamma(K*, lambda)
double sample_predictive(const GammaPosterior& post, int packets, KeyedRng& rng);

// --- EM fit of a Markov-modulated exponential service --------------------

struct EmResult {
    MmppParams params;
    std::vector<double> loglik;  // per accepted iteration, non-decreasing
    std::vector<std::string> warnings;
};

// Forward-backward EM over chunk observations x_i with known packet counts
// m_i (gamma emissions of known shape, rate modulated by the hidden state).
// Restarts keep the best final log-likelihood; a state whose responsibility
// mass collapses is re-seeded with jitter and noted in warnings.
EmResult em_fit(const std::vector<double>& observations, const std::vector<int>& shapes,
                int states, int max_iterations = 200, double tol = 1e-8,
                std::uint64_t seed = 0, int restarts = 5);

// MAP state sequence under the same emission model, in log space.  A shape
// of 0 marks a missing observation: no emission term, transitions only.
std::vector<int> viterbi_map(const std::vector<double>& observations,
                             const std::vector<int>& shapes, const MmppParams& params);

// Service-time resample conditioned on the modulating state: per-chunk mode
// freezes the chain (Gamma(K*, rate_state)); per-packet mode steps the
// fitted chain between packets, mirroring the simulator.
double resample_mm_service(const MmppParams& params, int state, int packets,
                           MmStepping stepping, KeyedRng& rng);

// plain-text key/value round trip for fitted parameters
void save_mmpp(const std::string& path, const MmppParams& params);
MmppParams load_mmpp(const std::string& path);

}  // namespace fjup

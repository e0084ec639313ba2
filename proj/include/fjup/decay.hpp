#pragma once

#include <optional>
#include <vector>

#include "fjup/chunk_cdf.hpp"
#include "fjup/service_model.hpp"

namespace fjup {

// Kingman-style decay rate of one path serving chunks of k packets against a
// renewal arrival stream: the positive root theta of
//   log E[e^{theta S^(k)}] + log E[e^{-theta t}] = 0.
// Returns nullopt when the path is unstable (k E[S] >= E[t] leaves no
// positive root).
std::optional<double> path_decay_rate(const ServiceModel& service, int k,
                                      const ServiceModel& arrival, const GridSpec& grid = {});

struct DecayResult {
    std::vector<double> thetas;  // meaningful where stable[i]; 0 elsewhere
    std::vector<bool> stable;    // per path; paths with k_i = 0 count as stable
    double theta_tilde;          // min theta over loaded stable paths
};

// Per-path decay rates for a whole allocation.  Zero-chunk paths carry no
// load and do not enter theta_tilde.
DecayResult allocation_decay(const std::vector<int>& alloc,
                             const std::vector<ServiceModel>& services,
                             const ServiceModel& arrival, const GridSpec& grid = {});

// Steady-state waiting-time tail bound
//   P(W >= sigma) <= e^{-theta_tilde sigma} sum_i e^{-(theta_i - theta_tilde) sigma}
// over the loaded paths, clamped to 1.  Errors if any loaded path is
// unstable, naming it.
double tail_bound(const std::vector<int>& alloc, const std::vector<ServiceModel>& services,
                  const ServiceModel& arrival, double sigma, const GridSpec& grid = {});

// Allocation maximizing theta_tilde by exhaustive enumeration (<= 5 paths).
// Allocations with an unstable loaded path are skipped; ties resolve to the
// lexicographically smallest allocation.
std::vector<int> optimal_allocation_by_decay(int K, const std::vector<ServiceModel>& services,
                                             const ServiceModel& arrival,
                                             const GridSpec& grid = {});

}  // namespace fjup

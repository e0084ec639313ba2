#pragma once

#include <functional>
#include <vector>

#include "fjup/chunk_cdf.hpp"
#include "fjup/service_model.hpp"

namespace fjup {

// Expected completion time of an allocation over exponential paths, i.e. the
// mean of the maximum of independent Erlang(k_i, rate_i) chunk times.
// Direct inclusion-exclusion closed form, independent of the operator route
// in order_stats.hpp so the two can cross-check each other.
double psi_exponential(const std::vector<int>& alloc, const std::vector<double>& rates);

// Optimal two-path split by walking (0,K), (1,K-1), ... and advancing while
// moving a packet to path 1 does not increase psi.  The advance test compares
// a ratio of regularized incomplete beta functions against rate2/rate1 and
// falls back to exact psi values within 1e-9 of the threshold.  Ties advance,
// so equal rates return floor((K+1)/2).
int optimal_two_path_exponential(int K, double rate1, double rate2);

// Continuous relaxation of the two-path optimum: root x of
//   I_p(x, K-x) / I_{1-p}(K-x-1, x+1) = rate2/rate1,  p = rate1/(rate1+rate2)
// found by bisection; clamped to the bracket end when the ratio never
// crosses the threshold (strongly asymmetric rates).
double large_k_root(int K, double rate1, double rate2);

// Integer allocation from the root: whichever nearby integer gives lower psi.
int large_k_allocation(int K, double rate1, double rate2);

// Exhaustive minimum over all splits of K across the given paths.  The
// default objective is the mean upload latency of the allocation; ties
// resolve to the lexicographically smallest allocation.  Capped at 5 paths.
std::vector<int> optimal_allocation_search(
    int K, const std::vector<ServiceModel>& models, const GridSpec& grid = {},
    const std::function<double(const std::vector<int>&)>& objective = {});

// k_i = floor(x_i K) with the remainder on the last path, x proportional to
// the supplied mean service rates.
std::vector<int> proportional_allocation(const std::vector<double>& mean_rates, int K);

// Mean completion time when every path carries a full copy of the K packets
// and the first finisher wins.
double replication_latency(int K, const std::vector<ServiceModel>& models,
                           const GridSpec& grid = {});

// Best split-upload latency (over allocations that keep every path busy)
// minus replication latency; positive means replication is the better
// strategy at this (N, K).
double synchronization_cost(int K, const std::vector<ServiceModel>& models,
                            const GridSpec& grid = {});

// Redundant allocations: every path carries between 1 and K packets and any
// r paths together hold at least K (the r smallest entries sum to >= K).
bool is_nr_allocation(const std::vector<int>& alloc, int r, int K);
std::vector<std::vector<int>> enumerate_nr(int paths, int r, int K);

// Expected time until some r of the N chunks complete.  The allocation must
// be (N,r)-redundant for K packets; violations raise an error naming the
// offending subset of paths.
double eta_r(const std::vector<int>& alloc, const std::vector<ServiceModel>& models, int r,
             int K, const GridSpec& grid = {});

struct NrTableRow {
    int r;
    std::vector<int> alloc;
    double eta;
    double regret;  // eta minus the best eta over every (r, allocation) pair
};

struct NrOptimum {
    int r;                         // redundancy level of the global optimum
    std::vector<int> alloc;        // its allocation
    double eta;                    // its expected completion time
    std::vector<NrTableRow> table; // every feasible (r, allocation) with regret
};

NrOptimum optimal_nr(int paths, int K, const std::vector<ServiceModel>& models,
                     const GridSpec& grid = {});

// Latency regret of a given (r, allocation) against the global optimum.
double nr_regret(const std::vector<int>& alloc, const std::vector<ServiceModel>& models, int r,
                 int K, const GridSpec& grid = {});

// Two-path mean-plus-dispersion upper bound used for quick comparisons:
//   max{k1/r1, k2/r2} + sqrt(2 pi) (sqrt(k1)/r1 + sqrt(k2)/r2)
double chernoff_comparison_bound(int k1, int k2, double rate1, double rate2);

}  // namespace fjup

#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "fjup/inference.hpp"
#include "fjup/service_model.hpp"
#include "fjup/simulator.hpp"

namespace fjup {

// Euclidean projection onto the probability simplex (sorted-threshold rule).
std::vector<double> project_simplex(const std::vector<double>& v);

// floor(x_i K) for the first N-1 paths, remainder on the last
std::vector<int> round_allocation(const std::vector<double>& x, int K);

// one served batch as the subgradient estimator sees it
struct HistoryEntry {
    std::vector<double> x;      // proportions in force for this batch
    std::vector<double> s_obs;  // observed chunk times
    std::vector<int> alloc;     // chunk sizes
    std::vector<int> states;    // modulating state at batch start (-1 on i.i.d. paths)
    double t = 0.0;             // gap to the next arrival
    int batch_size = 0;
    long batch = 0;  // absolute batch index; keys the resampling stream so
                     // draws do not depend on how the window is framed
};

struct SchedulerState {
    std::vector<double> x;  // current proportion vector
    double eta = 1e-3;      // learning rate
    int samples = 100;      // Monte-Carlo resamples per decision
    std::deque<HistoryEntry> history;
};

// M resampled full-batch service-time histories, aligned with the state's
// history window: at(m, n, i) estimates what serving the WHOLE batch i on
// path n would have taken in resample m.
struct ResampleSet {
    int samples = 0;
    int paths = 0;
    int window = 0;
    std::vector<double> s;  // (m, n, i) at m*paths*window + n*window + i

    double at(int m, int n, int i) const { return s[(m * paths + n) * window + i]; }
    double& at(int m, int n, int i) { return s[(m * paths + n) * window + i]; }
};

// Monte-Carlo subgradient of the next batch's expected waiting time with
// respect to the newest proportion decision.  Per sample, the maximizing
// chain (path n, depth k) of
//     x_n s_{n,j} + sum_{i=1}^{k-1} x_{n,j-i} s_{n,j-i} - sum_{i=0}^{k-1} t_{j-i}
// contributes its head resample on e_n when the chain value is positive, so
// the result is (a.e.) the gradient of estimate_cost at x_head = state.x.
std::vector<double> estimate_subgradient(const SchedulerState& state, const ResampleSet& rs);

// The matching Monte-Carlo cost:  mean over samples of
//     max(0, max_{n,k} [ x_head_n s_{n,j} + history terms ])
// with x_head replacing only the newest decision.  The finite-difference
// gradient of this function is what estimate_subgradient approximates.
double estimate_cost(const SchedulerState& state, const ResampleSet& rs,
                     const std::vector<double>& x_head);

// projected update; descent by default, ascent (the printed sign) when
// paper_sign is set
std::vector<double> step(const std::vector<double>& x, const std::vector<double>& grad,
                         double eta, bool paper_sign = false);

enum class SamplerKind { Oracle, Posterior, MmMap, Ose };

struct AdaptiveConfig {
    double eta = 1e-3;
    int samples = 100;      // M; forced to 1 for the one-sample estimator
    int window_cap = 1000;  // history truncated here even without regeneration
    bool truncate = true;   // clear history at regeneration points
    bool paper_sign = false;
    SamplerKind sampler = SamplerKind::Oracle;
    std::vector<ServiceModel> oracle_models;  // Oracle: the true path laws
    std::vector<MmppParams> fitted;           // MmMap: offline-fitted chains per path
    MmStepping stepping = MmStepping::PerPacket;  // MmMap resampling mode
    GammaPosterior prior;                         // Posterior: shared initial prior
    std::uint64_t seed = 0;                       // resampling stream
};

// Online projected-subgradient allocator: starts uniform, resamples service
// histories through the configured sampler, steps the proportion vector
// after every batch, and truncates history at regeneration points (the next
// batch arriving to an all-idle system).
class AdaptiveScheduler : public Scheduler {
  public:
    AdaptiveScheduler(int paths, AdaptiveConfig config);

    std::vector<int> allocate(long j, int batch_size, const std::vector<double>& backlogs) override;
    void observe(long j, const std::vector<double>& chunk_times, const std::vector<int>& alloc,
                 const std::vector<int>& states, double inter_arrival, int batch_size,
                 const std::vector<double>& backlogs_next) override;
    std::string name() const override { return "adaptive"; }

    const std::vector<double>& proportions() const { return state_.x; }
    const SchedulerState& state() const { return state_; }

    // resamples for the current history window (exposed for the
    // finite-difference cross-check, which must reuse the same draws)
    ResampleSet resample(long j) const;

  private:
    int paths_;
    AdaptiveConfig config_;
    SchedulerState state_;
    std::vector<GammaPosterior> posterior_;
    // newest per-packet time estimate per path, for scaling a one-sample
    // resample when the path served nothing that batch
    std::vector<double> packet_estimate_;

    double resample_entry(long j, int m, int n, const HistoryEntry& h) const;
};

}  // namespace fjup

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fjup/config.hpp"
#include "fjup/scheduler.hpp"
#include "fjup/simulator.hpp"

namespace fjup {

// CSV emitters behind the CLI subcommands.  Each consumes its sections of
// the config, writes into cfg.out_dir, and rejects keys it did not use.

// mean upload latency over every split of K packets, with the optimal and
// proportional allocations marked; optional sweep over path 1's rate
void cmd_intermittent_sweep(const ExperimentConfig& cfg);

// replicate-vs-allocate cost over a range of data sizes K, one curve per
// second-path rate, with the first sign change annotated
void cmd_sync_cost(const ExperimentConfig& cfg);

// every redundant allocation (any r paths can reconstruct) with its mean
// latency and regret against the best strategy across all r
void cmd_nr_trellis(const ExperimentConfig& cfg);

// per-path decay rates and the effective tail decay over splits of K
void cmd_decay_sweep(const ExperimentConfig& cfg);

// simulate each configured scheduler under common random numbers; emits
// per-scheduler waiting-time CCDFs, per-replication summaries, and the
// adaptive proportion trajectory
void cmd_stream_experiment(const ExperimentConfig& cfg);

// fit a Markov-modulated service model to a training trace, write the
// parameter file, report the final log-likelihood
void cmd_train_mm(const ExperimentConfig& cfg);

// scheduler factory shared by the stream experiment and its tests; spec is
// `static` | `proportional` | `batch_jsq` | `adaptive:<sampler>`
std::unique_ptr<Scheduler> make_scheduler(const std::string& spec, const ExperimentConfig& cfg,
                                          const PathConfig& paths, std::uint64_t rep_seed);

// replication seed rule: master seed XOR replication index
inline std::uint64_t replication_seed(std::uint64_t master, long rep) {
    return master ^ static_cast<std::uint64_t>(rep);
}

// run fn(rep) for rep in [0, count) across worker threads; exceptions
// propagate to the caller
void parallel_replications(long count, const std::function<void(long)>& fn);

}  // namespace fjup

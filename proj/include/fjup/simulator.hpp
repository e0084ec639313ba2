#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "fjup/rng.hpp"
#include "fjup/service_model.hpp"

namespace fjup {

// --- traffic -----------------------------------------------------------

struct ExpArrivals {
    double rate;
};

// inter-arrival means modulated by a hidden chain: t_j ~ Exp(rate[z_j]),
// z advancing one transition per batch
struct MmppArrivals {
    MmppParams params;
};

using ArrivalProcess = std::variant<ExpArrivals, MmppArrivals>;

struct FixedBatch {
    int size;
};

// Poisson batch sizes, redrawn until >= 1 (a zero-packet batch is no batch)
struct PoissonBatch {
    double mean;
};

using BatchProcess = std::variant<FixedBatch, PoissonBatch>;

struct TrafficConfig {
    ArrivalProcess arrival = ExpArrivals{1.0};
    BatchProcess batch = FixedBatch{1};
    long horizon = 1;        // number of batches
    std::uint64_t seed = 0;  // master seed; per-purpose streams derive from it
};

// how a Markov-modulated service chain advances: one transition per packet
// served, or frozen across a chunk with one transition per batch
enum class MmStepping { PerPacket, PerChunk };

struct PathConfig {
    std::vector<ServiceModel> services;
    MmStepping stepping = MmStepping::PerPacket;
};

// --- trace -------------------------------------------------------------

// Flat batch-major storage: entry (j, n) lives at index j * paths + n.
struct SimTrace {
    int paths = 0;
    std::vector<double> inter_arrival;  // t_j, gap between batch j and j+1
    std::vector<int> batch_size;        // K_j
    std::vector<int> alloc;             // k_{n,j}
    std::vector<double> service;        // realized chunk times s_{n,j}
    std::vector<double> wait;           // W_j, backlog seen at arrival
    std::vector<double> backlog_after;  // per-path unfinished work once batch j joined
    std::vector<int> service_state;     // modulating-chain state at batch start; -1 if i.i.d.

    long batches() const { return static_cast<long>(wait.size()); }
    double service_at(long j, int n) const { return service[j * paths + n]; }
    int alloc_at(long j, int n) const { return alloc[j * paths + n]; }
};

// --- schedulers --------------------------------------------------------

class Scheduler {
  public:
    virtual ~Scheduler() = default;

    // Split a batch across paths given the backlog each path shows at the
    // batch's arrival (time units of unfinished work).
    virtual std::vector<int> allocate(long j, int batch_size,
                                      const std::vector<double>& backlogs) = 0;

    // Called once the batch's chunk times are realized and the gap to the
    // next arrival is known.  backlogs_next is the per-path unfinished work
    // the next batch will see; states holds the modulating-chain state each
    // path was in when the batch started (-1 on i.i.d. paths).
    virtual void observe(long /*j*/, const std::vector<double>& /*chunk_times*/,
                         const std::vector<int>& /*alloc*/, const std::vector<int>& /*states*/,
                         double /*inter_arrival*/, int /*batch_size*/,
                         const std::vector<double>& /*backlogs_next*/) {}

    virtual std::string name() const = 0;
};

// fixed proportion vector, rounded per batch
class StaticScheduler : public Scheduler {
  public:
    explicit StaticScheduler(std::vector<double> proportions);
    std::vector<int> allocate(long j, int batch_size, const std::vector<double>& backlogs) override;
    std::string name() const override { return "static"; }

  private:
    std::vector<double> x_;
};

// proportions fixed at the paths' mean service rates
class ProportionalScheduler : public Scheduler {
  public:
    explicit ProportionalScheduler(const std::vector<ServiceModel>& services);
    std::vector<int> allocate(long j, int batch_size, const std::vector<double>& backlogs) override;
    std::string name() const override { return "proportional"; }

  private:
    std::vector<double> x_;
};

// whole batch to the path with the least backlog
class BatchJsqScheduler : public Scheduler {
  public:
    std::vector<int> allocate(long j, int batch_size, const std::vector<double>& backlogs) override;
    std::string name() const override { return "batch-jsq"; }
};

std::vector<int> batch_jsq_allocation(const std::vector<double>& workloads, int batch_size);

// --- simulation --------------------------------------------------------

// Run the fork-join recursion
//   W_{n,j+1} = max(0, W_{n,j} + s_{n,j} - t_j),   W_j = max_n W_{n,j}
// for `horizon` batches.  Paths with zero chunks serve nothing but their
// backlog still carries forward.  Deterministic given the config.  The
// probe, when given, fires after each batch is recorded and observed.
SimTrace simulate(const TrafficConfig& traffic, const PathConfig& paths, Scheduler& scheduler,
                  const std::function<void(long)>& probe);
SimTrace simulate(const TrafficConfig& traffic, const PathConfig& paths, Scheduler& scheduler);

// The unrolled form of the recursion,
//   W_j = max(0, max_{n, 1<=k<j} sum_{i=1}^{k} (s_{n,j-i} - t_{j-i})),
// evaluated directly from the trace.  j is 1-based; j=1 gives 0.
double waiting_time_direct(const SimTrace& trace, long j);

// empirical P(W >= sigma) over the sample set
struct CcdfTable {
    std::vector<double> sigma;
    std::vector<double> prob;
    long samples = 0;
};

CcdfTable ccdf(const std::vector<double>& samples, const std::vector<double>& sigma_grid);

}  // namespace fjup

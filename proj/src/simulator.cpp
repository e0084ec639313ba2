#include "fjup/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fjup/scheduler.hpp"

namespace fjup {

namespace {

// stream tags hanging off TrafficConfig::seed; the adaptive scheduler's
// resampling stream is tag 5 (see scheduler.cpp) so that swapping schedulers
// never perturbs the traffic or packet-time streams
constexpr std::uint64_t kArrivalStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kChainStream = 3;
constexpr std::uint64_t kPacketStream = 4;

double draw_packet(const ServiceModel& model, Rng& rng) {
    if (const auto* e = std::get_if<Exponential>(&model)) return rng.exponential(e->rate);
    if (const auto* g = std::get_if<GammaService>(&model)) return rng.gamma(g->shape, g->rate);
    if (const auto* w = std::get_if<WeibullService>(&model)) {
        std::weibull_distribution<double> d(w->shape, w->scale);
        return d(rng.engine());
    }
    if (const auto* l = std::get_if<LogNormalService>(&model)) {
        std::lognormal_distribution<double> d(l->mu, l->sigma);
        return d(rng.engine());
    }
    throw std::logic_error("draw_packet: modulated models are drawn by the chain-aware path");
}

int step_chain(const MmppParams& params, int state, Rng& rng) {
    return rng.categorical(params.trans[state]);
}

// realized service time of a k-packet chunk; advances the modulating chain
// according to the stepping mode
double realize_chunk(const ServiceModel& model, int k, MmStepping stepping, Rng& packet_rng,
                     Rng& chain_rng, int& state) {
    const auto* mm = std::get_if<MarkovModulatedExp>(&model);
    if (!mm) {
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += draw_packet(model, packet_rng);
        return s;
    }
    const MmppParams& p = mm->params;
    double s = 0.0;
    if (stepping == MmStepping::PerPacket) {
        // chain moves once per packet served; an idle batch leaves it put
        for (int i = 0; i < k; ++i) {
            s += packet_rng.exponential(p.rates[state]);
            state = step_chain(p, state, chain_rng);
        }
    } else {
        // frozen across the chunk, one move per batch whether or not the
        // path served anything
        for (int i = 0; i < k; ++i) s += packet_rng.exponential(p.rates[state]);
        state = step_chain(p, state, chain_rng);
    }
    return s;
}

}  // namespace

StaticScheduler::StaticScheduler(std::vector<double> proportions) : x_(std::move(proportions)) {
    double sum = 0.0;
    for (double v : x_) {
        if (v < 0.0) throw std::invalid_argument("StaticScheduler: negative proportion");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("StaticScheduler: proportions must sum to 1");
    }
}

std::vector<int> StaticScheduler::allocate(long, int batch_size, const std::vector<double>&) {
    return round_allocation(x_, batch_size);
}

ProportionalScheduler::ProportionalScheduler(const std::vector<ServiceModel>& services) {
    if (services.empty()) throw std::invalid_argument("ProportionalScheduler: no paths");
    double total = 0.0;
    for (const auto& m : services) total += mean_service_rate(m);
    for (const auto& m : services) x_.push_back(mean_service_rate(m) / total);
}

std::vector<int> ProportionalScheduler::allocate(long, int batch_size,
                                                 const std::vector<double>&) {
    return round_allocation(x_, batch_size);
}

std::vector<int> batch_jsq_allocation(const std::vector<double>& workloads, int batch_size) {
    if (workloads.empty()) throw std::invalid_argument("batch_jsq_allocation: no paths");
    std::size_t best = 0;
    for (std::size_t i = 1; i < workloads.size(); ++i) {
        if (workloads[i] < workloads[best]) best = i;
    }
    std::vector<int> alloc(workloads.size(), 0);
    alloc[best] = batch_size;
    return alloc;
}

std::vector<int> BatchJsqScheduler::allocate(long, int batch_size,
                                             const std::vector<double>& backlogs) {
    return batch_jsq_allocation(backlogs, batch_size);
}

SimTrace simulate(const TrafficConfig& traffic, const PathConfig& paths, Scheduler& scheduler) {
    return simulate(traffic, paths, scheduler, {});
}

SimTrace simulate(const TrafficConfig& traffic, const PathConfig& paths, Scheduler& scheduler,
                  const std::function<void(long)>& probe) {
    const int n = static_cast<int>(paths.services.size());
    if (n < 1) throw std::invalid_argument("simulate: at least one path required");
    if (traffic.horizon < 0) throw std::invalid_argument("simulate: horizon must be >= 0");
    for (const auto& m : paths.services) validate(m);
    if (const auto* e = std::get_if<ExpArrivals>(&traffic.arrival)) {
        if (!(e->rate > 0.0)) throw std::invalid_argument("simulate: arrival rate must be positive");
    } else {
        std::get<MmppArrivals>(traffic.arrival).params.validate();
    }
    if (const auto* f = std::get_if<FixedBatch>(&traffic.batch)) {
        if (f->size < 1) throw std::invalid_argument("simulate: batch size must be >= 1");
    } else {
        if (!(std::get<PoissonBatch>(traffic.batch).mean > 0.0)) {
            throw std::invalid_argument("simulate: batch mean must be positive");
        }
    }

    Rng arrival_rng(derive_seed(traffic.seed, kArrivalStream));
    Rng batch_rng(derive_seed(traffic.seed, kBatchStream));
    std::vector<Rng> chain_rng;
    std::vector<Rng> packet_rng;
    chain_rng.reserve(n);
    packet_rng.reserve(n);
    for (int p = 0; p < n; ++p) {
        chain_rng.emplace_back(derive_seed(traffic.seed, kChainStream, static_cast<std::uint64_t>(p)));
        packet_rng.emplace_back(derive_seed(traffic.seed, kPacketStream, static_cast<std::uint64_t>(p)));
    }

    // initial modulating states (-1 on i.i.d. paths)
    std::vector<int> state(n, -1);
    for (int p = 0; p < n; ++p) {
        if (const auto* mm = std::get_if<MarkovModulatedExp>(&paths.services[p])) {
            state[p] = chain_rng[p].categorical(mm->params.initial);
        }
    }
    int arrival_state = -1;
    if (const auto* mm = std::get_if<MmppArrivals>(&traffic.arrival)) {
        arrival_state = arrival_rng.categorical(mm->params.initial);
    }

    SimTrace trace;
    trace.paths = n;
    trace.inter_arrival.reserve(traffic.horizon);
    trace.batch_size.reserve(traffic.horizon);
    trace.alloc.reserve(traffic.horizon * n);
    trace.service.reserve(traffic.horizon * n);
    trace.wait.reserve(traffic.horizon);
    trace.backlog_after.reserve(traffic.horizon * n);
    trace.service_state.reserve(traffic.horizon * n);

    std::vector<double> backlog(n, 0.0);  // W_{n,j}: unfinished work at this arrival
    std::vector<double> chunk_times(n, 0.0);
    std::vector<double> backlog_next(n, 0.0);

    for (long j = 0; j < traffic.horizon; ++j) {
        int batch_size;
        if (const auto* f = std::get_if<FixedBatch>(&traffic.batch)) {
            batch_size = f->size;
        } else {
            const auto& pb = std::get<PoissonBatch>(traffic.batch);
            do {
                batch_size = batch_rng.poisson(pb.mean);
            } while (batch_size < 1);
        }

        std::vector<int> alloc = scheduler.allocate(j + 1, batch_size, backlog);
        if (static_cast<int>(alloc.size()) != n) {
            throw std::logic_error("simulate: scheduler returned wrong allocation size");
        }
        long assigned = 0;
        for (int k : alloc) {
            if (k < 0) throw std::logic_error("simulate: scheduler returned negative chunk");
            assigned += k;
        }
        if (assigned != batch_size) {
            throw std::logic_error("simulate: scheduler allocation does not sum to the batch size");
        }

        std::vector<int> states_at_start(state);
        for (int p = 0; p < n; ++p) {
            chunk_times[p] = realize_chunk(paths.services[p], alloc[p], paths.stepping,
                                           packet_rng[p], chain_rng[p], state[p]);
        }

        double wait = *std::max_element(backlog.begin(), backlog.end());

        double t;
        if (const auto* e = std::get_if<ExpArrivals>(&traffic.arrival)) {
            t = arrival_rng.exponential(e->rate);
        } else {
            const MmppParams& p = std::get<MmppArrivals>(traffic.arrival).params;
            t = arrival_rng.exponential(p.rates[arrival_state]);
            arrival_state = step_chain(p, arrival_state, arrival_rng);
        }

        for (int p = 0; p < n; ++p) {
            backlog_next[p] = std::max(0.0, backlog[p] + chunk_times[p] - t);
        }

        trace.inter_arrival.push_back(t);
        trace.batch_size.push_back(batch_size);
        trace.wait.push_back(wait);
        for (int p = 0; p < n; ++p) {
            trace.alloc.push_back(alloc[p]);
            trace.service.push_back(chunk_times[p]);
            trace.backlog_after.push_back(backlog[p] + chunk_times[p]);
            trace.service_state.push_back(states_at_start[p]);
        }

        scheduler.observe(j + 1, chunk_times, alloc, states_at_start, t, batch_size, backlog_next);
        backlog = backlog_next;
        if (probe) probe(j + 1);
    }
    return trace;
}

double waiting_time_direct(const SimTrace& trace, long j) {
    if (j < 1 || j > trace.batches()) throw std::invalid_argument("waiting_time_direct: j out of range");
    const int n = trace.paths;
    double best = 0.0;
    for (int p = 0; p < n; ++p) {
        double partial = 0.0;
        for (long i = 1; i < j; ++i) {
            long idx = j - 1 - i;  // 0-based batch index of batch j-i
            partial += trace.service[idx * n + p] - trace.inter_arrival[idx];
            best = std::max(best, partial);
        }
    }
    return best;
}

CcdfTable ccdf(const std::vector<double>& samples, const std::vector<double>& sigma_grid) {
    if (samples.empty()) throw std::invalid_argument("ccdf: no samples");
    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    CcdfTable out;
    out.samples = static_cast<long>(sorted.size());
    out.sigma = sigma_grid;
    out.prob.reserve(sigma_grid.size());
    for (double s : sigma_grid) {
        auto it = std::lower_bound(sorted.begin(), sorted.end(), s);
        out.prob.push_back(static_cast<double>(sorted.end() - it) / out.samples);
    }
    return out;
}

}  // namespace fjup

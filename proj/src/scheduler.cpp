#include "fjup/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fjup {

std::vector<double> project_simplex(const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    if (n == 0) throw std::invalid_argument("project_simplex: empty vector");
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument("project_simplex: non-finite entry");
    }
    // sorted-threshold rule: largest rho with u_rho + (1 - sum_{j<=rho} u_j)/rho > 0
    std::vector<double> u(v);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double tau = 0.0;
    int rho = 0;
    for (int i = 0; i < n; ++i) {
        cum += u[i];
        double candidate = (1.0 - cum) / (i + 1);
        if (u[i] + candidate > 0.0) {
            rho = i + 1;
            tau = candidate;
        }
    }
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = std::max(0.0, v[i] + tau);
    (void)rho;
    return out;
}

std::vector<int> round_allocation(const std::vector<double>& x, int K) {
    const int n = static_cast<int>(x.size());
    if (n == 0) throw std::invalid_argument("round_allocation: empty proportion vector");
    if (K < 0) throw std::invalid_argument("round_allocation: K must be non-negative");
    std::vector<int> alloc(n, 0);
    int assigned = 0;
    for (int i = 0; i + 1 < n; ++i) {
        if (x[i] < -1e-12 || x[i] > 1.0 + 1e-12) {
            throw std::invalid_argument("round_allocation: proportion outside [0,1]");
        }
        alloc[i] = static_cast<int>(std::floor(std::max(0.0, x[i]) * K));
        assigned += alloc[i];
    }
    alloc[n - 1] = K - assigned;
    return alloc;
}

namespace {

void check_resamples(const SchedulerState& state, const ResampleSet& rs) {
    if (state.history.empty()) throw std::invalid_argument("subgradient: empty history");
    if (rs.samples < 1) throw std::invalid_argument("subgradient: need at least one sample");
    if (rs.window != static_cast<int>(state.history.size())) {
        throw std::invalid_argument("subgradient: resample window does not match the history");
    }
    if (rs.paths != static_cast<int>(state.x.size())) {
        throw std::invalid_argument("subgradient: resample paths do not match the state");
    }
}

}  // namespace

std::vector<double> estimate_subgradient(const SchedulerState& state, const ResampleSet& rs) {
    check_resamples(state, rs);
    const int n = rs.paths;
    const int window = rs.window;
    std::vector<double> grad(n, 0.0);
    for (int m = 0; m < rs.samples; ++m) {
        double best = -std::numeric_limits<double>::infinity();
        int best_path = 0;
        for (int p = 0; p < n; ++p) {
            // chains anchored at the newest batch, extended into the past;
            // the head is scaled by the current decision, so the maximizer is
            // the one the cost at state.x sees, while the accumulated
            // magnitude stays unscaled -- that is the derivative of the head
            double chain = state.x[p] * rs.at(m, p, window - 1) - state.history[window - 1].t;
            if (chain > best) {
                best = chain;
                best_path = p;
            }
            for (int k = 2; k <= window; ++k) {
                const HistoryEntry& h = state.history[window - k];
                chain += h.x[p] * rs.at(m, p, window - k) - h.t;
                if (chain > best) {
                    best = chain;
                    best_path = p;
                }
            }
        }
        if (best > 0.0) grad[best_path] += rs.at(m, best_path, window - 1);
    }
    for (double& g : grad) g /= rs.samples;
    return grad;
}

double estimate_cost(const SchedulerState& state, const ResampleSet& rs,
                     const std::vector<double>& x_head) {
    check_resamples(state, rs);
    if (x_head.size() != state.x.size()) {
        throw std::invalid_argument("estimate_cost: head proportion size mismatch");
    }
    const int n = rs.paths;
    const int window = rs.window;
    double total = 0.0;
    for (int m = 0; m < rs.samples; ++m) {
        double best = 0.0;  // the outer max(0, .)
        for (int p = 0; p < n; ++p) {
            double chain = x_head[p] * rs.at(m, p, window - 1) - state.history[window - 1].t;
            best = std::max(best, chain);
            for (int k = 2; k <= window; ++k) {
                const HistoryEntry& h = state.history[window - k];
                chain += h.x[p] * rs.at(m, p, window - k) - h.t;
                best = std::max(best, chain);
            }
        }
        total += best;
    }
    return total / rs.samples;
}

std::vector<double> step(const std::vector<double>& x, const std::vector<double>& grad,
                         double eta, bool paper_sign) {
    if (!(eta > 0.0)) throw std::invalid_argument("step: learning rate must be positive");
    if (x.size() != grad.size()) throw std::invalid_argument("step: size mismatch");
    std::vector<double> moved(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        // descent shifts proportion away from the bottleneck path; the
        // printed update ascends instead (kept behind paper_sign)
        moved[i] = paper_sign ? x[i] + eta * grad[i] : x[i] - eta * grad[i];
    }
    return project_simplex(moved);
}

AdaptiveScheduler::AdaptiveScheduler(int paths, AdaptiveConfig config)
    : paths_(paths), config_(std::move(config)) {
    if (paths < 1) throw std::invalid_argument("AdaptiveScheduler: need at least one path");
    if (config_.samples < 1) throw std::invalid_argument("AdaptiveScheduler: need at least one sample");
    if (config_.window_cap < 1) throw std::invalid_argument("AdaptiveScheduler: window cap must be >= 1");
    switch (config_.sampler) {
        case SamplerKind::Oracle:
            if (static_cast<int>(config_.oracle_models.size()) != paths) {
                throw std::invalid_argument("AdaptiveScheduler: oracle sampler needs one model per path");
            }
            for (const auto& m : config_.oracle_models) validate(m);
            break;
        case SamplerKind::MmMap:
            if (static_cast<int>(config_.fitted.size()) != paths) {
                throw std::invalid_argument("AdaptiveScheduler: MAP sampler needs fitted parameters per path");
            }
            for (const auto& f : config_.fitted) f.validate();
            break;
        case SamplerKind::Ose:
            config_.samples = 1;  // by definition, only the observed sample
            break;
        case SamplerKind::Posterior:
            break;
    }
    state_.x.assign(paths, 1.0 / paths);
    state_.eta = config_.eta;
    state_.samples = config_.samples;
    posterior_.assign(paths, config_.prior);
    packet_estimate_.assign(paths, 1.0);  // neutral guess until a path reports
}

std::vector<int> AdaptiveScheduler::allocate(long, int batch_size, const std::vector<double>&) {
    return round_allocation(state_.x, batch_size);
}

ResampleSet AdaptiveScheduler::resample(long j) const {
    const int window = static_cast<int>(state_.history.size());
    ResampleSet rs;
    rs.samples = state_.samples;
    rs.paths = paths_;
    rs.window = window;
    rs.s.resize(static_cast<std::size_t>(rs.samples) * paths_ * window);

    // MAP sampler: decode each path's state sequence once per decision
    std::vector<std::vector<int>> map_states;
    if (config_.sampler == SamplerKind::MmMap) {
        map_states.resize(paths_);
        for (int p = 0; p < paths_; ++p) {
            std::vector<double> obs(window);
            std::vector<int> shapes(window);
            for (int i = 0; i < window; ++i) {
                obs[i] = state_.history[i].s_obs[p];
                shapes[i] = state_.history[i].alloc[p];  // 0 = nothing observed
            }
            map_states[p] = viterbi_map(obs, shapes, config_.fitted[p]);
        }
    }

    for (int m = 0; m < rs.samples; ++m) {
        // hierarchical draw: one rate per (sample, path), shared down the window
        std::vector<double> lambda(paths_, 0.0);
        if (config_.sampler == SamplerKind::Posterior) {
            for (int p = 0; p < paths_; ++p) {
                KeyedRng lr(derive_seed(config_.seed, 6, static_cast<std::uint64_t>(j),
                                        static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(p)));
                lambda[p] = lr.gamma(posterior_[p].shape, posterior_[p].rate);
            }
        }
        for (int p = 0; p < paths_; ++p) {
            for (int i = 0; i < window; ++i) {
                const HistoryEntry& h = state_.history[i];
                KeyedRng er(derive_seed(config_.seed, 5, static_cast<std::uint64_t>(j),
                                        static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(p),
                                        static_cast<std::uint64_t>(h.batch)));
                double value = 0.0;
                switch (config_.sampler) {
                    case SamplerKind::Oracle: {
                        const ServiceModel& model = config_.oracle_models[p];
                        if (const auto* mm = std::get_if<MarkovModulatedExp>(&model)) {
                            value = resample_mm_service(mm->params, h.states[p], h.batch_size,
                                                        config_.stepping, er);
                        } else if (const auto* e = std::get_if<Exponential>(&model)) {
                            value = er.gamma(static_cast<double>(h.batch_size), e->rate);
                        } else if (const auto* g = std::get_if<GammaService>(&model)) {
                            value = er.gamma(h.batch_size * g->shape, g->rate);
                        } else {
                            // no closed chunk law: sum per-packet inverse transforms
                            for (int q = 0; q < h.batch_size; ++q) {
                                if (const auto* w = std::get_if<WeibullService>(&model)) {
                                    value += w->scale *
                                             std::pow(-std::log(er.uniform()), 1.0 / w->shape);
                                } else {
                                    const auto& l = std::get<LogNormalService>(model);
                                    value += std::exp(l.mu + l.sigma * er.normal());
                                }
                            }
                        }
                        break;
                    }
                    case SamplerKind::Posterior:
                        value = er.gamma(static_cast<double>(h.batch_size), lambda[p]);
                        break;
                    case SamplerKind::MmMap:
                        value = resample_mm_service(config_.fitted[p], map_states[p][i],
                                                    h.batch_size, config_.stepping, er);
                        break;
                    case SamplerKind::Ose:
                        value = resample_entry(j, m, p, h);
                        break;
                }
                rs.at(m, p, i) = value;
            }
        }
    }
    return rs;
}

// one-sample estimate: scale the observed chunk time up to the whole batch,
// falling back to the latest per-packet estimate when the path sat idle
double AdaptiveScheduler::resample_entry(long, int, int n, const HistoryEntry& h) const {
    if (h.alloc[n] >= 1) {
        return h.s_obs[n] * static_cast<double>(h.batch_size) / h.alloc[n];
    }
    return packet_estimate_[n] * h.batch_size;
}

void AdaptiveScheduler::observe(long j, const std::vector<double>& chunk_times,
                                const std::vector<int>& alloc, const std::vector<int>& states,
                                double inter_arrival, int batch_size,
                                const std::vector<double>& backlogs_next) {
    HistoryEntry entry;
    entry.x = state_.x;
    entry.s_obs = chunk_times;
    entry.alloc = alloc;
    entry.states = states;
    entry.t = inter_arrival;
    entry.batch_size = batch_size;
    entry.batch = j;
    state_.history.push_back(std::move(entry));
    while (static_cast<int>(state_.history.size()) > config_.window_cap) {
        state_.history.pop_front();
    }

    for (int p = 0; p < paths_; ++p) {
        if (alloc[p] >= 1 && chunk_times[p] > 0.0) {
            posterior_[p] = posterior_update(posterior_[p], alloc[p], chunk_times[p]);
            packet_estimate_[p] = chunk_times[p] / alloc[p];
        }
    }

    ResampleSet rs = resample(j);
    std::vector<double> grad = estimate_subgradient(state_, rs);
    state_.x = step(state_.x, grad, state_.eta, config_.paper_sign);

    // next batch arrives to an all-idle system: nothing before it can matter
    if (config_.truncate) {
        bool regeneration = true;
        for (double b : backlogs_next) {
            if (b > 0.0) {
                regeneration = false;
                break;
            }
        }
        if (regeneration) state_.history.clear();
    }
}

}  // namespace fjup

#include "fjup/intermittent.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fjup/order_stats.hpp"
#include "fjup/specfun.hpp"

namespace fjup {

namespace {

void check_rates(const std::vector<double>& rates) {
    if (rates.empty()) throw std::invalid_argument("rates must be non-empty");
    for (double r : rates) {
        if (!(r > 0.0)) throw std::invalid_argument("rates must be positive");
    }
}

void check_models(const std::vector<ServiceModel>& models) {
    if (models.empty()) throw std::invalid_argument("at least one service model required");
    for (const auto& m : models) validate(m);
}

// lazily built per-path chunk CDFs so allocation sweeps reuse work
class ChunkCache {
  public:
    ChunkCache(const std::vector<ServiceModel>& models, const GridSpec& grid)
        : models_(models), grid_(grid), per_path_(models.size()) {}

    const ChunkCdf& get(std::size_t path, int k) {
        auto& slot = per_path_[path];
        auto it = slot.find(k);
        if (it == slot.end()) it = slot.emplace(k, chunk_cdf(models_[path], k, grid_)).first;
        return it->second;
    }

    CdfVector vector_for(const std::vector<int>& alloc) {
        CdfVector f;
        f.reserve(alloc.size());
        for (std::size_t i = 0; i < alloc.size(); ++i) {
            if (alloc[i] == 0) {
                f.push_back(DegenerateZero{});
            } else {
                f.push_back(get(i, alloc[i]));
            }
        }
        return f;
    }

  private:
    const std::vector<ServiceModel>& models_;
    GridSpec grid_;
    std::vector<std::map<int, ChunkCdf>> per_path_;
};

}  // namespace

double psi_exponential(const std::vector<int>& alloc, const std::vector<double>& rates) {
    check_rates(rates);
    if (alloc.size() != rates.size()) throw std::invalid_argument("allocation/rates size mismatch");
    for (int k : alloc) {
        if (k < 0) throw std::invalid_argument("chunk sizes must be non-negative");
    }
    if (alloc.size() > 20) throw std::invalid_argument("psi_exponential: capped at 20 paths");

    // paths with no packets never gate completion
    std::vector<int> ks;
    std::vector<double> ls;
    for (std::size_t i = 0; i < alloc.size(); ++i) {
        if (alloc[i] > 0) {
            ks.push_back(alloc[i]);
            ls.push_back(rates[i]);
        }
    }
    const int n = static_cast<int>(ks.size());
    if (n == 0) return 0.0;

    // E[max] = sum over non-empty subsets S, sign (-1)^{|S|+1}, of
    // (1/L_S) sum_{m_i < k_i} multinomial(m) prod p_i^{m_i}.  The inner sum
    // runs as a DP over the total count t with binomial weights so large
    // chunk counts neither overflow nor underflow.
    double psi = 0.0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double total_rate = 0.0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) total_rate += ls[i];
        }
        std::vector<double> g{1.0};
        for (int i = 0; i < n; ++i) {
            if (!(mask & (1u << i))) continue;
            double log_p = std::log(ls[i] / total_rate);
            int cap = ks[i] - 1;
            std::vector<double> next(g.size() + cap, 0.0);
            for (int t = 0; t < static_cast<int>(next.size()); ++t) {
                double acc = 0.0;
                int m_hi = std::min(t, cap);
                int m_lo = std::max(0, t - static_cast<int>(g.size()) + 1);
                for (int m = m_lo; m <= m_hi; ++m) {
                    acc += g[t - m] * std::exp(log_factorial(t) - log_factorial(m) -
                                               log_factorial(t - m) + m * log_p);
                }
                next[t] = acc;
            }
            g = std::move(next);
        }
        double sum = std::accumulate(g.begin(), g.end(), 0.0);
        double sign = (std::popcount(mask) % 2 == 1) ? 1.0 : -1.0;
        psi += sign * sum / total_rate;
    }
    return psi;
}

namespace {

// beta-function ratio the walk rule compares against rate2/rate1
double walk_ratio(int k1, int K, double p) {
    double num = reg_inc_beta(static_cast<double>(k1), static_cast<double>(K - k1), p);
    double den = reg_inc_beta(static_cast<double>(K - k1 - 1), static_cast<double>(k1 + 1), 1.0 - p);
    return num / den;
}

// advance while moving a packet from path 2 to path 1 does not increase psi;
// expects rate1 <= rate2
int walk_two_path(int K, double rate1, double rate2) {
    const double p = rate1 / (rate1 + rate2);
    const double threshold = rate2 / rate1;
    int k1 = 0;
    while (k1 < K) {
        double ratio = walk_ratio(k1, K, p);
        bool advance;
        if (std::fabs(ratio - threshold) <= 1e-9 * std::max(1.0, threshold)) {
            // near-tie: the ratio test loses resolution, compare exact values
            double cur = psi_exponential({k1, K - k1}, {rate1, rate2});
            double nxt = psi_exponential({k1 + 1, K - k1 - 1}, {rate1, rate2});
            advance = nxt <= cur * (1.0 + 1e-12);
        } else {
            advance = ratio > threshold;
        }
        if (!advance) break;
        ++k1;
    }
    return k1;
}

}  // namespace

int optimal_two_path_exponential(int K, double rate1, double rate2) {
    check_rates({rate1, rate2});
    if (K < 0) throw std::invalid_argument("K must be non-negative");
    if (K == 0) return 0;
    if (rate1 > rate2) return K - walk_two_path(K, rate2, rate1);
    return walk_two_path(K, rate1, rate2);
}

double large_k_root(int K, double rate1, double rate2) {
    check_rates({rate1, rate2});
    if (K < 2) throw std::invalid_argument("large_k_root: needs K >= 2");
    const double p = rate1 / (rate1 + rate2);
    const double threshold = rate2 / rate1;
    auto f = [&](double x) {
        double num = reg_inc_beta(x, K - x, p);
        double den = reg_inc_beta(K - x - 1.0, x + 1.0, 1.0 - p);
        return num / den - threshold;
    };
    double lo = 1e-9;
    double hi = K - 1.0 - 1e-9;
    double flo = f(lo);
    double fhi = f(hi);
    if (std::isnan(flo) || std::isnan(fhi)) {
        throw std::runtime_error("large_k_root: ratio not evaluable inside the bracket");
    }
    // the ratio is decreasing in x; if it never crosses the threshold the
    // optimum sits at the corresponding end of the bracket
    if (flo <= 0.0) return 0.0;
    if (fhi >= 0.0) return static_cast<double>(K - 1);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

int large_k_allocation(int K, double rate1, double rate2) {
    double x = large_k_root(K, rate1, rate2);
    std::vector<int> candidates{static_cast<int>(std::floor(x)), static_cast<int>(std::ceil(x))};
    if (x >= K - 1.5) candidates.push_back(K);  // clamped high: all-on-path-1 is in play
    if (x <= 0.5) candidates.push_back(0);
    int best = -1;
    double best_psi = 0.0;
    std::sort(candidates.begin(), candidates.end());
    for (int k1 : candidates) {
        if (k1 < 0 || k1 > K) continue;
        double v = psi_exponential({k1, K - k1}, {rate1, rate2});
        if (best < 0 || v < best_psi) {
            best = k1;
            best_psi = v;
        }
    }
    return best;
}

std::vector<int> optimal_allocation_search(
    int K, const std::vector<ServiceModel>& models, const GridSpec& grid,
    const std::function<double(const std::vector<int>&)>& objective) {
    check_models(models);
    if (K < 0) throw std::invalid_argument("K must be non-negative");
    const int n = static_cast<int>(models.size());
    if (n > 5) {
        throw std::invalid_argument(
            "optimal_allocation_search: exhaustive search supports at most 5 paths; use "
            "proportional_allocation for larger systems");
    }
    ChunkCache cache(models, grid);
    auto value = [&](const std::vector<int>& alloc) {
        if (objective) return objective(alloc);
        return mean_upload_latency(cache.vector_for(alloc), grid);
    };
    std::vector<int> best;
    double best_value = 0.0;
    std::vector<int> cur(n, 0);
    auto rec = [&](auto&& self, int idx, int left) -> void {
        if (idx == n - 1) {
            cur[idx] = left;
            double v = value(cur);
            if (best.empty() || v < best_value) {
                best = cur;
                best_value = v;
            }
            return;
        }
        for (int k = 0; k <= left; ++k) {
            cur[idx] = k;
            self(self, idx + 1, left - k);
        }
    };
    rec(rec, 0, K);
    return best;
}

std::vector<int> proportional_allocation(const std::vector<double>& mean_rates, int K) {
    check_rates(mean_rates);
    if (K < 0) throw std::invalid_argument("K must be non-negative");
    double total = std::accumulate(mean_rates.begin(), mean_rates.end(), 0.0);
    const int n = static_cast<int>(mean_rates.size());
    std::vector<int> alloc(n);
    int assigned = 0;
    for (int i = 0; i + 1 < n; ++i) {
        alloc[i] = static_cast<int>(std::floor(mean_rates[i] / total * K));
        assigned += alloc[i];
    }
    alloc[n - 1] = K - assigned;
    return alloc;
}

double replication_latency(int K, const std::vector<ServiceModel>& models, const GridSpec& grid) {
    check_models(models);
    if (K < 1) throw std::invalid_argument("replication_latency: needs at least one packet");
    CdfVector f;
    f.reserve(models.size());
    for (const auto& m : models) f.push_back(chunk_cdf(m, K, grid));
    return mu_operator(f, 1, grid);
}

double synchronization_cost(int K, const std::vector<ServiceModel>& models, const GridSpec& grid) {
    check_models(models);
    const int n = static_cast<int>(models.size());
    if (K < n) {
        throw std::invalid_argument(
            "synchronization_cost: K < N, no all-positive allocation exists");
    }
    ChunkCache cache(models, grid);
    double best = 0.0;
    bool have = false;
    std::vector<int> cur(n);
    auto rec = [&](auto&& self, int idx, int left) -> void {
        int remaining_slots = n - idx - 1;
        if (remaining_slots == 0) {
            cur[idx] = left;
            double v = mean_upload_latency(cache.vector_for(cur), grid);
            if (!have || v < best) {
                best = v;
                have = true;
            }
            return;
        }
        for (int k = 1; left - k >= remaining_slots; ++k) {
            cur[idx] = k;
            self(self, idx + 1, left - k);
        }
    };
    rec(rec, 0, K);
    return best - replication_latency(K, models, grid);
}

bool is_nr_allocation(const std::vector<int>& alloc, int r, int K) {
    const int n = static_cast<int>(alloc.size());
    if (r < 1 || r > n) return false;
    std::vector<int> sorted = alloc;
    for (int k : sorted) {
        if (k < 1 || k > K) return false;
    }
    std::sort(sorted.begin(), sorted.end());
    long long sum = 0;
    for (int i = 0; i < r; ++i) sum += sorted[i];
    return sum >= K;
}

std::vector<std::vector<int>> enumerate_nr(int paths, int r, int K) {
    if (paths < 1 || K < 1) throw std::invalid_argument("enumerate_nr: needs paths >= 1 and K >= 1");
    if (r < 1 || r > paths) throw std::invalid_argument("enumerate_nr: r out of range");
    double space = std::pow(static_cast<double>(K), paths);
    if (space > 2e7) throw std::invalid_argument("enumerate_nr: candidate space too large to enumerate");
    std::vector<std::vector<int>> out;
    std::vector<int> cur(paths, 1);
    auto rec = [&](auto&& self, int idx) -> void {
        if (idx == paths) {
            if (is_nr_allocation(cur, r, K)) out.push_back(cur);
            return;
        }
        for (int k = 1; k <= K; ++k) {
            cur[idx] = k;
            self(self, idx + 1);
        }
    };
    rec(rec, 0);
    return out;
}

namespace {

// error text naming the r paths whose chunks are too small to rebuild the batch
void require_nr_member(const std::vector<int>& alloc, int r, int K) {
    const int n = static_cast<int>(alloc.size());
    if (r < 1 || r > n) throw std::invalid_argument("eta_r: r out of range");
    for (int i = 0; i < n; ++i) {
        if (alloc[i] < 1 || alloc[i] > K) {
            std::ostringstream msg;
            msg << "chunk size " << alloc[i] << " on path " << i + 1 << " outside [1, K=" << K
                << "]";
            throw std::invalid_argument(msg.str());
        }
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return alloc[a] < alloc[b]; });
    long long sum = 0;
    for (int i = 0; i < r; ++i) sum += alloc[order[i]];
    if (sum < K) {
        std::ostringstream msg;
        msg << "allocation is not (N," << r << ")-redundant for K=" << K << ": paths {";
        for (int i = 0; i < r; ++i) msg << (i ? ", " : "") << order[i] + 1;
        msg << "} hold only " << sum << " packets";
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

double eta_r(const std::vector<int>& alloc, const std::vector<ServiceModel>& models, int r,
             int K, const GridSpec& grid) {
    check_models(models);
    if (alloc.size() != models.size()) throw std::invalid_argument("allocation/models size mismatch");
    require_nr_member(alloc, r, K);
    CdfVector f;
    f.reserve(alloc.size());
    for (std::size_t i = 0; i < alloc.size(); ++i) f.push_back(chunk_cdf(models[i], alloc[i], grid));
    return mu_operator(f, r, grid);
}

NrOptimum optimal_nr(int paths, int K, const std::vector<ServiceModel>& models,
                     const GridSpec& grid) {
    check_models(models);
    if (static_cast<int>(models.size()) != paths) {
        throw std::invalid_argument("optimal_nr: one service model per path required");
    }
    ChunkCache cache(models, grid);
    NrOptimum out;
    out.r = 0;
    out.eta = 0.0;
    for (int r = 1; r <= paths; ++r) {
        for (const auto& alloc : enumerate_nr(paths, r, K)) {
            double v = mu_operator(cache.vector_for(alloc), r, grid);
            out.table.push_back({r, alloc, v, 0.0});
            // strict < keeps the first (lexicographically smallest) argmin and
            // resolves cross-r ties toward the smaller r
            if (out.r == 0 || v < out.eta) {
                out.r = r;
                out.alloc = alloc;
                out.eta = v;
            }
        }
    }
    for (auto& row : out.table) row.regret = row.eta - out.eta;
    return out;
}

double nr_regret(const std::vector<int>& alloc, const std::vector<ServiceModel>& models, int r,
                 int K, const GridSpec& grid) {
    double own = eta_r(alloc, models, r, K, grid);
    NrOptimum best = optimal_nr(static_cast<int>(models.size()), K, models, grid);
    return own - best.eta;
}

double chernoff_comparison_bound(int k1, int k2, double rate1, double rate2) {
    check_rates({rate1, rate2});
    if (k1 < 0 || k2 < 0) throw std::invalid_argument("chunk sizes must be non-negative");
    double m1 = k1 / rate1;
    double m2 = k2 / rate2;
    double spread = std::sqrt(2.0 * M_PI) *
                    (std::sqrt(static_cast<double>(k1)) / rate1 +
                     std::sqrt(static_cast<double>(k2)) / rate2);
    return std::max(m1, m2) + spread;
}

}  // namespace fjup

#include "fjup/decay.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fjup {

namespace {

// upper end of the open bracket for the root search: the service MGF blows
// up at the rate parameter for exponential-tailed models, and is finite
// everywhere for lighter tails (Weibull shape > 1)
double mgf_boundary(const ServiceModel& service) {
    if (const auto* e = std::get_if<Exponential>(&service)) return e->rate;
    if (const auto* g = std::get_if<GammaService>(&service)) return g->rate;
    if (const auto* w = std::get_if<WeibullService>(&service)) {
        if (w->shape == 1.0) return 1.0 / w->scale;
        return std::numeric_limits<double>::infinity();
    }
    throw std::invalid_argument(
        "path_decay_rate: service model has no finite moment generating function for "
        "positive arguments (" + describe(service) + ")");
}

}  // namespace

std::optional<double> path_decay_rate(const ServiceModel& service, int k,
                                      const ServiceModel& arrival, const GridSpec& grid) {
    validate(service);
    validate(arrival);
    if (k < 1) throw std::invalid_argument("path_decay_rate: chunk size must be >= 1");
    if (!is_iid(service) || !is_iid(arrival)) {
        throw std::invalid_argument("path_decay_rate: needs i.i.d. service and arrival models");
    }

    // negative drift is necessary and sufficient for a positive root
    if (k * packet_mean(service) >= packet_mean(arrival)) return std::nullopt;

    auto g = [&](double theta) {
        return mgf_log(service, k, theta, grid) + mgf_log(arrival, 1, -theta, grid);
    };

    double hi = mgf_boundary(service);
    if (std::isinf(hi)) {
        // light-tailed service: expand until the log-MGF sum turns positive
        hi = 1.0;
        int guard = 0;
        while (g(hi) <= 0.0) {
            hi *= 2.0;
            if (++guard > 200) return std::nullopt;  // critically loaded
        }
    } else {
        hi = hi * (1.0 - 1e-9);
        if (g(hi) <= 0.0) return std::nullopt;  // no crossing inside the domain
    }

    double lo = 1e-12;
    if (g(lo) >= 0.0) return std::nullopt;  // boundary-only sign: critically loaded
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

DecayResult allocation_decay(const std::vector<int>& alloc,
                             const std::vector<ServiceModel>& services,
                             const ServiceModel& arrival, const GridSpec& grid) {
    if (alloc.size() != services.size()) {
        throw std::invalid_argument("allocation_decay: allocation/services size mismatch");
    }
    DecayResult out;
    out.thetas.assign(alloc.size(), 0.0);
    out.stable.assign(alloc.size(), true);
    out.theta_tilde = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < alloc.size(); ++i) {
        if (alloc[i] == 0) continue;  // unloaded path never delays anyone
        auto theta = path_decay_rate(services[i], alloc[i], arrival, grid);
        if (!theta) {
            out.stable[i] = false;
            continue;
        }
        out.thetas[i] = *theta;
        out.theta_tilde = std::min(out.theta_tilde, *theta);
    }
    return out;
}

double tail_bound(const std::vector<int>& alloc, const std::vector<ServiceModel>& services,
                  const ServiceModel& arrival, double sigma, const GridSpec& grid) {
    if (sigma < 0.0) throw std::invalid_argument("tail_bound: sigma must be non-negative");
    DecayResult d = allocation_decay(alloc, services, arrival, grid);
    for (std::size_t i = 0; i < alloc.size(); ++i) {
        if (!d.stable[i]) {
            std::ostringstream msg;
            msg << "tail_bound: path " << i + 1 << " is unstable under chunk size " << alloc[i];
            throw std::invalid_argument(msg.str());
        }
    }
    if (std::isinf(d.theta_tilde)) {
        throw std::invalid_argument("tail_bound: allocation loads no path");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < alloc.size(); ++i) {
        if (alloc[i] == 0) continue;
        sum += std::exp(-(d.thetas[i] - d.theta_tilde) * sigma);
    }
    return std::min(1.0, std::exp(-d.theta_tilde * sigma) * sum);
}

std::vector<int> optimal_allocation_by_decay(int K, const std::vector<ServiceModel>& services,
                                             const ServiceModel& arrival, const GridSpec& grid) {
    if (K < 1) throw std::invalid_argument("optimal_allocation_by_decay: needs K >= 1");
    const int n = static_cast<int>(services.size());
    if (n < 1) throw std::invalid_argument("optimal_allocation_by_decay: needs at least one path");
    if (n > 5) {
        throw std::invalid_argument(
            "optimal_allocation_by_decay: exhaustive search supports at most 5 paths");
    }
    std::vector<int> best;
    double best_theta = 0.0;
    std::vector<int> cur(n, 0);
    auto rec = [&](auto&& self, int idx, int left) -> void {
        if (idx == n - 1) {
            cur[idx] = left;
            DecayResult d = allocation_decay(cur, services, arrival, grid);
            for (bool ok : d.stable) {
                if (!ok) return;
            }
            if (best.empty() || d.theta_tilde > best_theta) {
                best = cur;
                best_theta = d.theta_tilde;
            }
            return;
        }
        for (int k = 0; k <= left; ++k) {
            cur[idx] = k;
            self(self, idx + 1, left - k);
        }
    };
    rec(rec, 0, K);
    if (best.empty()) {
        throw std::runtime_error(
            "optimal_allocation_by_decay: system overloaded, every allocation leaves some "
            "path unstable");
    }
    return best;
}

}  // namespace fjup

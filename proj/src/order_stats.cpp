#include "fjup/order_stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fjup/specfun.hpp"

namespace fjup {

namespace {

constexpr int kMaxPaths = 20;  // subset enumeration is exponential in N

// closed form for a set of Erlang survival-product integrals:
//   int_0^inf prod_i sum_{m_i<k_i} e^{-l_i x} (l_i x)^{m_i}/m_i! dx
//     = (1/L) * sum over m-vectors of multinomial(m) prod_i p_i^{m_i},
// L = sum l_i, p_i = l_i / L.  Enumerated recursively in log space so chunk
// sizes in the hundreds stay finite.
double erlang_product_integral(const std::vector<ErlangCdf>& members) {
    double total_rate = 0.0;
    for (const auto& m : members) total_rate += m.rate;
    std::vector<double> log_p(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) log_p[i] = std::log(members[i].rate / total_rate);

    double sum = 0.0;
    // depth-first over the truncated multi-index
    auto rec = [&](auto&& self, std::size_t idx, int total, double logw) -> void {
        if (idx == members.size()) {
            sum += std::exp(logw + log_factorial(total));
            return;
        }
        for (int mi = 0; mi < members[idx].shape; ++mi) {
            self(self, idx + 1, total + mi, logw + mi * log_p[idx] - log_factorial(mi));
        }
    };
    rec(rec, 0, 0, 0.0);
    return sum / total_rate;
}

double numeric_product_integral(const std::vector<const ChunkCdf*>& members, const GridSpec& grid) {
    double t_upper = 0.0;
    for (const auto* m : members) {
        if (const auto* d = std::get_if<DiscretizedCdf>(m)) {
            if (1.0 - d->values.back() > 1e-6) {
                throw std::runtime_error(
                    "d_operator: a discretized CDF never approaches 1; the survival-product "
                    "integral diverges");
            }
        }
        t_upper = std::max(t_upper, upper_support(*m, grid));
    }
    const int n = 1 << grid.step_exp2;
    const double h = t_upper / n;
    double acc = 0.0;
    double prev = 1.0;  // product of survivals at x = 0
    for (const auto* m : members) prev *= survival(*m, 0.0);
    for (int t = 1; t <= n; ++t) {
        double x = t * h;
        double prod = 1.0;
        for (const auto* m : members) {
            prod *= survival(*m, x);
            if (prod == 0.0) break;
        }
        acc += 0.5 * (prev + prod);
        prev = prod;
    }
    return acc * h;
}

double subset_integral(const CdfVector& f, const std::vector<int>& subset, const GridSpec& grid) {
    std::vector<ErlangCdf> erlangs;
    std::vector<const ChunkCdf*> members;
    bool all_erlang = true;
    for (int idx : subset) {
        if (std::holds_alternative<DegenerateZero>(f[idx])) return 0.0;
        members.push_back(&f[idx]);
        if (const auto* e = std::get_if<ErlangCdf>(&f[idx])) {
            erlangs.push_back(*e);
        } else {
            all_erlang = false;
        }
    }
    if (all_erlang) {
        // the closed form enumerates prod(shapes) multi-indices; past ~2e7
        // terms quadrature is both faster and accurate enough
        double terms = 1.0;
        for (const auto& e : erlangs) terms *= static_cast<double>(e.shape);
        if (terms <= 2e7) return erlang_product_integral(erlangs);
    }
    return numeric_product_integral(members, grid);
}

}  // namespace

double d_operator(const CdfVector& f, int j, const GridSpec& grid) {
    const int n = static_cast<int>(f.size());
    if (n == 0) throw std::invalid_argument("d_operator: empty CDF vector");
    if (n > kMaxPaths) throw std::invalid_argument("d_operator: subset enumeration capped at 20 paths");
    if (j < 1 || j > n) throw std::invalid_argument("d_operator: j out of range");

    // enumerate size-j index subsets in lexicographic order
    std::vector<int> subset(j);
    for (int i = 0; i < j; ++i) subset[i] = i;
    double total = 0.0;
    for (;;) {
        total += subset_integral(f, subset, grid);
        int i = j - 1;
        while (i >= 0 && subset[i] == n - j + i) --i;
        if (i < 0) break;
        ++subset[i];
        for (int q = i + 1; q < j; ++q) subset[q] = subset[q - 1] + 1;
    }
    return total;
}

double mu_operator(const CdfVector& f, int r, const GridSpec& grid) {
    const int n = static_cast<int>(f.size());
    if (n == 0) throw std::invalid_argument("mu_operator: empty CDF vector");
    if (r < 1 || r > n) throw std::invalid_argument("mu_operator: r out of range");
    double total = 0.0;
    for (int j = n - r + 1; j <= n; ++j) {
        double coeff = std::exp(log_factorial(j - 1) - log_factorial(n - r) - log_factorial(j - 1 - (n - r)));
        double sign = ((j - (n - r + 1)) % 2 == 0) ? 1.0 : -1.0;
        total += sign * std::round(coeff) * d_operator(f, j, grid);
    }
    return total;
}

double mean_upload_latency(const CdfVector& f, const GridSpec& grid) {
    CdfVector active;
    for (const auto& c : f) {
        if (!std::holds_alternative<DegenerateZero>(c)) active.push_back(c);
    }
    if (active.empty()) return 0.0;
    return mu_operator(active, static_cast<int>(active.size()), grid);
}

double mean_upload_latency(const std::vector<int>& alloc, const std::vector<ServiceModel>& models,
                           const GridSpec& grid) {
    if (alloc.size() != models.size()) {
        throw std::invalid_argument("mean_upload_latency: allocation/models size mismatch");
    }
    CdfVector f;
    for (std::size_t i = 0; i < alloc.size(); ++i) {
        if (alloc[i] < 0) throw std::invalid_argument("chunk sizes must be non-negative");
        if (alloc[i] == 0) continue;
        f.push_back(chunk_cdf(models[i], alloc[i], grid));
    }
    if (f.empty()) return 0.0;
    return mu_operator(f, static_cast<int>(f.size()), grid);
}

}  // namespace fjup

#include "fjup/chunk_cdf.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "fjup/specfun.hpp"

namespace fjup {

namespace {

// Linear convolution of two length-n mass vectors, truncated back to n
// entries.  Entries at index >= n correspond to sums landing beyond T, and
// since all masses are non-negative nothing truncated here could have come
// back below T in a later convolution.
std::vector<double> convolve_trunc(const std::vector<double>& a, const std::vector<double>& b) {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);

    const int n = static_cast<int>(a.size());
    const int len = 2 * n;

    static int cached_len = 0;
    static double* buf_a = nullptr;
    static double* buf_b = nullptr;
    static fftw_complex* spec_a = nullptr;
    static fftw_complex* spec_b = nullptr;
    static fftw_plan fwd_a, fwd_b, inv;

    if (cached_len != len) {
        if (cached_len != 0) {
            fftw_destroy_plan(fwd_a);
            fftw_destroy_plan(fwd_b);
            fftw_destroy_plan(inv);
            fftw_free(buf_a);
            fftw_free(buf_b);
            fftw_free(spec_a);
            fftw_free(spec_b);
        }
        buf_a = fftw_alloc_real(len);
        buf_b = fftw_alloc_real(len);
        spec_a = fftw_alloc_complex(len / 2 + 1);
        spec_b = fftw_alloc_complex(len / 2 + 1);
        fwd_a = fftw_plan_dft_r2c_1d(len, buf_a, spec_a, FFTW_ESTIMATE);
        fwd_b = fftw_plan_dft_r2c_1d(len, buf_b, spec_b, FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_1d(len, spec_a, buf_a, FFTW_ESTIMATE);
        cached_len = len;
    }

    std::copy(a.begin(), a.end(), buf_a);
    std::fill(buf_a + n, buf_a + len, 0.0);
    std::copy(b.begin(), b.end(), buf_b);
    std::fill(buf_b + n, buf_b + len, 0.0);
    fftw_execute(fwd_a);
    fftw_execute(fwd_b);
    for (int i = 0; i <= len / 2; ++i) {
        double re = spec_a[i][0] * spec_b[i][0] - spec_a[i][1] * spec_b[i][1];
        double im = spec_a[i][0] * spec_b[i][1] + spec_a[i][1] * spec_b[i][0];
        spec_a[i][0] = re;
        spec_a[i][1] = im;
    }
    fftw_execute(inv);

    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = std::max(0.0, buf_a[i] / len);
    return out;
}

// k-fold self-convolution by squaring
std::vector<double> self_convolve(const std::vector<double>& base, int k) {
    std::vector<double> acc;
    std::vector<double> cur = base;
    int rem = k;
    while (rem > 0) {
        if (rem & 1) acc = acc.empty() ? cur : convolve_trunc(acc, cur);
        rem >>= 1;
        if (rem > 0) cur = convolve_trunc(cur, cur);
    }
    return acc;
}

// Assemble F(j*h) from k-fold masses.  Mass index l sits at physical point
// (l + k/2) * h (cell centers add exactly), spread uniformly over its cell.
std::vector<double> masses_to_cdf(const std::vector<double>& mass, int k, int n) {
    std::vector<double> cum(mass.size());
    double run = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        run += mass[i];
        cum[i] = run;
    }
    std::vector<double> values(n + 1, 0.0);
    for (int j = 0; j <= n; ++j) {
        double t = j - 0.5 * k - 0.5;
        if (t < -1.0) {
            values[j] = 0.0;
            continue;
        }
        int full = static_cast<int>(std::floor(t));
        double frac = t - full;
        double v = 0.0;
        if (full >= 0) v = cum[std::min<std::size_t>(full, cum.size() - 1)];
        int next = full + 1;
        if (next >= 0 && next < static_cast<int>(mass.size())) v += frac * mass[next];
        values[j] = std::min(1.0, std::max(0.0, v));
    }
    // round-off from the FFT can leave tiny decreases
    for (int j = 1; j <= n; ++j) values[j] = std::max(values[j], values[j - 1]);
    return values;
}

DiscretizedCdf discretize(const ServiceModel& model, int k, const GridSpec& grid) {
    const int n = 1 << grid.step_exp2;
    const double m1 = packet_mean(model);
    const double sd1 = std::sqrt(packet_variance(model));
    double t_upper = k * m1 + 12.0 * std::sqrt(static_cast<double>(k)) * sd1;

    for (int attempt = 0; attempt < 16; ++attempt) {
        const double h = t_upper / n;
        std::vector<double> mass(n);
        double prev = 0.0;
        for (int i = 0; i < n; ++i) {
            double next = packet_cdf(model, (i + 1) * h);
            mass[i] = std::max(0.0, next - prev);
            prev = next;
        }
        if (1.0 - prev < grid.tail_tol) {
            std::vector<double> folded = self_convolve(mass, k);
            std::vector<double> values = masses_to_cdf(folded, k, n);
            if (1.0 - values.back() < grid.tail_tol) {
                return DiscretizedCdf{h, std::move(values)};
            }
        }
        t_upper *= 2.0;
    }
    std::ostringstream msg;
    msg << "chunk_cdf: grid upper bound too small for " << describe(model) << " with k=" << k
        << "; need T >= " << t_upper << " to keep truncated mass below " << grid.tail_tol;
    throw std::runtime_error(msg.str());
}

}  // namespace

ChunkCdf chunk_cdf(const ServiceModel& model, int k, const GridSpec& grid) {
    validate(model);
    if (k < 1) {
        throw std::invalid_argument("chunk_cdf: k must be >= 1 (zero-chunk paths are handled by callers)");
    }
    if (const auto* e = std::get_if<Exponential>(&model)) {
        return ErlangCdf{k, e->rate};
    }
    if (const auto* g = std::get_if<GammaService>(&model)) {
        double shape = k * g->shape;
        double rounded = std::round(shape);
        if (std::fabs(shape - rounded) < 1e-9 && rounded >= 1.0) {
            return ErlangCdf{static_cast<int>(rounded), g->rate};
        }
        return GammaCdf{shape, g->rate};
    }
    if (std::holds_alternative<MarkovModulatedExp>(model)) {
        throw std::invalid_argument("chunk_cdf: modulated models have no closed chunk CDF; use an i.i.d. model");
    }
    return discretize(model, k, grid);
}

double cdf(const ChunkCdf& f, double x) {
    return std::visit(
        [x](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, DegenerateZero>) {
                return x >= 0.0 ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, ErlangCdf>) {
                if (x <= 0.0) return 0.0;
                return reg_gamma_p(static_cast<double>(c.shape), c.rate * x);
            } else if constexpr (std::is_same_v<T, GammaCdf>) {
                if (x <= 0.0) return 0.0;
                return reg_gamma_p(c.shape, c.rate * x);
            } else {
                if (x <= 0.0) return 0.0;
                double pos = x / c.step;
                auto last = static_cast<double>(c.values.size() - 1);
                if (pos >= last) return 1.0;
                int lo = static_cast<int>(pos);
                double frac = pos - lo;
                return c.values[lo] + frac * (c.values[lo + 1] - c.values[lo]);
            }
        },
        f);
}

double survival(const ChunkCdf& f, double x) { return 1.0 - cdf(f, x); }

double chunk_mean(const ChunkCdf& f) {
    return std::visit(
        [&f](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, DegenerateZero>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ErlangCdf>) {
                return c.shape / c.rate;
            } else if constexpr (std::is_same_v<T, GammaCdf>) {
                return c.shape / c.rate;
            } else {
                double acc = 0.0;
                for (std::size_t j = 0; j + 1 < c.values.size(); ++j) {
                    acc += 0.5 * ((1.0 - c.values[j]) + (1.0 - c.values[j + 1]));
                }
                return acc * c.step;
            }
        },
        f);
}

double upper_support(const ChunkCdf& f, const GridSpec& grid) {
    if (std::holds_alternative<DegenerateZero>(f)) return 0.0;
    if (const auto* d = std::get_if<DiscretizedCdf>(&f)) {
        return d->step * (d->values.size() - 1);
    }
    double shape = std::holds_alternative<ErlangCdf>(f) ? std::get<ErlangCdf>(f).shape
                                                        : std::get<GammaCdf>(f).shape;
    double rate = std::holds_alternative<ErlangCdf>(f) ? std::get<ErlangCdf>(f).rate
                                                       : std::get<GammaCdf>(f).rate;
    double t = (shape + 12.0 * std::sqrt(shape)) / rate;
    while (survival(f, t) > grid.tail_tol) t *= 1.5;
    return t;
}

namespace {

// single-packet log-MGF by numerical integration over cell masses
double mgf_log_numeric(const ServiceModel& model, double theta) {
    const int n = 1 << 14;
    double m1 = packet_mean(model);
    double sd1 = std::sqrt(packet_variance(model));
    double t_upper = m1 + 12.0 * sd1;
    for (int attempt = 0; attempt < 60; ++attempt) {
        double h = t_upper / n;
        double sum = 0.0;
        double prev = 0.0;
        for (int i = 0; i < n; ++i) {
            double next = packet_cdf(model, (i + 1) * h);
            sum += (next - prev) * std::exp(theta * (i + 0.5) * h);
            prev = next;
        }
        // tail control: remaining mass times the integrand at the boundary
        double tail = (1.0 - prev) * std::exp(theta * t_upper);
        if (theta <= 0.0 || tail < 1e-12 * sum) return std::log(sum);
        t_upper *= 2.0;
    }
    throw std::domain_error("mgf_log: integral did not stabilize (MGF may not exist at this theta)");
}

}  // namespace

double mgf_log(const ServiceModel& model, int k, double theta, const GridSpec&) {
    validate(model);
    if (k < 1) throw std::invalid_argument("mgf_log: k must be >= 1");
    if (theta == 0.0) return 0.0;
    return std::visit(
        [k, theta](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Exponential>) {
                if (theta >= m.rate) throw std::domain_error("mgf_log: theta at or past the rate boundary");
                return -k * std::log1p(-theta / m.rate);
            } else if constexpr (std::is_same_v<T, GammaService>) {
                if (theta >= m.rate) throw std::domain_error("mgf_log: theta at or past the rate boundary");
                return -k * m.shape * std::log1p(-theta / m.rate);
            } else if constexpr (std::is_same_v<T, WeibullService>) {
                if (m.shape == 1.0) {  // plain exponential with rate 1/scale
                    double rate = 1.0 / m.scale;
                    if (theta >= rate) throw std::domain_error("mgf_log: theta at or past the rate boundary");
                    return -k * std::log1p(-theta * m.scale);
                }
                if (m.shape < 1.0 && theta > 0.0) {
                    throw std::domain_error("mgf_log: Weibull shape < 1 has no MGF for theta > 0");
                }
                return k * mgf_log_numeric(ServiceModel{m}, theta);
            } else if constexpr (std::is_same_v<T, LogNormalService>) {
                if (theta > 0.0) throw std::domain_error("mgf_log: lognormal has no MGF for theta > 0");
                return k * mgf_log_numeric(ServiceModel{m}, theta);
            } else {
                throw std::invalid_argument("mgf_log: modulated models are not supported");
            }
        },
        model);
}

}  // namespace fjup

#include "fjup/service_model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fjup/specfun.hpp"

namespace fjup {

void MmppParams::validate() const {
    int m = states();
    if (m < 1) throw std::invalid_argument("MmppParams: no states");
    if (static_cast<int>(initial.size()) != m || static_cast<int>(trans.size()) != m) {
        throw std::invalid_argument("MmppParams: initial/trans size mismatch");
    }
    double pi_sum = 0.0;
    for (double p : initial) {
        if (p < 0.0) throw std::invalid_argument("MmppParams: negative initial probability");
        pi_sum += p;
    }
    if (std::fabs(pi_sum - 1.0) > 1e-8) throw std::invalid_argument("MmppParams: initial does not sum to 1");
    for (const auto& row : trans) {
        if (static_cast<int>(row.size()) != m) throw std::invalid_argument("MmppParams: ragged transition row");
        double s = 0.0;
        for (double p : row) {
            if (p < 0.0) throw std::invalid_argument("MmppParams: negative transition probability");
            s += p;
        }
        if (std::fabs(s - 1.0) > 1e-8) throw std::invalid_argument("MmppParams: transition row does not sum to 1");
    }
    for (double r : rates) {
        if (!(r > 0.0)) throw std::invalid_argument("MmppParams: rates must be positive");
    }
}

std::vector<double> stationary_distribution(const MmppParams& params) {
    params.validate();
    int m = params.states();
    std::vector<double> pi(m, 1.0 / m);
    std::vector<double> next(m);
    for (int it = 0; it < 20000; ++it) {
        for (int k = 0; k < m; ++k) {
            double s = 0.0;
            for (int j = 0; j < m; ++j) s += pi[j] * params.trans[j][k];
            next[k] = s;
        }
        double diff = 0.0;
        for (int k = 0; k < m; ++k) {
            diff += std::fabs(next[k] - pi[k]);
            pi[k] = next[k];
        }
        if (diff < 1e-15) break;
    }
    return pi;
}

double stationary_mean_rate(const MmppParams& params) {
    auto pi = stationary_distribution(params);
    double r = 0.0;
    for (int k = 0; k < params.states(); ++k) r += pi[k] * params.rates[k];
    return r;
}

void validate(const ServiceModel& model) {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Exponential>) {
                if (!(m.rate > 0.0)) throw std::invalid_argument("Exponential: rate must be positive");
            } else if constexpr (std::is_same_v<T, GammaService>) {
                if (!(m.shape > 0.0) || !(m.rate > 0.0)) {
                    throw std::invalid_argument("GammaService: shape and rate must be positive");
                }
            } else if constexpr (std::is_same_v<T, WeibullService>) {
                if (!(m.scale > 0.0) || !(m.shape > 0.0)) {
                    throw std::invalid_argument("WeibullService: scale and shape must be positive");
                }
            } else if constexpr (std::is_same_v<T, LogNormalService>) {
                if (!(m.sigma > 0.0)) throw std::invalid_argument("LogNormalService: sigma must be positive");
            } else {
                m.params.validate();
            }
        },
        model);
}

double packet_mean(const ServiceModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Exponential>) {
                return 1.0 / m.rate;
            } else if constexpr (std::is_same_v<T, GammaService>) {
                return m.shape / m.rate;
            } else if constexpr (std::is_same_v<T, WeibullService>) {
                return m.scale * std::tgamma(1.0 + 1.0 / m.shape);
            } else if constexpr (std::is_same_v<T, LogNormalService>) {
                return std::exp(m.mu + 0.5 * m.sigma * m.sigma);
            } else {
                throw std::invalid_argument("packet_mean: modulated model has no state-free packet law");
            }
        },
        model);
}

double packet_variance(const ServiceModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Exponential>) {
                return 1.0 / (m.rate * m.rate);
            } else if constexpr (std::is_same_v<T, GammaService>) {
                return m.shape / (m.rate * m.rate);
            } else if constexpr (std::is_same_v<T, WeibullService>) {
                double g1 = std::tgamma(1.0 + 1.0 / m.shape);
                double g2 = std::tgamma(1.0 + 2.0 / m.shape);
                return m.scale * m.scale * (g2 - g1 * g1);
            } else if constexpr (std::is_same_v<T, LogNormalService>) {
                double s2 = m.sigma * m.sigma;
                return (std::exp(s2) - 1.0) * std::exp(2.0 * m.mu + s2);
            } else {
                throw std::invalid_argument("packet_variance: modulated model has no state-free packet law");
            }
        },
        model);
}

double mean_service_rate(const ServiceModel& model) {
    if (const auto* mm = std::get_if<MarkovModulatedExp>(&model)) {
        return stationary_mean_rate(mm->params);
    }
    return 1.0 / packet_mean(model);
}

double packet_cdf(const ServiceModel& model, double x) {
    if (x <= 0.0) return 0.0;
    return std::visit(
        [x](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Exponential>) {
                return -std::expm1(-m.rate * x);
            } else if constexpr (std::is_same_v<T, GammaService>) {
                return reg_gamma_p(m.shape, m.rate * x);
            } else if constexpr (std::is_same_v<T, WeibullService>) {
                return -std::expm1(-std::pow(x / m.scale, m.shape));
            } else if constexpr (std::is_same_v<T, LogNormalService>) {
                return normal_cdf((std::log(x) - m.mu) / m.sigma);
            } else {
                throw std::invalid_argument("packet_cdf: modulated model has no state-free packet law");
            }
        },
        model);
}

bool is_iid(const ServiceModel& model) { return !std::holds_alternative<MarkovModulatedExp>(model); }

std::string describe(const ServiceModel& model) {
    std::ostringstream out;
    std::visit(
        [&out](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Exponential>) {
                out << "exponential(rate=" << m.rate << ")";
            } else if constexpr (std::is_same_v<T, GammaService>) {
                out << "gamma(shape=" << m.shape << ",rate=" << m.rate << ")";
            } else if constexpr (std::is_same_v<T, WeibullService>) {
                out << "weibull(scale=" << m.scale << ",shape=" << m.shape << ")";
            } else if constexpr (std::is_same_v<T, LogNormalService>) {
                out << "lognormal(mu=" << m.mu << ",sigma=" << m.sigma << ")";
            } else {
                out << "mmexp(states=" << m.params.states() << ")";
            }
        },
        model);
    return out.str();
}

}  // namespace fjup

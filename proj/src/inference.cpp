#include "fjup/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fjup/specfun.hpp"

namespace fjup {

GammaPosterior posterior_update(const GammaPosterior& post, int packets, double observed) {
    if (packets < 1) throw std::invalid_argument("posterior_update: packet count must be >= 1");
    if (!(observed > 0.0)) throw std::invalid_argument("posterior_update: observation must be positive");
    return GammaPosterior{post.shape + packets, post.rate + observed};
}

double predictive_mean(const GammaPosterior& post, int packets) {
    if (packets < 1) throw std::invalid_argument("predictive_mean: packet count must be >= 1");
    if (!(post.shape > 1.0)) {
        throw std::invalid_argument("predictive_mean: undefined for posterior shape <= 1");
    }
    return packets * post.rate / (post.shape - 1.0);
}

double sample_predictive(const GammaPosterior& post, int packets, KeyedRng& rng) {
    if (packets < 1) throw std::invalid_argument("sample_predictive: packet count must be >= 1");
    double lambda = rng.gamma(post.shape, post.rate);
    return rng.gamma(static_cast<double>(packets), lambda);
}

namespace {

void check_em_inputs(const std::vector<double>& x, const std::vector<int>& m, int states) {
    if (x.empty()) throw std::invalid_argument("em_fit: no observations");
    if (x.size() != m.size()) throw std::invalid_argument("em_fit: observations/shapes size mismatch");
    if (states < 1) throw std::invalid_argument("em_fit: need at least one state");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0)) throw std::invalid_argument("em_fit: observations must be positive");
        if (m[i] < 1) throw std::invalid_argument("em_fit: shapes must be >= 1");
    }
}

// log density of Gamma(shape m, rate lambda) at x
double gamma_loglik(double x, int m, double lambda) {
    return m * std::log(lambda) + (m - 1) * std::log(x) - lambda * x - log_factorial(m - 1);
}

// Lloyd iterations on y_i = log(x_i/m_i); cluster centers seed the rates
std::vector<double> kmeans_rates(const std::vector<double>& x, const std::vector<int>& m,
                                 int states, KeyedRng& rng) {
    const std::size_t n = x.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::log(x[i] / m[i]);

    std::vector<double> centers(states);
    for (int k = 0; k < states; ++k) {
        centers[k] = y[static_cast<std::size_t>(rng.uniform() * n) % n];
    }
    std::vector<int> owner(n, 0);
    for (int it = 0; it < 50; ++it) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            for (int k = 1; k < states; ++k) {
                if (std::fabs(y[i] - centers[k]) < std::fabs(y[i] - centers[best])) best = k;
            }
            if (best != owner[i]) {
                owner[i] = best;
                moved = true;
            }
        }
        for (int k = 0; k < states; ++k) {
            double sum = 0.0;
            int count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (owner[i] == k) {
                    sum += y[i];
                    ++count;
                }
            }
            if (count > 0) {
                centers[k] = sum / count;
            } else {
                centers[k] = y[static_cast<std::size_t>(rng.uniform() * n) % n];
            }
        }
        if (!moved && it > 0) break;
    }
    std::vector<double> rates(states);
    for (int k = 0; k < states; ++k) rates[k] = std::exp(-centers[k]);
    return rates;
}

struct EmRun {
    MmppParams params;
    std::vector<double> loglik;
    std::vector<std::string> warnings;
};

EmRun em_single(const std::vector<double>& x, const std::vector<int>& m, int states,
                int max_iterations, double tol, KeyedRng& rng) {
    const std::size_t T = x.size();
    const int M = states;

    EmRun run;
    MmppParams& p = run.params;
    p.initial.assign(M, 1.0 / M);
    p.rates = kmeans_rates(x, m, M, rng);
    p.trans.assign(M, std::vector<double>(M, M > 1 ? 0.2 / (M - 1) : 0.0));
    for (int k = 0; k < M; ++k) p.trans[k][k] = M > 1 ? 0.8 : 1.0;

    std::vector<std::vector<double>> logb(T, std::vector<double>(M));
    std::vector<std::vector<double>> b(T, std::vector<double>(M));
    std::vector<std::vector<double>> alpha(T, std::vector<double>(M));
    std::vector<std::vector<double>> beta(T, std::vector<double>(M));
    std::vector<double> scale(T);
    std::vector<double> bshift(T);

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iterations; ++it) {
        // E step: scaled forward-backward with per-step emission shifts
        for (std::size_t t = 0; t < T; ++t) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < M; ++k) {
                logb[t][k] = gamma_loglik(x[t], m[t], p.rates[k]);
                mx = std::max(mx, logb[t][k]);
            }
            bshift[t] = mx;
            for (int k = 0; k < M; ++k) b[t][k] = std::exp(logb[t][k] - mx);
        }
        double ll = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            double c = 0.0;
            for (int k = 0; k < M; ++k) {
                double a = 0.0;
                if (t == 0) {
                    a = p.initial[k];
                } else {
                    for (int j = 0; j < M; ++j) a += alpha[t - 1][j] * p.trans[j][k];
                }
                alpha[t][k] = a * b[t][k];
                c += alpha[t][k];
            }
            if (!(c > 0.0)) {
                throw std::runtime_error("em_fit: forward pass underflowed to zero mass");
            }
            for (int k = 0; k < M; ++k) alpha[t][k] /= c;
            scale[t] = c;
            ll += std::log(c) + bshift[t];
        }
        for (int k = 0; k < M; ++k) beta[T - 1][k] = 1.0;
        for (std::size_t t = T - 1; t-- > 0;) {
            for (int j = 0; j < M; ++j) {
                double s = 0.0;
                for (int k = 0; k < M; ++k) s += p.trans[j][k] * b[t + 1][k] * beta[t + 1][k];
                beta[t][j] = s / scale[t + 1];
            }
        }

        if (!run.loglik.empty() && ll < prev_ll - 1e-6 * (1.0 + std::fabs(prev_ll))) {
            throw std::logic_error("em_fit: log-likelihood decreased between iterations");
        }
        run.loglik.push_back(ll);
        bool converged = !(std::isinf(prev_ll)) && (ll - prev_ll) < tol;
        prev_ll = ll;

        // M step
        std::vector<double> zeta_sum(M, 0.0), zeta_m(M, 0.0), zeta_x(M, 0.0);
        std::vector<std::vector<double>> xi_sum(M, std::vector<double>(M, 0.0));
        std::vector<double> zeta_first(M, 0.0);
        std::vector<double> zeta_trans(M, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            for (int k = 0; k < M; ++k) {
                double z = alpha[t][k] * beta[t][k];
                if (t == 0) zeta_first[k] = z;
                zeta_sum[k] += z;
                zeta_m[k] += z * m[t];
                zeta_x[k] += z * x[t];
                if (t + 1 < T) zeta_trans[k] += z;
            }
            if (t + 1 < T) {
                for (int j = 0; j < M; ++j) {
                    for (int k = 0; k < M; ++k) {
                        xi_sum[j][k] += alpha[t][j] * p.trans[j][k] * b[t + 1][k] *
                                        beta[t + 1][k] / scale[t + 1];
                    }
                }
            }
        }
        double zf = std::accumulate(zeta_first.begin(), zeta_first.end(), 0.0);
        for (int k = 0; k < M; ++k) p.initial[k] = zeta_first[k] / zf;
        for (int j = 0; j < M; ++j) {
            if (T > 1 && zeta_trans[j] > 0.0) {
                for (int k = 0; k < M; ++k) p.trans[j][k] = xi_sum[j][k] / zeta_trans[j];
            }
            // rows drift off 1 by rounding; renormalize
            double rs = std::accumulate(p.trans[j].begin(), p.trans[j].end(), 0.0);
            for (int k = 0; k < M; ++k) p.trans[j][k] /= rs;
        }
        double global_rate =
            std::accumulate(m.begin(), m.end(), 0.0) / std::accumulate(x.begin(), x.end(), 0.0);
        for (int k = 0; k < M; ++k) {
            if (zeta_sum[k] < 1e-10 * T) {
                p.rates[k] = global_rate * std::exp(rng.normal() * 0.5);
                std::ostringstream w;
                w << "state " << k + 1 << " lost its responsibility mass at iteration " << it + 1
                  << "; re-seeded its rate near " << global_rate;
                run.warnings.push_back(w.str());
            } else {
                p.rates[k] = zeta_m[k] / zeta_x[k];
            }
        }
        if (converged) break;
    }
    return run;
}

void relabel_by_rate(MmppParams& p) {
    const int M = p.states();
    std::vector<int> order(M);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return p.rates[a] < p.rates[b]; });
    MmppParams q;
    q.initial.resize(M);
    q.rates.resize(M);
    q.trans.assign(M, std::vector<double>(M));
    for (int k = 0; k < M; ++k) {
        q.initial[k] = p.initial[order[k]];
        q.rates[k] = p.rates[order[k]];
        for (int j = 0; j < M; ++j) q.trans[k][j] = p.trans[order[k]][order[j]];
    }
    p = std::move(q);
}

}  // namespace

EmResult em_fit(const std::vector<double>& observations, const std::vector<int>& shapes,
                int states, int max_iterations, double tol, std::uint64_t seed, int restarts) {
    check_em_inputs(observations, shapes, states);
    if (max_iterations < 1) throw std::invalid_argument("em_fit: need at least one iteration");
    if (restarts < 1) throw std::invalid_argument("em_fit: need at least one restart");

    EmRun best;
    bool have = false;
    for (int r = 0; r < restarts; ++r) {
        KeyedRng rng(derive_seed(seed, 7, static_cast<std::uint64_t>(r)));
        EmRun run = em_single(observations, shapes, states, max_iterations, tol, rng);
        if (!have || run.loglik.back() > best.loglik.back()) {
            best = std::move(run);
            have = true;
        }
    }
    relabel_by_rate(best.params);
    best.params.validate();
    return EmResult{std::move(best.params), std::move(best.loglik), std::move(best.warnings)};
}

std::vector<int> viterbi_map(const std::vector<double>& observations,
                             const std::vector<int>& shapes, const MmppParams& params) {
    params.validate();
    if (observations.size() != shapes.size()) {
        throw std::invalid_argument("viterbi_map: observations/shapes size mismatch");
    }
    const std::size_t T = observations.size();
    const int M = params.states();
    if (T == 0) return {};

    auto emission = [&](std::size_t t, int k) {
        if (shapes[t] == 0) return 0.0;  // missing observation: transitions only
        return gamma_loglik(observations[t], shapes[t], params.rates[k]);
    };

    std::vector<std::vector<double>> score(T, std::vector<double>(M));
    std::vector<std::vector<int>> from(T, std::vector<int>(M, 0));
    for (int k = 0; k < M; ++k) {
        score[0][k] = std::log(std::max(params.initial[k], 1e-300)) + emission(0, k);
    }
    for (std::size_t t = 1; t < T; ++t) {
        for (int k = 0; k < M; ++k) {
            double bestv = -std::numeric_limits<double>::infinity();
            int bestj = 0;
            for (int j = 0; j < M; ++j) {
                double v = score[t - 1][j] + std::log(std::max(params.trans[j][k], 1e-300));
                if (v > bestv) {
                    bestv = v;
                    bestj = j;
                }
            }
            score[t][k] = bestv + emission(t, k);
            from[t][k] = bestj;
        }
    }
    std::vector<int> path(T);
    path[T - 1] = static_cast<int>(
        std::max_element(score[T - 1].begin(), score[T - 1].end()) - score[T - 1].begin());
    for (std::size_t t = T - 1; t-- > 0;) path[t] = from[t + 1][path[t + 1]];
    return path;
}

double resample_mm_service(const MmppParams& params, int state, int packets,
                           MmStepping stepping, KeyedRng& rng) {
    params.validate();
    if (state < 0 || state >= params.states()) {
        throw std::invalid_argument("resample_mm_service: state index out of range");
    }
    if (packets < 1) throw std::invalid_argument("resample_mm_service: packet count must be >= 1");
    if (stepping == MmStepping::PerChunk) {
        return rng.gamma(static_cast<double>(packets), params.rates[state]);
    }
    double s = 0.0;
    int z = state;
    for (int i = 0; i < packets; ++i) {
        s += rng.exponential(params.rates[z]);
        z = rng.categorical(params.trans[z]);
    }
    return s;
}

void save_mmpp(const std::string& path, const MmppParams& params) {
    params.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mmpp: cannot open " + path + " for writing");
    out.precision(17);
    const int M = params.states();
    out << "states " << M << "\n";
    out << "initial";
    for (double v : params.initial) out << ' ' << v;
    out << "\nrates";
    for (double v : params.rates) out << ' ' << v;
    out << '\n';
    for (int j = 0; j < M; ++j) {
        out << "trans";
        for (double v : params.trans[j]) out << ' ' << v;
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_mmpp: write to " + path + " failed");
}

MmppParams load_mmpp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_mmpp: cannot open " + path);
    MmppParams p;
    std::string key;
    int states = 0;
    if (!(in >> key >> states) || key != "states" || states < 1) {
        throw std::invalid_argument("load_mmpp: " + path + ": expected leading 'states <n>'");
    }
    auto read_row = [&](const std::string& want, std::vector<double>& row) {
        if (!(in >> key) || key != want) {
            throw std::invalid_argument("load_mmpp: " + path + ": expected '" + want + "' row");
        }
        row.resize(states);
        for (int i = 0; i < states; ++i) {
            if (!(in >> row[i])) {
                throw std::invalid_argument("load_mmpp: " + path + ": short '" + want + "' row");
            }
        }
    };
    read_row("initial", p.initial);
    read_row("rates", p.rates);
    p.trans.resize(states);
    for (int j = 0; j < states; ++j) read_row("trans", p.trans[j]);
    p.validate();
    return p;
}

}  // namespace fjup

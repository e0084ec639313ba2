#include "fjup/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fjup/csv.hpp"
#include "fjup/decay.hpp"
#include "fjup/inference.hpp"
#include "fjup/intermittent.hpp"
#include "fjup/order_stats.hpp"

namespace fjup {

namespace {

std::string out_path(const ExperimentConfig& cfg, const std::string& file) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / file).string();
}

std::uint64_t hash_of(const ExperimentConfig& cfg) {
    return config_hash(cfg.ini.source(), cfg.seed);
}

// optional list of overrides for path 1's exponential rate, shared by the
// sweep commands that regenerate one figure per rate
std::vector<double> rate1_values(const ExperimentConfig& cfg,
                                 const std::vector<ServiceModel>& models) {
    if (!cfg.ini.has("sweep", "rate1_values")) return {};
    std::vector<double> values = cfg.ini.get_doubles("sweep", "rate1_values");
    if (!std::holds_alternative<Exponential>(models[0])) {
        throw std::invalid_argument(
            "config: [sweep] rate1_values requires path 1 to be exponential");
    }
    for (double v : values) {
        if (!(v > 0.0)) throw std::invalid_argument("config: [sweep] rate1_values must be > 0");
    }
    return values;
}

double percentile(std::vector<double> sorted, double p) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    double idx = p * (sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(idx);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = idx - lo;
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

void parallel_replications(long count, const std::function<void(long)>& fn) {
    if (count <= 0) return;
    unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(),
                                          static_cast<unsigned>(count));
    if (workers <= 1) {
        for (long r = 0; r < count; ++r) fn(r);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            long r = next.fetch_add(1);
            if (r >= count) return;
            try {
                fn(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void cmd_intermittent_sweep(const ExperimentConfig& cfg) {
    PathConfig paths = parse_paths(cfg.ini);
    const int n = static_cast<int>(paths.services.size());
    if (n > 3) {
        throw std::invalid_argument("intermittent-sweep: supports 1-3 paths, got " +
                                    std::to_string(n));
    }
    for (const auto& m : paths.services) {
        if (!is_iid(m)) {
            throw std::invalid_argument("intermittent-sweep: needs i.i.d. path models");
        }
    }
    const int K = static_cast<int>(cfg.ini.get_long("sweep", "K"));
    if (K < 1) throw std::invalid_argument("config: [sweep] K must be >= 1");
    std::vector<double> rates = rate1_values(cfg, paths.services);
    const bool sweeping = !rates.empty();
    if (!sweeping) rates.push_back(0.0);  // single pass with the configured model
    cfg.ini.require_consumed();

    std::vector<std::string> columns;
    if (sweeping) columns.push_back("rate1");
    for (int i = 1; i <= n; ++i) columns.push_back("k" + std::to_string(i));
    columns.insert(columns.end(), {"psi", "optimal", "proportional"});
    CsvWriter csv(out_path(cfg, "intermittent_sweep.csv"), hash_of(cfg), columns);

    for (double r1 : rates) {
        std::vector<ServiceModel> models = paths.services;
        if (sweeping) models[0] = Exponential{r1};

        bool all_exp = true;
        std::vector<double> exp_rates;
        for (const auto& m : models) {
            if (const auto* e = std::get_if<Exponential>(&m)) {
                exp_rates.push_back(e->rate);
            } else {
                all_exp = false;
            }
        }
        auto psi = [&](const std::vector<int>& alloc) {
            return all_exp ? psi_exponential(alloc, exp_rates)
                           : mean_upload_latency(alloc, models, cfg.grid);
        };

        std::vector<std::vector<int>> allocations;
        std::vector<int> alloc(n, 0);
        std::function<void(int, int)> enumerate = [&](int path, int left) {
            if (path == n - 1) {
                alloc[path] = left;
                allocations.push_back(alloc);
                return;
            }
            for (int k = 0; k <= left; ++k) {
                alloc[path] = k;
                enumerate(path + 1, left - k);
            }
        };
        enumerate(0, K);

        std::vector<double> values(allocations.size());
        std::size_t best = 0;
        for (std::size_t i = 0; i < allocations.size(); ++i) {
            values[i] = psi(allocations[i]);
            if (values[i] < values[best]) best = i;
        }
        std::vector<double> weights;
        for (const auto& m : models) weights.push_back(mean_service_rate(m));
        std::vector<int> prop = proportional_allocation(weights, K);

        for (std::size_t i = 0; i < allocations.size(); ++i) {
            std::vector<std::string> cells;
            if (sweeping) cells.push_back(CsvWriter::num(r1));
            for (int k : allocations[i]) cells.push_back(CsvWriter::num(k));
            cells.push_back(CsvWriter::num(values[i]));
            cells.push_back(CsvWriter::num(static_cast<long>(i == best)));
            cells.push_back(CsvWriter::num(static_cast<long>(allocations[i] == prop)));
            csv.row(cells);
        }
    }
}

void cmd_sync_cost(const ExperimentConfig& cfg) {
    const int k_min = static_cast<int>(cfg.ini.get_long_or("sweep", "K_min", 2));
    const int k_max = static_cast<int>(cfg.ini.get_long("sweep", "K_max"));
    const double rate1 = cfg.ini.get_double_or("sweep", "rate1", 1.0);
    std::vector<double> rate2_list{rate1};
    if (cfg.ini.has("sweep", "rate2_values")) {
        rate2_list = cfg.ini.get_doubles("sweep", "rate2_values");
    }
    if (k_min < 1 || k_max < k_min) {
        throw std::invalid_argument("config: [sweep] need 1 <= K_min <= K_max");
    }
    if (!(rate1 > 0.0)) throw std::invalid_argument("config: [sweep] rate1 must be > 0");
    for (double r : rate2_list) {
        if (!(r > 0.0)) throw std::invalid_argument("config: [sweep] rate2_values must be > 0");
    }
    cfg.ini.require_consumed();

    CsvWriter csv(out_path(cfg, "sync_cost.csv"), hash_of(cfg),
                  {"rate2", "K", "chi", "valid", "crossing"});
    for (double rate2 : rate2_list) {
        std::vector<ServiceModel> models{Exponential{rate1}, Exponential{rate2}};
        bool crossed = false;
        for (int K = k_min; K <= k_max; ++K) {
            if (K < 2) {  // no all-positive two-path split exists
                csv.row({CsvWriter::num(rate2), CsvWriter::num(K), "nan", "0", "0"});
                continue;
            }
            double chi = synchronization_cost(K, models, cfg.grid);
            bool crossing = !crossed && chi < 0.0;
            if (crossing) crossed = true;
            csv.row({CsvWriter::num(rate2), CsvWriter::num(K), CsvWriter::num(chi), "1",
                     CsvWriter::num(static_cast<long>(crossing))});
        }
    }
}

void cmd_nr_trellis(const ExperimentConfig& cfg) {
    PathConfig paths = parse_paths(cfg.ini);
    const int n = static_cast<int>(paths.services.size());
    const int K = static_cast<int>(cfg.ini.get_long("sweep", "K"));
    if (K < 1) throw std::invalid_argument("config: [sweep] K must be >= 1");
    cfg.ini.require_consumed();

    NrOptimum opt = optimal_nr(n, K, paths.services, cfg.grid);

    std::vector<std::string> columns;
    for (int i = 1; i <= n; ++i) columns.push_back("k" + std::to_string(i));
    columns.insert(columns.end(), {"r", "eta", "regret", "optimal"});
    CsvWriter csv(out_path(cfg, "nr_trellis.csv"), hash_of(cfg), columns);
    for (const NrTableRow& row : opt.table) {
        std::vector<std::string> cells;
        for (int k : row.alloc) cells.push_back(CsvWriter::num(k));
        cells.push_back(CsvWriter::num(row.r));
        cells.push_back(CsvWriter::num(row.eta));
        cells.push_back(CsvWriter::num(row.regret));
        cells.push_back(
            CsvWriter::num(static_cast<long>(row.r == opt.r && row.alloc == opt.alloc)));
        csv.row(cells);
    }
}

void cmd_decay_sweep(const ExperimentConfig& cfg) {
    PathConfig paths = parse_paths(cfg.ini);
    const int n = static_cast<int>(paths.services.size());
    if (n > 2) {
        throw std::invalid_argument("decay-sweep: sweeps splits (k1, K-k1); supports 1-2 paths");
    }
    std::vector<std::string> arrival_spec = cfg.ini.get_tokens("traffic", "arrival");
    if (arrival_spec.size() != 2 || arrival_spec[0] == "mmpp") {
        throw std::invalid_argument("decay-sweep: needs renewal (i.i.d.) arrivals");
    }
    ServiceModel arrival =
        parse_service_model(cfg.ini, arrival_spec, "[traffic] arrival");
    if (!is_iid(arrival)) throw std::invalid_argument("decay-sweep: needs renewal arrivals");
    const int K = static_cast<int>(cfg.ini.get_long("sweep", "K"));
    if (K < 1) throw std::invalid_argument("config: [sweep] K must be >= 1");
    std::vector<double> rates = rate1_values(cfg, paths.services);
    const bool sweeping = !rates.empty();
    if (!sweeping) rates.push_back(0.0);
    cfg.ini.require_consumed();

    std::vector<std::string> columns;
    if (sweeping) columns.push_back("rate1");
    for (int i = 1; i <= n; ++i) columns.push_back("k" + std::to_string(i));
    for (int i = 1; i <= n; ++i) columns.push_back("theta" + std::to_string(i));
    columns.insert(columns.end(), {"theta_tilde", "stable"});
    CsvWriter csv(out_path(cfg, "decay_sweep.csv"), hash_of(cfg), columns);

    for (double r1 : rates) {
        std::vector<ServiceModel> models = paths.services;
        if (sweeping) models[0] = Exponential{r1};
        for (int k1 = (n == 1 ? K : 0); k1 <= K; ++k1) {
            std::vector<int> alloc{k1};
            if (n == 2) alloc.push_back(K - k1);
            DecayResult d = allocation_decay(alloc, models, arrival, cfg.grid);
            bool stable = true;
            for (std::size_t i = 0; i < alloc.size(); ++i) {
                if (alloc[i] > 0 && !d.stable[i]) stable = false;
            }
            std::vector<std::string> cells;
            if (sweeping) cells.push_back(CsvWriter::num(r1));
            for (int k : alloc) cells.push_back(CsvWriter::num(k));
            for (std::size_t i = 0; i < alloc.size(); ++i) {
                cells.push_back(d.stable[i] ? CsvWriter::num(d.thetas[i]) : "nan");
            }
            cells.push_back(stable ? CsvWriter::num(d.theta_tilde) : "nan");
            cells.push_back(CsvWriter::num(static_cast<long>(stable)));
            csv.row(cells);
        }
    }
}

std::unique_ptr<Scheduler> make_scheduler(const std::string& spec, const ExperimentConfig& cfg,
                                          const PathConfig& paths, std::uint64_t rep_seed) {
    const int n = static_cast<int>(paths.services.size());
    if (spec == "static") {
        return std::make_unique<StaticScheduler>(cfg.ini.get_doubles("scheduler", "static_x"));
    }
    if (spec == "proportional") {
        return std::make_unique<ProportionalScheduler>(paths.services);
    }
    if (spec == "batch_jsq") {
        return std::make_unique<BatchJsqScheduler>();
    }
    if (spec.rfind("adaptive", 0) == 0) {
        std::string sampler = "oracle";
        if (spec.size() > 8) {
            if (spec[8] != ':') {
                throw std::invalid_argument("config: bad scheduler spec '" + spec + "'");
            }
            sampler = spec.substr(9);
        }
        AdaptiveConfig ac;
        ac.eta = cfg.ini.get_double_or("scheduler", "eta", 1e-3);
        ac.samples = static_cast<int>(cfg.ini.get_long_or("scheduler", "samples", 100));
        ac.window_cap = static_cast<int>(cfg.ini.get_long_or("scheduler", "window_cap", 1000));
        ac.paper_sign = cfg.ini.get_bool_or("scheduler", "paper_sign", false);
        ac.truncate = cfg.ini.get_bool_or("scheduler", "truncate", true);
        ac.stepping = paths.stepping;
        ac.seed = rep_seed;
        if (sampler == "oracle") {
            ac.sampler = SamplerKind::Oracle;
            ac.oracle_models = paths.services;
        } else if (sampler == "iid_posterior") {
            ac.sampler = SamplerKind::Posterior;
            ac.prior.shape = cfg.ini.get_double_or("scheduler", "prior_shape", 1.0);
            ac.prior.rate = cfg.ini.get_double_or("scheduler", "prior_rate", 1.0);
        } else if (sampler == "mm_map") {
            ac.sampler = SamplerKind::MmMap;
            for (int i = 1; i <= n; ++i) {
                std::string key = "fitted_" + std::to_string(i);
                ac.fitted.push_back(load_mmpp(cfg.ini.resolve_path(cfg.ini.get("scheduler", key))));
            }
        } else if (sampler == "ose") {
            ac.sampler = SamplerKind::Ose;
        } else {
            throw std::invalid_argument("config: unknown adaptive sampler '" + sampler +
                                        "' (expected oracle|iid_posterior|mm_map|ose)");
        }
        return std::make_unique<AdaptiveScheduler>(n, std::move(ac));
    }
    throw std::invalid_argument("config: unknown scheduler '" + spec +
                                "' (expected static|proportional|batch_jsq|adaptive[:sampler])");
}

namespace {

std::string file_tag(const std::string& spec) {
    std::string tag = spec;
    std::replace(tag.begin(), tag.end(), ':', '_');
    return tag;
}

}  // namespace

void cmd_stream_experiment(const ExperimentConfig& cfg) {
    TrafficConfig traffic = parse_traffic(cfg.ini);
    PathConfig paths = parse_paths(cfg.ini);
    const int n = static_cast<int>(paths.services.size());
    const long reps = cfg.ini.get_long_or("traffic", "replications", 1);
    if (reps < 1) throw std::invalid_argument("config: [traffic] replications must be >= 1");
    const double warmup = cfg.ini.get_double_or("traffic", "warmup", 0.1);
    if (warmup < 0.0 || warmup >= 1.0) {
        throw std::invalid_argument("config: [traffic] warmup fraction out of [0,1)");
    }
    std::vector<std::string> schedulers = cfg.ini.get_tokens("scheduler", "schedulers");
    // touch every scheduler's keys once up front so require_consumed sees
    // them and bad specs fail before the first long simulation
    for (const std::string& spec : schedulers) make_scheduler(spec, cfg, paths, cfg.seed);
    cfg.ini.require_consumed();

    const std::uint64_t hash = hash_of(cfg);
    CsvWriter summary(out_path(cfg, "summary.csv"), hash,
                      {"scheduler", "replication", "batches", "mean_wait", "p50", "p95", "p99",
                       "max"});

    for (const std::string& spec : schedulers) {
        std::vector<std::vector<double>> rep_waits(reps);  // post-warmup samples
        std::vector<SimTrace> first_trace(1);
        std::vector<std::vector<std::vector<double>>> first_props(1);  // batch -> x

        parallel_replications(reps, [&](long rep) {
            TrafficConfig t = traffic;
            t.seed = replication_seed(cfg.seed, rep);
            std::unique_ptr<Scheduler> sched = make_scheduler(spec, cfg, paths, t.seed);
            auto* adaptive = dynamic_cast<AdaptiveScheduler*>(sched.get());
            std::vector<std::vector<double>> props;
            SimTrace trace;
            if (adaptive && rep == 0) {
                // record the post-update proportions after every batch
                props.reserve(t.horizon);
                trace = simulate(t, paths, *sched,
                                 [&](long) { props.push_back(adaptive->proportions()); });
            } else {
                trace = simulate(t, paths, *sched);
            }
            long skip = static_cast<long>(warmup * trace.batches());
            std::vector<double>& w = rep_waits[rep];
            w.reserve(trace.batches() - skip);
            for (long j = skip; j < trace.batches(); ++j) w.push_back(trace.wait[j]);
            if (rep == 0) {
                first_trace[0] = std::move(trace);
                first_props[0] = std::move(props);
            }
        });

        std::vector<double> pooled;
        for (long rep = 0; rep < reps; ++rep) {
            std::vector<double> sorted = rep_waits[rep];
            std::sort(sorted.begin(), sorted.end());
            double mean = 0.0;
            for (double w : sorted) mean += w;
            mean = sorted.empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : mean / sorted.size();
            summary.row({file_tag(spec), CsvWriter::num(rep),
                         CsvWriter::num(static_cast<long>(sorted.size())), CsvWriter::num(mean),
                         CsvWriter::num(percentile(sorted, 0.50)),
                         CsvWriter::num(percentile(sorted, 0.95)),
                         CsvWriter::num(percentile(sorted, 0.99)),
                         CsvWriter::num(sorted.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                       : sorted.back())});
            pooled.insert(pooled.end(), rep_waits[rep].begin(), rep_waits[rep].end());
        }

        std::sort(pooled.begin(), pooled.end());
        CsvWriter ccdf_csv(out_path(cfg, "ccdf_" + file_tag(spec) + ".csv"), hash,
                           {"sigma", "ccdf", "samples"});
        if (!pooled.empty()) {  // zero-horizon runs leave just the header
            double hi = percentile(pooled, 0.999);
            if (!(hi > 0.0)) hi = 1.0;
            std::vector<double> grid;
            for (int i = 0; i <= 200; ++i) grid.push_back(hi * i / 200.0);
            CcdfTable table = ccdf(pooled, grid);
            for (std::size_t i = 0; i < table.sigma.size(); ++i) {
                ccdf_csv.row({CsvWriter::num(table.sigma[i]), CsvWriter::num(table.prob[i]),
                              CsvWriter::num(static_cast<long>(table.samples))});
            }
        }

        if (!first_props[0].empty()) {
            std::vector<std::string> columns{"batch"};
            for (int i = 1; i <= n; ++i) columns.push_back("x" + std::to_string(i));
            for (int i = 1; i <= n; ++i) columns.push_back("k" + std::to_string(i));
            CsvWriter alloc_csv(out_path(cfg, "alloc_" + file_tag(spec) + ".csv"), hash, columns);
            const SimTrace& tr = first_trace[0];
            for (long j = 0; j < tr.batches(); ++j) {
                std::vector<std::string> cells{CsvWriter::num(j + 1)};
                // proportions recorded after each update; batch j was split
                // with the previous entry (the first batch with uniform x)
                for (int p = 0; p < n; ++p) {
                    double x = j == 0 ? 1.0 / n : first_props[0][j - 1][p];
                    cells.push_back(CsvWriter::num(x));
                }
                for (int p = 0; p < n; ++p) cells.push_back(CsvWriter::num(tr.alloc_at(j, p)));
                alloc_csv.row(cells);
            }
        }
    }
}

void cmd_train_mm(const ExperimentConfig& cfg) {
    std::string trace_path = cfg.ini.resolve_path(cfg.ini.get("train", "trace"));
    const int states = static_cast<int>(cfg.ini.get_long("train", "states"));
    const int max_iter = static_cast<int>(cfg.ini.get_long_or("train", "max_iterations", 200));
    const double tol = cfg.ini.get_double_or("train", "tol", 1e-8);
    const int restarts = static_cast<int>(cfg.ini.get_long_or("train", "restarts", 5));
    std::string params_name = cfg.ini.get_or("train", "out_params", "mm_params.txt");
    cfg.ini.require_consumed();

    std::ifstream in(trace_path);
    if (!in) throw std::invalid_argument("train-mm: cannot open trace '" + trace_path + "'");
    std::vector<double> obs;
    std::vector<int> shapes;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body = line;
        if (auto pos = body.find('#'); pos != std::string::npos) body = body.substr(0, pos);
        bool blank = true;
        for (char c : body) {
            if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        }
        if (blank) continue;
        std::replace(body.begin(), body.end(), ',', ' ');
        std::istringstream row(body);
        long m = 0;
        double x = 0.0;
        if (!(row >> m >> x)) {
            throw std::invalid_argument("train-mm: " + trace_path + ":" + std::to_string(lineno) +
                                        ": expected 'packets,time'");
        }
        std::string extra;
        if (row >> extra) {
            throw std::invalid_argument("train-mm: " + trace_path + ":" + std::to_string(lineno) +
                                        ": trailing field '" + extra + "'");
        }
        if (m < 1 || !(x > 0.0)) {
            throw std::invalid_argument("train-mm: " + trace_path + ":" + std::to_string(lineno) +
                                        ": need packets >= 1 and time > 0");
        }
        shapes.push_back(static_cast<int>(m));
        obs.push_back(x);
    }
    if (obs.empty()) throw std::invalid_argument("train-mm: trace '" + trace_path + "' is empty");

    EmResult fit = em_fit(obs, shapes, states, max_iter, tol, cfg.seed, restarts);
    for (const std::string& w : fit.warnings) std::cerr << "train-mm: warning: " << w << "\n";
    std::string params_path = out_path(cfg, params_name);
    save_mmpp(params_path, fit.params);
    std::cout << "observations: " << obs.size() << "\n";
    std::cout << "states: " << states << "\n";
    std::cout << "iterations: " << fit.loglik.size() << "\n";
    std::cout << "final log-likelihood: " << CsvWriter::num(fit.loglik.back()) << "\n";
    std::cout << "params: " << params_path << "\n";
}

}  // namespace fjup

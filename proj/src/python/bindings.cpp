// Python bindings over the core operations.  Service models cross the
// boundary as ('exp', rate) style tuples to keep the surface small; the
// heavy lifting stays in the C++ library.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <variant>

#include "fjup/decay.hpp"
#include "fjup/inference.hpp"
#include "fjup/intermittent.hpp"
#include "fjup/order_stats.hpp"
#include "fjup/scheduler.hpp"
#include "fjup/simulator.hpp"

namespace py = pybind11;

namespace {

fjup::ServiceModel model_from_tuple(const py::tuple& spec) {
    if (spec.size() < 1) throw std::invalid_argument("model spec: empty tuple");
    std::string kind = spec[0].cast<std::string>();
    auto arg = [&](std::size_t i) { return spec[i].cast<double>(); };
    fjup::ServiceModel model;
    if (kind == "exp" && spec.size() == 2) {
        model = fjup::Exponential{arg(1)};
    } else if (kind == "gamma" && spec.size() == 3) {
        model = fjup::GammaService{arg(1), arg(2)};
    } else if (kind == "weibull" && spec.size() == 3) {
        model = fjup::WeibullService{arg(1), arg(2)};
    } else if (kind == "lognormal" && spec.size() == 3) {
        model = fjup::LogNormalService{arg(1), arg(2)};
    } else {
        throw std::invalid_argument(
            "model spec: expected ('exp', rate), ('gamma', shape, rate), "
            "('weibull', scale, shape) or ('lognormal', mu, sigma)");
    }
    fjup::validate(model);
    return model;
}

std::vector<fjup::ServiceModel> models_from_list(const std::vector<py::tuple>& specs) {
    std::vector<fjup::ServiceModel> models;
    models.reserve(specs.size());
    for (const auto& s : specs) models.push_back(model_from_tuple(s));
    return models;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fork-join multipath upload toolkit (core bindings)";

    // --- intermittent case ------------------------------------------------
    m.def("psi_exponential", &fjup::psi_exponential, py::arg("alloc"), py::arg("rates"),
          "mean upload latency of an allocation over exponential paths");
    m.def(
        "mean_upload_latency",
        [](const std::vector<int>& alloc, const std::vector<py::tuple>& models) {
            return fjup::mean_upload_latency(alloc, models_from_list(models), fjup::GridSpec{});
        },
        py::arg("alloc"), py::arg("models"),
        "mean upload latency via the order-statistics operators");
    m.def(
        "optimal_two_path_exponential",
        [](int K, double rate1, double rate2) {
            int k1 = fjup::optimal_two_path_exponential(K, rate1, rate2);
            return py::make_tuple(k1, K - k1);
        },
        py::arg("K"), py::arg("rate1"), py::arg("rate2"));
    m.def("proportional_allocation", &fjup::proportional_allocation, py::arg("mean_rates"),
          py::arg("K"));
    m.def(
        "synchronization_cost",
        [](int K, const std::vector<py::tuple>& models) {
            return fjup::synchronization_cost(K, models_from_list(models), fjup::GridSpec{});
        },
        py::arg("K"), py::arg("models"),
        "best all-positive split latency minus replication latency");
    m.def(
        "optimal_nr",
        [](int paths, int K, const std::vector<py::tuple>& models) {
            fjup::NrOptimum opt =
                fjup::optimal_nr(paths, K, models_from_list(models), fjup::GridSpec{});
            py::dict out;
            out["r"] = opt.r;
            out["alloc"] = opt.alloc;
            out["eta"] = opt.eta;
            return out;
        },
        py::arg("paths"), py::arg("K"), py::arg("models"));
    m.def("chernoff_comparison_bound", &fjup::chernoff_comparison_bound, py::arg("k1"),
          py::arg("k2"), py::arg("rate1"), py::arg("rate2"));

    // --- steady-state bounds ----------------------------------------------
    m.def(
        "path_decay_rate",
        [](const py::tuple& service, int k, const py::tuple& arrival) -> std::optional<double> {
            return fjup::path_decay_rate(model_from_tuple(service), k, model_from_tuple(arrival),
                                         fjup::GridSpec{});
        },
        py::arg("service"), py::arg("k"), py::arg("arrival"),
        "Kingman decay rate of one path, or None when unstable");
    m.def(
        "tail_bound",
        [](const std::vector<int>& alloc, const std::vector<py::tuple>& services,
           const py::tuple& arrival, double sigma) {
            return fjup::tail_bound(alloc, models_from_list(services), model_from_tuple(arrival),
                                    sigma, fjup::GridSpec{});
        },
        py::arg("alloc"), py::arg("services"), py::arg("arrival"), py::arg("sigma"));

    // --- simulation ---------------------------------------------------------
    m.def(
        "simulate_mean_wait",
        [](const std::vector<py::tuple>& services, double arrival_rate, int batch_size,
           long horizon, std::uint64_t seed, const std::string& scheduler, double warmup) {
            fjup::TrafficConfig traffic;
            traffic.arrival = fjup::ExpArrivals{arrival_rate};
            traffic.batch = fjup::FixedBatch{batch_size};
            traffic.horizon = horizon;
            traffic.seed = seed;
            fjup::PathConfig paths;
            paths.services = models_from_list(services);
            std::unique_ptr<fjup::Scheduler> sched;
            if (scheduler == "proportional") {
                sched = std::make_unique<fjup::ProportionalScheduler>(paths.services);
            } else if (scheduler == "batch_jsq") {
                sched = std::make_unique<fjup::BatchJsqScheduler>();
            } else {
                throw std::invalid_argument("scheduler: expected proportional|batch_jsq");
            }
            fjup::SimTrace trace = fjup::simulate(traffic, paths, *sched);
            long skip = static_cast<long>(warmup * trace.batches());
            double mean = 0.0;
            long count = 0;
            for (long j = skip; j < trace.batches(); ++j) {
                mean += trace.wait[j];
                ++count;
            }
            return count ? mean / count : 0.0;
        },
        py::arg("services"), py::arg("arrival_rate"), py::arg("batch_size"), py::arg("horizon"),
        py::arg("seed") = 1, py::arg("scheduler") = "proportional", py::arg("warmup") = 0.1);

    // --- adaptive pieces ----------------------------------------------------
    m.def("project_simplex", &fjup::project_simplex, py::arg("v"));
    m.def("round_allocation", &fjup::round_allocation, py::arg("x"), py::arg("K"));

    // --- inference ------------------------------------------------------------
    py::class_<fjup::GammaPosterior>(m, "GammaPosterior")
        .def(py::init([](double shape, double rate) {
                 return fjup::GammaPosterior{shape, rate};
             }),
             py::arg("shape") = 1.0, py::arg("rate") = 1.0)
        .def_readwrite("shape", &fjup::GammaPosterior::shape)
        .def_readwrite("rate", &fjup::GammaPosterior::rate);
    m.def("posterior_update", &fjup::posterior_update, py::arg("post"), py::arg("packets"),
          py::arg("observed"));
    m.def("predictive_mean", &fjup::predictive_mean, py::arg("post"), py::arg("packets"));
    m.def(
        "em_fit",
        [](const std::vector<double>& obs, const std::vector<int>& shapes, int states,
           int max_iterations, double tol, std::uint64_t seed, int restarts) {
            fjup::EmResult fit = fjup::em_fit(obs, shapes, states, max_iterations, tol, seed,
                                              restarts);
            py::dict out;
            out["rates"] = fit.params.rates;
            out["initial"] = fit.params.initial;
            out["trans"] = fit.params.trans;
            out["loglik"] = fit.loglik;
            out["warnings"] = fit.warnings;
            return out;
        },
        py::arg("observations"), py::arg("shapes"), py::arg("states"),
        py::arg("max_iterations") = 200, py::arg("tol") = 1e-8, py::arg("seed") = 0,
        py::arg("restarts") = 5);
    m.def(
        "viterbi_map",
        [](const std::vector<double>& obs, const std::vector<int>& shapes,
           const std::vector<double>& initial, const std::vector<std::vector<double>>& trans,
           const std::vector<double>& rates) {
            fjup::MmppParams p;
            p.initial = initial;
            p.trans = trans;
            p.rates = rates;
            p.validate();
            return fjup::viterbi_map(obs, shapes, p);
        },
        py::arg("observations"), py::arg("shapes"), py::arg("initial"), py::arg("trans"),
        py::arg("rates"));
}

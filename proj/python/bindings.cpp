#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "critbatch/fit.hpp"
#include "critbatch/io.hpp"
#include "critbatch/optimizer.hpp"
#include "critbatch/problem.hpp"
#include "critbatch/rng.hpp"
#include "critbatch/sweep.hpp"
#include "critbatch/theory.hpp"

namespace py = pybind11;
using namespace critbatch;

PYBIND11_MODULE(_critbatch, m) {
    m.doc() = "Batch-size scaling toolkit: optimizers, closed-form bounds, sweeps, fits";

    py::class_<RngStream>(m, "RngStream")
        .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream_id") = 0)
        .def("uniform", &RngStream::uniform)
        .def("normal", &RngStream::normal)
        .def("uniform_below", &RngStream::uniform_below);

    py::class_<Problem>(m, "Problem")
        .def_static("from_json", &problem_from_json, py::arg("json_text"))
        .def("to_json", &problem_to_json)
        .def_readonly("n", &Problem::n)
        .def_readonly("d", &Problem::d)
        .def_property_readonly("kind",
                               [](const Problem& p) { return problem_kind_name(p.kind); })
        .def_property_readonly("minimizer_hint",
                               [](const Problem& p) { return p.minimizer_hint; })
        .def("per_example_loss", &Problem::per_example_loss);

    m.def("sample_batch", &sample_batch, py::arg("problem"), py::arg("b"), py::arg("rng"));
    m.def("minibatch_gradient", &minibatch_gradient);
    m.def("full_gradient", &full_gradient);
    m.def("full_loss", &full_loss);
    m.def("controlled_oracle_gradient", &controlled_oracle_gradient, py::arg("problem"),
          py::arg("theta"), py::arg("sigma2"), py::arg("b"), py::arg("rng"));

    py::class_<OptimizerConfig>(m, "OptimizerConfig")
        .def_static("from_json", &optimizer_config_from_json)
        .def("to_json", &optimizer_config_to_json)
        .def_readonly("alpha", &OptimizerConfig::alpha)
        .def_readonly("beta1", &OptimizerConfig::beta1)
        .def_readonly("beta2", &OptimizerConfig::beta2)
        .def_readonly("delta", &OptimizerConfig::delta)
        .def_readonly("amsgrad", &OptimizerConfig::amsgrad);

    py::class_<OptimizerState>(m, "OptimizerState")
        .def_static("init", &OptimizerState::init, py::arg("theta0"))
        .def_readonly("theta", &OptimizerState::theta)
        .def_readonly("m", &OptimizerState::m)
        .def_readonly("v", &OptimizerState::v)
        .def_readonly("v_hat_max", &OptimizerState::v_hat_max)
        .def_readonly("k", &OptimizerState::k);

    m.def("sgd_step", &sgd_step);
    m.def("momentum_step", &momentum_step);
    m.def("adam_step", &adam_step);
    m.def("optimizer_step", &optimizer_step);

    py::class_<BoundConstants>(m, "BoundConstants")
        .def_static("from_json", &bound_constants_from_json)
        .def("to_json", &bound_constants_to_json);

    py::class_<ConstantsTriple>(m, "ConstantsTriple")
        .def(py::init([](double c1, double c2, double c3, const std::string& method) {
                 return ConstantsTriple{c1, c2, c3, method_from_name(method)};
             }),
             py::arg("c1"), py::arg("c2"), py::arg("c3"), py::arg("method") = "sgd")
        .def_readonly("c1", &ConstantsTriple::c1)
        .def_readonly("c2", &ConstantsTriple::c2)
        .def_readonly("c3", &ConstantsTriple::c3);

    m.def("constants_for",
          [](const std::string& method, const BoundConstants& bc) {
              return constants_for(method_from_name(method), bc);
          },
          py::arg("method"), py::arg("constants"));
    m.def("h_term", &h_term, py::arg("beta1"), py::arg("dist"), py::arg("G"), py::arg("sigma2"));
    m.def("vi_upper_bound", &vi_upper_bound, py::arg("triple"), py::arg("K"), py::arg("b"));
    m.def("vi_upper_bound_adam_perstep", &vi_upper_bound_adam_perstep);
    m.def("steps_K", &steps_K, py::arg("triple"), py::arg("eps"), py::arg("b"));
    m.def("sfo", &sfo, py::arg("triple"), py::arg("eps"), py::arg("b"));
    m.def("critical_batch", &critical_batch, py::arg("triple"), py::arg("eps"));
    m.def("sfo_at_critical_batch", &sfo_at_critical_batch);
    m.def("derivative_checks", [](const ConstantsTriple& c, double eps, double b) {
        const auto der = derivative_checks(c, eps, b);
        return py::dict(py::arg("dK") = der.dK, py::arg("d2K") = der.d2K,
                        py::arg("dSFO") = der.dSFO, py::arg("d2SFO") = der.d2SFO);
    });
    m.def("practical_lower_bounds",
          [](double s2S, double s2M, double s2A, double alpha, double beta1, double v_star,
             double eps) {
              const auto b = practical_lower_bounds(s2S, s2M, s2A, alpha, beta1, v_star, eps);
              return py::dict(py::arg("bS") = b.bS, py::arg("bM") = b.bM, py::arg("bA") = b.bA);
          });
    m.def("estimate_adam_batch", &estimate_adam_batch, py::arg("sigma2"), py::arg("n"),
          py::arg("d"), py::arg("eps"));

    py::class_<SweepConfig>(m, "SweepConfig")
        .def_static("from_json", &sweep_config_from_json)
        .def("to_json", &sweep_config_to_json);

    py::class_<SweepRecord>(m, "SweepRecord")
        .def_property_readonly("method",
                               [](const SweepRecord& r) { return std::string(method_name(r.method)); })
        .def_readonly("b", &SweepRecord::b)
        .def_readonly("steps", &SweepRecord::steps)
        .def_readonly("sfo", &SweepRecord::sfo)
        .def_readonly("final_loss", &SweepRecord::final_loss)
        .def_readonly("seed", &SweepRecord::seed)
        .def_property_readonly("status",
                               [](const SweepRecord& r) { return std::string(run_status_name(r.status)); });

    py::class_<BatchAggregate>(m, "BatchAggregate")
        .def_readonly("b", &BatchAggregate::b)
        .def_readonly("median_steps", &BatchAggregate::median_steps)
        .def_readonly("median_sfo", &BatchAggregate::median_sfo)
        .def_readonly("reached", &BatchAggregate::reached)
        .def_readonly("unreached", &BatchAggregate::unreached)
        .def_readonly("diverged", &BatchAggregate::diverged)
        .def_readonly("has_median", &BatchAggregate::has_median);

    m.def("aggregate_records", &aggregate_records);

    m.def("run_to_threshold",
          [](const SweepConfig& cfg, std::int64_t b, std::uint64_t seed) {
              return run_to_threshold(cfg, b, seed);
          },
          py::arg("config"), py::arg("b"), py::arg("seed"));
    m.def("run_sweep", &run_sweep, py::arg("config"), py::arg("jobs") = 1,
          py::call_guard<py::gil_scoped_release>());
    m.def("records_to_csv", &records_to_csv, py::arg("records"), py::arg("include_timing") = false);
    m.def("records_from_csv", &records_from_csv);
    m.def("vi_metric", &vi_metric, py::arg("trajectory"), py::arg("theta_ref"), py::arg("problem"));

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("a_hat", &FitResult::a_hat)
        .def_readonly("c_hat", &FitResult::c_hat)
        .def_readonly("b_star_hat", &FitResult::b_star_hat)
        .def_readonly("rel_rmse", &FitResult::rel_rmse)
        .def_readonly("n_points", &FitResult::n_points)
        .def_readonly("degenerate", &FitResult::degenerate);

    m.def("fit_k_points", [](const std::vector<std::pair<double, double>>& pts) {
        std::vector<FitPoint> points;
        points.reserve(pts.size());
        for (const auto& [b, k] : pts) points.push_back({b, k});
        return fit_k_points(points);
    });
    m.def("fit_k_model", &fit_k_model);
    m.def("empirical_argmin_sfo", [](const std::vector<SweepRecord>& records) {
        const auto r = empirical_argmin_sfo(records);
        return py::dict(py::arg("b") = r.b, py::arg("sfo") = r.sfo);
    });

    m.attr("__version__") = kToolVersion;
}

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "firecast/boosting.hpp"
#include "firecast/distributions.hpp"
#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"
#include "firecast/scoring.hpp"

namespace py = pybind11;
using namespace firecast;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the firecast two-stage wildfire forecasting library";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  // distributions
  m.def("egp_cdf", py::vectorize([](double y, double sigma, double xi, double kappa) {
          return dist::egp_cdf(y, {sigma, xi, kappa});
        }),
        py::arg("y"), py::arg("sigma"), py::arg("xi"), py::arg("kappa"));
  m.def("egp_pdf", py::vectorize([](double y, double sigma, double xi, double kappa) {
          return dist::egp_pdf(y, {sigma, xi, kappa});
        }),
        py::arg("y"), py::arg("sigma"), py::arg("xi"), py::arg("kappa"));
  m.def("egp_quantile", py::vectorize([](double u, double sigma, double xi, double kappa) {
          return dist::egp_quantile(u, {sigma, xi, kappa});
        }),
        py::arg("u"), py::arg("sigma"), py::arg("xi"), py::arg("kappa"));
  m.def(
      "egp_sample",
      [](std::size_t n, double sigma, double xi, double kappa, std::uint64_t seed) {
        return dist::egp_sample(n, {sigma, xi, kappa}, seed);
      },
      py::arg("n"), py::arg("sigma"), py::arg("xi"), py::arg("kappa"), py::arg("seed"));
  m.def(
      "egp_sigma_from_eta",
      [](double eta, double xi, double kappa, double alpha) { return dist::egp_sigma_from_eta({alpha, eta}, xi, kappa); },
      py::arg("eta"), py::arg("xi"), py::arg("kappa"), py::arg("alpha") = 0.5);
  m.def(
      "trunc_poisson_pmf", [](long long y, double lambda) { return dist::trunc_poisson_pmf(y, {lambda}); },
      py::arg("y"), py::arg("lam"));
  m.def(
      "pc_prior_xi",
      [](double xi, double rate, double low, double high) {
        dist::PcPriorConfig c;
        c.rate = rate;
        c.xi_low = low;
        c.xi_high = high;
        return dist::pc_prior_xi(xi, c);
      },
      py::arg("xi"), py::arg("rate") = 10.0, py::arg("xi_low") = -0.5, py::arg("xi_high") = 0.5);
  m.def("pc_prior_kappa_exact", &dist::pc_prior_kappa_exact, py::arg("kappa"), py::arg("rate"));
  m.def("pc_prior_kappa_approx", &dist::pc_prior_kappa_approx, py::arg("kappa"), py::arg("rate"));

  // scoring
  m.def("auc", &scoring::auc, py::arg("labels"), py::arg("scores"));
  m.def(
      "crps_from_samples",
      [](std::vector<double> samples, double y, bool fair) {
        return scoring::crps_from_samples(std::move(samples), y,
                                          fair ? scoring::CrpsEstimator::Fair : scoring::CrpsEstimator::Empirical);
      },
      py::arg("samples"), py::arg("y"), py::arg("fair") = true);

  // boosting
  py::enum_<gbm::Loss>(m, "Loss")
      .value("Poisson", gbm::Loss::Poisson)
      .value("Tweedie", gbm::Loss::Tweedie)
      .value("SquaredError", gbm::Loss::SquaredError);
  py::class_<gbm::BoostConfig>(m, "BoostConfig")
      .def(py::init([](int n_trees, double learning_rate, int max_depth, gbm::Loss loss, double tweedie_power,
                       double min_child_weight, double reg_lambda, double row_subsample, double col_subsample) {
             gbm::BoostConfig c;
             c.n_trees = n_trees;
             c.learning_rate = learning_rate;
             c.max_depth = max_depth;
             c.loss = {loss, tweedie_power};
             c.min_child_weight = min_child_weight;
             c.reg_lambda = reg_lambda;
             c.row_subsample = row_subsample;
             c.col_subsample = col_subsample;
             c.validate();
             return c;
           }),
           py::arg("n_trees") = 100, py::arg("learning_rate") = 0.1, py::arg("max_depth") = 4,
           py::arg("loss") = gbm::Loss::Poisson, py::arg("tweedie_power") = 1.5, py::arg("min_child_weight") = 1.0,
           py::arg("reg_lambda") = 1.0, py::arg("row_subsample") = 1.0, py::arg("col_subsample") = 1.0)
      .def_readwrite("n_trees", &gbm::BoostConfig::n_trees)
      .def_readwrite("learning_rate", &gbm::BoostConfig::learning_rate)
      .def_readwrite("max_depth", &gbm::BoostConfig::max_depth);
  py::class_<gbm::TreeEnsemble>(m, "TreeEnsemble")
      .def("predict", py::overload_cast<const Eigen::MatrixXd&>(&gbm::TreeEnsemble::predict, py::const_), py::arg("x"))
      .def("predict_raw", py::overload_cast<const Eigen::MatrixXd&>(&gbm::TreeEnsemble::predict_raw, py::const_),
           py::arg("x"))
      .def_readonly("feature_names", &gbm::TreeEnsemble::feature_names)
      .def("to_json", [](const gbm::TreeEnsemble& e) { return gbm::to_json(e); })
      .def_static("from_json", &gbm::ensemble_from_json)
      .def(
          "shap_values",
          [](const gbm::TreeEnsemble& e, const std::vector<double>& x) {
            const auto a = gbm::shap_values(e, x);
            return py::make_tuple(a.phi, a.base_value);
          },
          py::arg("x"))
      .def(
          "mean_abs_shap", [](const gbm::TreeEnsemble& e, const Eigen::MatrixXd& x) { return gbm::mean_abs_shap(e, x); },
          py::arg("x"));
  m.def("train", [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const gbm::BoostConfig& cfg, std::uint64_t seed,
                    const std::vector<std::string>& names) { return gbm::train(x, y, cfg, seed, names); },
        py::arg("x"), py::arg("y"), py::arg("config"), py::arg("seed"), py::arg("feature_names") = std::vector<std::string>{});

  // pipeline
  m.def(
      "simulate",
      [](const std::filesystem::path& out, std::uint64_t seed, int rows, int cols, int district_rows, int district_cols) {
        pipeline::SyntheticSpec spec;
        spec.rows = rows;
        spec.cols = cols;
        spec.district_rows = district_rows;
        spec.district_cols = district_cols;
        spec.validate();
        const auto data = pipeline::simulate(spec, seed);
        pipeline::write_synthetic(data, pipeline::synthetic_config(spec, seed), out);
        return out / "config.json";
      },
      py::arg("out"), py::arg("seed"), py::arg("rows") = 6, py::arg("cols") = 6, py::arg("district_rows") = 3,
      py::arg("district_cols") = 3,
      "Write a synthetic data set and its config; returns the config path.");
  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config, const std::filesystem::path& run_dir) {
        const auto cfg = pipeline::load_config(config);
        py::gil_scoped_release release;
        pipeline::run_pipeline(cfg, run_dir);
      },
      py::arg("config"), py::arg("run_dir"));
  m.def(
      "validate_config", [](const std::filesystem::path& config) { return pipeline::config_to_json(pipeline::load_config(config)); },
      py::arg("config"), "Parse and validate a config file; returns the normalised JSON.");
  m.def("sha256_hex", [](const py::bytes& b) { return pipeline::sha256_hex(std::string(b)); });
}

#include <charconv>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"

namespace firecast::pipeline {

using nlohmann::json;

int parse_month(const std::string& text, const features::StudyWindow& window) {
  int year = 0, month = 0;
  const char* b = text.data();
  const char* e = b + text.size();
  auto r1 = std::from_chars(b, e, year);
  if (r1.ec != std::errc() || r1.ptr == e || *r1.ptr != '-') throw ConfigError("expected YYYY-MM, got '" + text + "'");
  auto r2 = std::from_chars(r1.ptr + 1, e, month);
  if (r2.ec != std::errc() || r2.ptr != e || month < 1 || month > 12)
    throw ConfigError("expected YYYY-MM, got '" + text + "'");
  const int t = window.index_of(year, month);
  if (t < 0) throw ConfigError("month " + text + " lies outside the study window");
  return t;
}

std::string format_month(int t, const features::StudyWindow& window) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", window.year_of(t), window.month_of(t));
  return buf;
}

void PipelineConfig::validate() const {
  if (window.n_months < 2) throw ConfigError("config: study window needs at least two months");
  if (window.start_month < 1 || window.start_month > 12) throw ConfigError("config: window start month outside 1..12");
  if (train_end < 0 || train_end >= window.n_months) throw ConfigError("config: train_end outside the window");
  if (test_start <= train_end) throw ConfigError("config: test range must start after train_end");
  if (test_end < test_start || test_end >= window.n_months) throw ConfigError("config: invalid test range");
  features.validate();
  if (horizons.empty()) throw ConfigError("config: no forecast horizon");
  for (int h : horizons)
    if (h < 1) throw ConfigError("config: horizons must be >= 1");
  if (n_folds < 2) throw ConfigError("config: need at least two folds");
  if (count_grid.empty() || area_grid.empty()) throw ConfigError("config: boosting grids must not be empty");
  for (const auto& g : count_grid) g.validate();
  for (const auto& g : area_grid) g.validate();
  hurdle.validate();
  if (n_samples < 1) throw ConfigError("config: samples must be positive");
  score.validate();
  if (shap_top < 1) throw ConfigError("config: shap_top must be positive");
}

std::filesystem::path PipelineConfig::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base_dir / path).lexically_normal();
}

namespace {

const char* loss_name(gbm::Loss l) {
  switch (l) {
    case gbm::Loss::Poisson: return "poisson";
    case gbm::Loss::Tweedie: return "tweedie";
    case gbm::Loss::SquaredError: return "squared_error";
  }
  return "";
}

gbm::Loss loss_from(const std::string& s) {
  if (s == "poisson") return gbm::Loss::Poisson;
  if (s == "tweedie") return gbm::Loss::Tweedie;
  if (s == "squared_error") return gbm::Loss::SquaredError;
  throw ConfigError("unknown boosting loss '" + s + "'");
}

json boost_json(const gbm::BoostConfig& c) {
  return {{"n_trees", c.n_trees},
          {"learning_rate", c.learning_rate},
          {"max_depth", c.max_depth},
          {"min_child_weight", c.min_child_weight},
          {"reg_lambda", c.reg_lambda},
          {"reg_gamma", c.reg_gamma},
          {"loss", loss_name(c.loss.loss)},
          {"tweedie_power", c.loss.tweedie_power},
          {"row_subsample", c.row_subsample},
          {"col_subsample", c.col_subsample}};
}

gbm::BoostConfig boost_from(const json& j, gbm::Loss default_loss) {
  gbm::BoostConfig c;
  c.loss.loss = default_loss;
  c.n_trees = j.value("n_trees", c.n_trees);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.min_child_weight = j.value("min_child_weight", c.min_child_weight);
  c.reg_lambda = j.value("reg_lambda", c.reg_lambda);
  c.reg_gamma = j.value("reg_gamma", c.reg_gamma);
  if (j.contains("loss")) c.loss.loss = loss_from(j.at("loss").get<std::string>());
  c.loss.tweedie_power = j.value("tweedie_power", c.loss.tweedie_power);
  c.row_subsample = j.value("row_subsample", c.row_subsample);
  c.col_subsample = j.value("col_subsample", c.col_subsample);
  return c;
}

std::vector<gbm::BoostConfig> default_grid(gbm::Loss loss) {
  std::vector<gbm::BoostConfig> g(2);
  for (auto& c : g) {
    c.loss.loss = loss;
    c.n_trees = 100;
    c.learning_rate = 0.1;
  }
  g[0].max_depth = 3;
  g[1].max_depth = 5;
  return g;
}

const char* strategy_name(latent::GridStrategy s) {
  switch (s) {
    case latent::GridStrategy::ModeOnly: return "mode";
    case latent::GridStrategy::Axial: return "axial";
    case latent::GridStrategy::CCD: return "ccd";
  }
  return "";
}

latent::GridStrategy strategy_from(const std::string& s) {
  if (s == "mode") return latent::GridStrategy::ModeOnly;
  if (s == "axial") return latent::GridStrategy::Axial;
  if (s == "ccd") return latent::GridStrategy::CCD;
  throw ConfigError("unknown grid strategy '" + s + "' (expected mode, axial or ccd)");
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  c.base_dir = base_dir;
  try {
    if (!j.contains("seed")) throw ConfigError("config: seed is mandatory");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("data")) {
      const auto& d = j.at("data");
      read_opt(d, "events", c.data.events);
      read_opt(d, "units", c.data.units);
      read_opt(d, "covariates", c.data.covariates);
      read_opt(d, "council_adjacency", c.data.council_adjacency);
      read_opt(d, "district_adjacency", c.data.district_adjacency);
    }
    const auto& w = j.at("window");
    {
      const std::string start = w.at("start").get<std::string>();
      features::StudyWindow probe{1, 1, 1};
      if (start.size() != 7 || start[4] != '-') throw ConfigError("window start must be YYYY-MM");
      probe.start_year = std::stoi(start.substr(0, 4));
      probe.start_month = std::stoi(start.substr(5, 2));
      c.window = probe;
      c.window.n_months = w.at("months").get<int>();
      if (c.window.start_month < 1 || c.window.start_month > 12) throw ConfigError("window start month outside 1..12");
    }
    const auto& s = j.at("split");
    c.train_end = parse_month(s.at("train_end").get<std::string>(), c.window);
    c.test_start = parse_month(s.at("test_start").get<std::string>(), c.window);
    c.test_end = parse_month(s.at("test_end").get<std::string>(), c.window);
    if (j.contains("filter")) {
      read_opt(j.at("filter"), "min_area", c.filter.min_area);
      read_opt(j.at("filter"), "min_duration", c.filter.min_duration);
    }
    if (j.contains("features")) {
      const auto& f = j.at("features");
      read_opt(f, "window", c.features.window);
      read_opt(f, "lags", c.features.lags);
      read_opt(f, "ma_spans", c.features.ma_spans);
      read_opt(f, "hist_spans", c.features.hist_spans);
      read_opt(f, "district_features", c.features.district_features);
      read_opt(f, "horizons", c.horizons);
    }
    c.count_grid = default_grid(gbm::Loss::Poisson);
    c.area_grid = default_grid(gbm::Loss::Tweedie);
    if (j.contains("boosting")) {
      const auto& b = j.at("boosting");
      read_opt(b, "folds", c.n_folds);
      if (b.contains("count_grid")) {
        c.count_grid.clear();
        for (const auto& e : b.at("count_grid")) c.count_grid.push_back(boost_from(e, gbm::Loss::Poisson));
      }
      if (b.contains("area_grid")) {
        c.area_grid.clear();
        for (const auto& e : b.at("area_grid")) c.area_grid.push_back(boost_from(e, gbm::Loss::Tweedie));
      }
    }
    if (j.contains("latent")) {
      const auto& l = j.at("latent");
      if (l.contains("variant")) c.hurdle.variant = latent::variant_from_name(l.at("variant").get<std::string>());
      read_opt(l, "n_bins", c.hurdle.n_bins);
      read_opt(l, "alpha", c.hurdle.alpha);
      read_opt(l, "pc_rate", c.hurdle.pc.rate);
      if (l.contains("xi_bounds")) {
        const auto b = l.at("xi_bounds").get<std::vector<double>>();
        if (b.size() != 2) throw ConfigError("xi_bounds must have two entries");
        c.hurdle.pc.xi_low = b[0];
        c.hurdle.pc.xi_high = b[1];
      }
      if (l.contains("kappa_form")) {
        const auto k = l.at("kappa_form").get<std::string>();
        if (k == "exact") c.hurdle.pc.kappa_form = dist::KappaPriorForm::Exact;
        else if (k == "approximate") c.hurdle.pc.kappa_form = dist::KappaPriorForm::Approximate;
        else throw ConfigError("kappa_form must be exact or approximate");
      }
      read_opt(l, "intercept_variance", c.hurdle.intercept_variance);
      read_opt(l, "beta_variance", c.hurdle.beta_variance);
      if (l.contains("tau_gamma")) {
        const auto g = l.at("tau_gamma").get<std::vector<double>>();
        if (g.size() != 2) throw ConfigError("tau_gamma must be [shape, rate]");
        c.hurdle.tau_gamma_shape = g[0];
        c.hurdle.tau_gamma_rate = g[1];
      }
      if (l.contains("bym2_precision")) {
        const auto g = l.at("bym2_precision").get<std::vector<double>>();
        if (g.size() != 2) throw ConfigError("bym2_precision must be [u, alpha]");
        c.hurdle.bym2_u = g[0];
        c.hurdle.bym2_alpha = g[1];
      }
      if (l.contains("bym2_phi")) {
        const auto g = l.at("bym2_phi").get<std::vector<double>>();
        if (g.size() != 2) throw ConfigError("bym2_phi must be [u, alpha]");
        c.hurdle.phi_u = g[0];
        c.hurdle.phi_alpha = g[1];
      }
      read_opt(l, "samples", c.n_samples);
      if (l.contains("grid")) {
        const auto& g = l.at("grid");
        if (g.contains("strategy")) c.grid.strategy = strategy_from(g.at("strategy").get<std::string>());
        read_opt(g, "axial_levels", c.grid.axial_levels);
        read_opt(g, "step_sigma", c.grid.step_sigma);
        read_opt(g, "prune", c.grid.prune);
        read_opt(g, "fd_step", c.grid.fd_step);
        read_opt(g, "max_bfgs_iter", c.grid.max_bfgs_iter);
        read_opt(g, "bfgs_grad_tol", c.grid.bfgs_grad_tol);
        read_opt(g, "bfgs_f_tol", c.grid.bfgs_f_tol);
      }
    }
    if (j.contains("score")) {
      const auto& s2 = j.at("score");
      read_opt(s2, "count_thresholds", c.score.count_thresholds);
      read_opt(s2, "area_thresholds", c.score.area_thresholds);
      if (s2.contains("crps")) {
        const auto e = s2.at("crps").get<std::string>();
        if (e == "fair") c.score.crps_estimator = scoring::CrpsEstimator::Fair;
        else if (e == "empirical") c.score.crps_estimator = scoring::CrpsEstimator::Empirical;
        else throw ConfigError("crps must be fair or empirical");
      }
      read_opt(s2, "exceedance_count", c.exceedance_count);
      read_opt(s2, "exceedance_area", c.exceedance_area);
      read_opt(s2, "shap_top", c.shap_top);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const PipelineConfig& c, bool resolve_paths) {
  json j;
  j["seed"] = c.seed;
  auto path = [&](const std::string& p) { return resolve_paths ? c.resolve(p).string() : p; };
  j["data"] = {{"events", path(c.data.events)},
               {"units", path(c.data.units)},
               {"covariates", path(c.data.covariates)},
               {"council_adjacency", path(c.data.council_adjacency)},
               {"district_adjacency", path(c.data.district_adjacency)}};
  j["window"] = {{"start", format_month(0, c.window)}, {"months", c.window.n_months}};
  j["split"] = {{"train_end", format_month(c.train_end, c.window)},
                {"test_start", format_month(c.test_start, c.window)},
                {"test_end", format_month(c.test_end, c.window)}};
  j["filter"] = {{"min_area", c.filter.min_area}, {"min_duration", c.filter.min_duration}};
  j["features"] = {{"window", c.features.window},
                   {"lags", c.features.lags},
                   {"ma_spans", c.features.ma_spans},
                   {"hist_spans", c.features.hist_spans},
                   {"district_features", c.features.district_features},
                   {"horizons", c.horizons}};
  json cg = json::array(), ag = json::array();
  for (const auto& g : c.count_grid) cg.push_back(boost_json(g));
  for (const auto& g : c.area_grid) ag.push_back(boost_json(g));
  j["boosting"] = {{"folds", c.n_folds}, {"count_grid", cg}, {"area_grid", ag}};
  j["latent"] = {{"variant", latent::variant_name(c.hurdle.variant)},
                 {"n_bins", c.hurdle.n_bins},
                 {"alpha", c.hurdle.alpha},
                 {"pc_rate", c.hurdle.pc.rate},
                 {"xi_bounds", {c.hurdle.pc.xi_low, c.hurdle.pc.xi_high}},
                 {"kappa_form", c.hurdle.pc.kappa_form == dist::KappaPriorForm::Exact ? "exact" : "approximate"},
                 {"intercept_variance", c.hurdle.intercept_variance},
                 {"beta_variance", c.hurdle.beta_variance},
                 {"tau_gamma", {c.hurdle.tau_gamma_shape, c.hurdle.tau_gamma_rate}},
                 {"bym2_precision", {c.hurdle.bym2_u, c.hurdle.bym2_alpha}},
                 {"bym2_phi", {c.hurdle.phi_u, c.hurdle.phi_alpha}},
                 {"samples", c.n_samples},
                 {"grid",
                  {{"strategy", strategy_name(c.grid.strategy)},
                   {"axial_levels", c.grid.axial_levels},
                   {"step_sigma", c.grid.step_sigma},
                   {"prune", c.grid.prune},
                   {"fd_step", c.grid.fd_step},
                   {"max_bfgs_iter", c.grid.max_bfgs_iter},
                   {"bfgs_grad_tol", c.grid.bfgs_grad_tol},
                   {"bfgs_f_tol", c.grid.bfgs_f_tol}}}};
  j["score"] = {{"count_thresholds", c.score.count_thresholds},
                {"area_thresholds", c.score.area_thresholds},
                {"crps", c.score.crps_estimator == scoring::CrpsEstimator::Fair ? "fair" : "empirical"},
                {"exceedance_count", c.exceedance_count},
                {"exceedance_area", c.exceedance_area},
                {"shap_top", c.shap_top}};
  return j.dump(2) + "\n";
}

PipelineConfig load_config(const std::filesystem::path& file) {
  return config_from_json(read_text(file), file.parent_path());
}

}  // namespace firecast::pipeline

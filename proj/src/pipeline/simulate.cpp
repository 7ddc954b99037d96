#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "firecast/distributions.hpp"
#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"

namespace firecast::pipeline {

using nlohmann::json;

void SyntheticSpec::validate() const {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw ParameterError("simulate: lattice needs at least two councils");
  if (district_rows < 1 || district_cols < 1) throw ParameterError("simulate: district blocks must be non-empty");
  if (rows % district_rows != 0 || cols % district_cols != 0)
    throw ParameterError("simulate: district blocks must tile the lattice");
  if ((rows / district_rows) * (cols / district_cols) < 2) throw ParameterError("simulate: need at least two districts");
  if (months < 2) throw ParameterError("simulate: need at least two months");
  if (fit_start < 1 || fit_end < fit_start || fit_end >= months)
    throw ParameterError("simulate: centring span must lie within months 1..T-1");
  if (!(kappa > 0.0)) throw ParameterError("simulate: kappa must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("simulate: alpha must lie in (0, 1)");
  for (double t : {tau_gc, tau_gd, tau_year})
    if (!(t > 0.0)) throw ParameterError("simulate: precisions must be positive");
  for (double p : {phi_gc, phi_gd})
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("simulate: mixing weights must lie in (0, 1)");
}

namespace {

std::string id(const char* prefix, int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%02d", prefix, k);
  return buf;
}

}  // namespace

SyntheticData simulate(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticData d;
  d.truth.spec = spec;
  const int S = spec.rows * spec.cols, T = spec.months;
  const int dcols = spec.cols / spec.district_cols;
  const int n_districts = (spec.rows / spec.district_rows) * dcols;
  d.window = {spec.start_year, 1, T};

  std::vector<int> unit_district(S);
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c) {
      const int s = r * spec.cols + c;
      unit_district[s] = (r / spec.district_rows) * dcols + c / spec.district_cols;
      d.units.push_back({id("C", s + 1), id("D", unit_district[s] + 1), static_cast<double>(c),
                         static_cast<double>(spec.rows - r)});
    }
  for (int k = 0; k < n_districts; ++k) d.district_ids.push_back(id("D", k + 1));
  d.council_graph = latent::Graph::lattice(spec.rows, spec.cols);
  {
    std::vector<std::pair<int, int>> e;
    for (const auto& [a, b] : d.council_graph.edges) {
      const int da = unit_district[a], db = unit_district[b];
      if (da != db) e.emplace_back(std::min(da, db), std::max(da, db));
    }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    d.district_graph = latent::Graph::from_edges(n_districts, std::move(e));
  }

  // structured effects drawn from the latent prior at the true hyperparameters
  std::map<int, int> year_level;
  for (int t = 0; t < T; ++t) year_level.emplace(d.window.year_of(t), 0);
  int k = 0;
  for (auto& [y, l] : year_level) l = k++;
  latent::LatentModel prior;
  auto hyper = [&](const std::string& name, double value, latent::TransformKind tr) {
    latent::HyperParam h;
    h.name = name;
    h.transform = {tr, 0.0, 1.0};
    h.initial = value;
    h.fixed = true;
    return prior.add_hyper(h);
  };
  const int tgc = hyper("tau_gc", spec.tau_gc, latent::TransformKind::Log);
  const int pgc = hyper("phi_gc", spec.phi_gc, latent::TransformKind::Logit);
  const int tgd = hyper("tau_gd", spec.tau_gd, latent::TransformKind::Log);
  const int pgd = hyper("phi_gd", spec.phi_gd, latent::TransformKind::Logit);
  const int ty = hyper("tau_year", spec.tau_year, latent::TransformKind::Log);
  latent::Block gc;
  gc.name = "gc";
  gc.kind = latent::BlockKind::BYM2;
  gc.base_dim = S;
  gc.n_groups = 12;
  gc.tau_slot = tgc;
  gc.phi_slot = pgc;
  gc.icar = std::make_shared<latent::ScaledIcar>(latent::build_icar_scaled(d.council_graph));
  gc = prior.blocks()[prior.add_block(gc)];
  latent::Block gd;
  gd.name = "gd";
  gd.kind = latent::BlockKind::BYM2;
  gd.base_dim = n_districts;
  gd.n_groups = T;
  gd.tau_slot = tgd;
  gd.phi_slot = pgd;
  gd.icar = std::make_shared<latent::ScaledIcar>(latent::build_icar_scaled(d.district_graph));
  gd = prior.blocks()[prior.add_block(gd)];
  std::vector<latent::Block> years;
  for (const char* name : {"year_z", "year_c", "year_b"}) {
    latent::Block b;
    b.name = name;
    b.kind = latent::BlockKind::IID;
    b.base_dim = static_cast<int>(year_level.size());
    b.tau_slot = ty;
    years.push_back(prior.blocks()[prior.add_block(b)]);
  }

  std::mt19937_64 rng(seed);
  const Eigen::VectorXd u = latent::sample_prior(prior, prior.initial_theta(), rng);

  // covariates: the lead drives next month's predictors, the seasonal one is noise
  d.covariates.names = {"lead", "season"};
  d.covariates.values.assign(2, std::vector<double>(static_cast<std::size_t>(S) * T));
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < T; ++t) {
      const std::size_t cell = static_cast<std::size_t>(s) * T + t;
      d.covariates.values[0][cell] = latent::standard_normal(rng);
      const double angle = 2.0 * std::numbers::pi * d.window.month_of(t) / 12.0;
      d.covariates.values[1][cell] = std::sin(angle) + 0.3 * latent::standard_normal(rng);
    }
  auto lead = [&](int s, int t) {
    return t > 0 ? d.covariates.values[0][static_cast<std::size_t>(s) * T + t - 1] : 0.0;
  };

  auto& tr = d.truth;
  const std::size_t n = static_cast<std::size_t>(S) * T;
  tr.eta_z.assign(n, 0.0);
  tr.eta_c.assign(n, 0.0);
  tr.eta_b.assign(n, 0.0);
  tr.root_area.assign(n, 0.0);
  std::vector<double> gcv(n), gdv(n);
  std::vector<int> yl(n);
  double sum = 0.0;
  int cnt = 0;
  for (int s = 0; s < S; ++s)
    for (int t = spec.fit_start; t <= spec.fit_end; ++t) {
      sum += lead(s, t);
      ++cnt;
    }
  tr.centre_z = sum / cnt;

  std::vector<std::uint8_t> z(n, 0);
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < T; ++t) {
      const std::size_t cell = static_cast<std::size_t>(s) * T + t;
      gcv[cell] = u[gc.index(s, d.window.month_of(t) - 1)];
      gdv[cell] = u[gd.index(unit_district[s], t)];
      yl[cell] = year_level.at(d.window.year_of(t));
      tr.eta_z[cell] = spec.int_z + gcv[cell] + gdv[cell] + u[years[0].index(yl[cell])] +
                       spec.lead_z * (lead(s, t) - tr.centre_z);
      z[cell] = dist::uniform_open(rng) < dist::inv_logit(tr.eta_z[cell]) ? 1 : 0;
    }
  sum = 0.0;
  cnt = 0;
  for (int s = 0; s < S; ++s)
    for (int t = spec.fit_start; t <= spec.fit_end; ++t)
      if (z[static_cast<std::size_t>(s) * T + t]) {
        sum += lead(s, t);
        ++cnt;
      }
  tr.centre_c = tr.centre_b = cnt > 0 ? sum / cnt : 0.0;

  for (int s = 0; s < S; ++s)
    for (int t = 0; t < T; ++t) {
      const std::size_t cell = static_cast<std::size_t>(s) * T + t;
      const double x = lead(s, t);
      tr.eta_c[cell] = spec.int_c + spec.beta1_c * gcv[cell] + spec.beta2_c * gdv[cell] +
                       u[years[1].index(yl[cell])] + spec.lead_c * (x - tr.centre_c);
      tr.eta_b[cell] = spec.int_b + spec.beta1_b * gcv[cell] + spec.beta2_b * gdv[cell] +
                       u[years[2].index(yl[cell])] + spec.lead_b * (x - tr.centre_b);
      if (!z[cell]) continue;
      const long long count = dist::trunc_poisson_draw(std::exp(tr.eta_c[cell]), rng);
      const double sigma = dist::egp_sigma_from_eta({spec.alpha, tr.eta_b[cell]}, spec.xi, spec.kappa);
      const double root = dist::egp_quantile(dist::uniform_open(rng), {sigma, spec.xi, spec.kappa});
      tr.root_area[cell] = root;
      const double area = root * root;
      // split the burnt area over the events with exponential spacings
      std::vector<double> w(static_cast<std::size_t>(count));
      double wsum = 0.0;
      for (auto& v : w) wsum += (v = -std::log(dist::uniform_open(rng)));
      for (long long e = 0; e < count; ++e) {
        features::FireEvent ev;
        ev.unit = d.units[s].id;
        ev.district = d.units[s].district;
        ev.year = d.window.year_of(t);
        ev.month = d.window.month_of(t);
        ev.area_ha = area * w[static_cast<std::size_t>(e)] / wsum;
        ev.duration_h = 1.0 + 47.0 * dist::uniform_open(rng);
        d.events.push_back(std::move(ev));
      }
    }
  d.panel = features::aggregate(d.events, d.units, d.window, {0.0, 0.0});
  return d;
}

std::string truth_json(const SyntheticTruth& t) {
  const auto& s = t.spec;
  json j;
  j["format"] = "firecast-synthetic-truth";
  j["lattice"] = {s.rows, s.cols};
  j["district_block"] = {s.district_rows, s.district_cols};
  j["months"] = s.months;
  j["centring_span"] = {s.fit_start, s.fit_end};
  j["intercepts"] = {{"z", s.int_z}, {"c", s.int_c}, {"b", s.int_b}};
  j["hyper"] = {{"xi", s.xi},           {"kappa", s.kappa},         {"alpha", s.alpha},         {"tau_gc", s.tau_gc},
                {"phi_gc", s.phi_gc},   {"tau_gd", s.tau_gd},       {"phi_gd", s.phi_gd},       {"tau_year", s.tau_year},
                {"beta1_c", s.beta1_c}, {"beta2_c", s.beta2_c},     {"beta1_b", s.beta1_b},     {"beta2_b", s.beta2_b}};
  j["lead_effect"] = {{"z", s.lead_z}, {"c", s.lead_c}, {"b", s.lead_b}};
  j["lead_centre"] = {{"z", t.centre_z}, {"c", t.centre_c}, {"b", t.centre_b}};
  return j.dump(2) + "\n";
}

PipelineConfig synthetic_config(const SyntheticSpec& spec, std::uint64_t seed) {
  PipelineConfig c;
  c.seed = seed;
  c.window = {spec.start_year, 1, spec.months};
  c.filter = {0.0, 0.0};
  c.train_end = spec.fit_end;
  c.test_start = spec.fit_end + 1;
  c.test_end = spec.months - 1;
  c.features.window = spec.fit_start;
  c.features.lags.clear();
  for (int j = 1; j <= std::min(6, spec.fit_start); ++j) c.features.lags.push_back(j);
  c.features.ma_spans.clear();
  for (int j : {3, 6, 12})
    if (j <= spec.fit_start) c.features.ma_spans.push_back(j);
  c.features.hist_spans.clear();
  gbm::BoostConfig b;
  b.n_trees = 100;
  b.learning_rate = 0.1;
  b.max_depth = 3;
  b.loss.loss = gbm::Loss::Poisson;
  c.count_grid = {b};
  b.loss.loss = gbm::Loss::Tweedie;
  c.area_grid = {b};
  c.validate();
  return c;
}

void write_synthetic(const SyntheticData& d, const PipelineConfig& cfg, const std::filesystem::path& dir) {
  write_text(dir / cfg.data.units, units_csv(d.units));
  write_text(dir / cfg.data.events, events_csv(d.events));
  write_text(dir / cfg.data.covariates, covariates_csv(d.covariates, d.units, d.window));
  std::vector<std::string> ids;
  for (const auto& u : d.units) ids.push_back(u.id);
  write_text(dir / cfg.data.council_adjacency, adjacency_csv(d.council_graph, ids));
  write_text(dir / cfg.data.district_adjacency, adjacency_csv(d.district_graph, d.district_ids));
  write_text(dir / "truth.json", truth_json(d.truth));
  write_text(dir / "config.json", config_to_json(cfg, false));
}

Dataset dataset_of(const SyntheticData& data) {
  Dataset d;
  d.panel = data.panel;
  d.covariates = data.covariates;
  d.council_graph = data.council_graph;
  d.district_graph = data.district_graph;
  d.district_ids = data.district_ids;
  for (std::size_t k : features::district_index(data.panel)) d.unit_district.push_back(static_cast<int>(k));
  return d;
}

}  // namespace firecast::pipeline

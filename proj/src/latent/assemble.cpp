#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

ModelVariant variant_from_name(const std::string& name) {
  if (name == "M1") return ModelVariant::M1;
  if (name == "M2") return ModelVariant::M2;
  if (name == "M3") return ModelVariant::M3;
  if (name == "M4") return ModelVariant::M4;
  throw ConfigError("unknown model variant '" + name + "' (expected M1, M2, M3 or M4)");
}

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::M1: return "M1";
    case ModelVariant::M2: return "M2";
    case ModelVariant::M3: return "M3";
    case ModelVariant::M4: return "M4";
  }
  return "";
}

LikKind HurdleConfig::area_lik() const {
  switch (variant) {
    case ModelVariant::M2: return LikKind::Gamma;
    case ModelVariant::M3: return LikKind::Weibull;
    default: return LikKind::EGP;
  }
}

void HurdleConfig::validate() const {
  if (n_bins < 2) throw ConfigError("hurdle model: need at least two forecast bins");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("hurdle model: link level must lie in (0, 1)");
  if (!(intercept_variance > 0.0 && beta_variance > 0.0)) throw ConfigError("hurdle model: prior variances must be positive");
  if (!(tau_gamma_shape > 0.0 && tau_gamma_rate > 0.0)) throw ConfigError("hurdle model: gamma prior parameters must be positive");
  pc.validate();
}

namespace {

HyperParam precision_hyper(const std::string& name, Prior prior) {
  HyperParam h;
  h.name = name;
  h.transform = {TransformKind::Log};
  h.prior = std::move(prior);
  h.initial = 1.0;
  return h;
}

void check_cells(const HurdleInputs& in, const std::vector<HurdleCell>& cells, const char* what) {
  const int n_units = static_cast<int>(in.council_graph.n);
  for (const auto& c : cells) {
    if (c.unit < 0 || c.unit >= n_units)
      throw DimensionError(std::string(what) + " cell references unit " + std::to_string(c.unit) + " outside the graph");
    if (c.month < 1 || c.month > 12) throw DimensionError(std::string(what) + " cell has calendar month outside 1..12");
    if (!(c.count >= 0.0) || !(c.area >= 0.0)) throw DomainError(std::string(what) + " cell has a negative or missing response");
    if (!std::isfinite(c.fc_count) || !std::isfinite(c.fc_area))
      throw DomainError(std::string(what) + " cell has a missing first-stage forecast");
  }
}

}  // namespace

HurdleModel assemble(const HurdleInputs& in, const HurdleConfig& cfg) {
  cfg.validate();
  if (in.unit_district.size() != in.council_graph.n)
    throw DimensionError("hurdle model: district map has " + std::to_string(in.unit_district.size()) +
                         " entries for " + std::to_string(in.council_graph.n) + " councils");
  for (int d : in.unit_district)
    if (d < 0 || static_cast<std::size_t>(d) >= in.district_graph.n)
      throw DimensionError("hurdle model: district index outside the district graph");
  if (in.train.empty()) throw DimensionError("hurdle model: no training cells");
  check_cells(in, in.train, "training");
  check_cells(in, in.test, "test");

  HurdleModel out;
  LatentModel& m = out.model;
  m.alpha = cfg.alpha;
  m.area_lik = cfg.area_lik();

  // time and year levels over training and test cells
  std::map<int, int> time_group, year_level;
  for (const auto* set : {&in.train, &in.test})
    for (const auto& c : *set) {
      time_group.emplace(c.time, 0);
      year_level.emplace(c.year, 0);
    }
  int k = 0;
  for (auto& [t, g] : time_group) g = k++;
  k = 0;
  for (auto& [y, l] : year_level) l = k++;

  // hyperparameters
  if (m.area_lik == LikKind::EGP) {
    HyperParam xi;
    xi.name = "xi";
    xi.transform = {TransformKind::Logit, cfg.pc.xi_low, cfg.pc.xi_high};
    xi.prior = Prior::pc_xi(cfg.pc);
    xi.initial = std::clamp(0.1, cfg.pc.xi_low + 1e-3, cfg.pc.xi_high - 1e-3);
    m.xi_slot = m.add_hyper(xi);
    HyperParam kappa;
    kappa.name = "kappa";
    kappa.transform = {TransformKind::Log};
    kappa.prior = Prior::pc_kappa(cfg.pc);
    kappa.initial = 1.0;
    m.kappa_slot = m.add_hyper(kappa);
  } else {
    m.shape_slot = m.add_hyper(precision_hyper("shape", Prior::gamma(1.0, 0.01)));
  }

  auto council = std::make_shared<ScaledIcar>(build_icar_scaled(in.council_graph));
  auto district = std::make_shared<ScaledIcar>(build_icar_scaled(in.district_graph));
  const int tau_gc = m.add_hyper(precision_hyper("tau_gc", Prior::pc_prec(cfg.bym2_u, cfg.bym2_alpha)));
  HyperParam phi;
  phi.transform = {TransformKind::Logit, 0.0, 1.0};
  phi.initial = 0.5;
  phi.name = "phi_gc";
  phi.prior = Prior::pc_bym2_phi(council->cov_eigen, cfg.phi_u, cfg.phi_alpha);
  const int phi_gc = m.add_hyper(phi);
  const int tau_gd = m.add_hyper(precision_hyper("tau_gd", Prior::pc_prec(cfg.bym2_u, cfg.bym2_alpha)));
  phi.name = "phi_gd";
  phi.prior = Prior::pc_bym2_phi(district->cov_eigen, cfg.phi_u, cfg.phi_alpha);
  const int phi_gd = m.add_hyper(phi);
  const Prior tau_prior = Prior::gamma(cfg.tau_gamma_shape, cfg.tau_gamma_rate);
  const int tau_tz = m.add_hyper(precision_hyper("tau_t_z", tau_prior));
  const int tau_tc = m.add_hyper(precision_hyper("tau_t_c", tau_prior));
  const int tau_tb = m.add_hyper(precision_hyper("tau_t_b", tau_prior));
  int tau_rzc = -1, tau_rzb = -1, tau_rc = -1, tau_rb = -1;
  if (cfg.r_effects()) {
    tau_rzc = m.add_hyper(precision_hyper("tau_r_zc", tau_prior));
    tau_rzb = m.add_hyper(precision_hyper("tau_r_zb", tau_prior));
    tau_rc = m.add_hyper(precision_hyper("tau_r_c", tau_prior));
    tau_rb = m.add_hyper(precision_hyper("tau_r_b", tau_prior));
  }
  auto beta_hyper = [&](const std::string& name) {
    HyperParam h;
    h.name = name;
    h.transform = {TransformKind::Identity};
    h.prior = Prior::normal(0.0, cfg.beta_variance);
    h.initial = 0.0;
    return m.add_hyper(h);
  };
  const int b1c = beta_hyper("beta1_c"), b2c = beta_hyper("beta2_c");
  const int b1b = beta_hyper("beta1_b"), b2b = beta_hyper("beta2_b");

  // latent blocks
  auto intercept = [&](const std::string& name) {
    Block b;
    b.name = name;
    b.kind = BlockKind::Intercept;
    b.fixed_precision = 1.0 / cfg.intercept_variance;
    return m.blocks()[m.add_block(b)];
  };
  const Block bz = intercept("int_z"), bc = intercept("int_c"), bb = intercept("int_b");

  Block gc;
  gc.name = "gc";
  gc.kind = BlockKind::BYM2;
  gc.base_dim = static_cast<int>(in.council_graph.n);
  gc.n_groups = 12;
  gc.tau_slot = tau_gc;
  gc.phi_slot = phi_gc;
  gc.icar = council;
  gc = m.blocks()[m.add_block(gc)];
  Block gd;
  gd.name = "gd";
  gd.kind = BlockKind::BYM2;
  gd.base_dim = static_cast<int>(in.district_graph.n);
  gd.n_groups = static_cast<int>(time_group.size());
  gd.tau_slot = tau_gd;
  gd.phi_slot = phi_gd;
  gd.icar = district;
  gd = m.blocks()[m.add_block(gd)];

  auto iid = [&](const std::string& name, int levels, int slot) {
    Block b;
    b.name = name;
    b.kind = BlockKind::IID;
    b.base_dim = levels;
    b.tau_slot = slot;
    return m.blocks()[m.add_block(b)];
  };
  const int n_years = static_cast<int>(year_level.size());
  const Block tz = iid("year_z", n_years, tau_tz), tc = iid("year_c", n_years, tau_tc), tb = iid("year_b", n_years, tau_tb);

  std::vector<double> fc_c, fc_b;
  std::vector<bool> fire;
  for (const auto& c : in.train) {
    fc_c.push_back(c.fc_count);
    fc_b.push_back(c.fc_area);
    fire.push_back(c.count > 0.0);
  }
  Block rzc, rzb, rc, rb;
  if (cfg.r_effects()) {
    if (std::none_of(fire.begin(), fire.end(), [](bool f) { return f; }))
      throw DomainError("hurdle model: no training cell with fire to bin forecasts on");
    out.bin_zc = bin_covariate(fc_c, cfg.n_bins);
    out.bin_zb = bin_covariate(fc_b, cfg.n_bins);
    out.bin_c = bin_covariate(fc_c, cfg.n_bins, &fire);
    out.bin_b = bin_covariate(fc_b, cfg.n_bins, &fire);
    auto rw1 = [&](const std::string& name, const Binning& bins, int slot) {
      Block b;
      b.name = name;
      b.kind = BlockKind::RW1;
      b.base_dim = std::max(bins.n_bins(), 2);
      b.tau_slot = slot;
      return m.blocks()[m.add_block(b)];
    };
    rzc = rw1("r_zc", out.bin_zc, tau_rzc);
    rzb = rw1("r_zb", out.bin_zb, tau_rzb);
    rc = rw1("r_c", out.bin_c, tau_rc);
    rb = rw1("r_b", out.bin_b, tau_rb);
  }

  auto predictors = [&](const HurdleCell& c) {
    const int g_c = gc.index(c.unit, c.month - 1);
    const int g_d = gd.index(in.unit_district[c.unit], time_group.at(c.time));
    const int yl = year_level.at(c.year);
    PredictiveCell p;
    p.z.entries = {{bz.offset}, {g_c}, {g_d}, {tz.index(yl)}};
    p.c.entries = {{bc.offset}, {g_c, b1c}, {g_d, b2c}, {tc.index(yl)}};
    p.b.entries = {{bb.offset}, {g_c, b1b}, {g_d, b2b}, {tb.index(yl)}};
    if (cfg.r_effects()) {
      p.z.entries.push_back({rzc.index(out.bin_zc.bin(c.fc_count))});
      p.z.entries.push_back({rzb.index(out.bin_zb.bin(c.fc_area))});
      p.c.entries.push_back({rc.index(out.bin_c.bin(c.fc_count))});
      p.b.entries.push_back({rb.index(out.bin_b.bin(c.fc_area))});
    }
    return p;
  };

  std::vector<Observation> c_rows, b_rows;
  for (const auto& c : in.train) {
    const auto p = predictors(c);
    Observation z;
    z.lik = LikKind::Bernoulli;
    z.y = c.count > 0.0 ? 1.0 : 0.0;
    z.predictor = 0;
    z.entries = p.z.entries;
    m.add_observation(z);
    if (c.count > 0.0) {
      Observation oc;
      oc.lik = LikKind::TruncPoisson;
      oc.y = c.count;
      oc.predictor = 1;
      oc.entries = p.c.entries;
      c_rows.push_back(oc);
      if (c.area > 0.0) {
        Observation ob;
        ob.lik = m.area_lik;
        ob.y = std::sqrt(c.area);
        ob.predictor = 2;
        ob.entries = p.b.entries;
        b_rows.push_back(ob);
      }
    }
  }
  out.n_z_rows = static_cast<int>(in.train.size());
  out.n_c_rows = static_cast<int>(c_rows.size());
  for (auto& o : c_rows) m.add_observation(std::move(o));
  for (auto& o : b_rows) m.add_observation(std::move(o));
  for (const auto& c : in.test) out.test.push_back(predictors(c));
  m.validate();
  return out;
}

}  // namespace firecast::latent

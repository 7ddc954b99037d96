#include <json.hpp>
#include <map>
#include <memory>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

using nlohmann::json;

namespace {

const std::map<BlockKind, std::string> kBlockNames{
    {BlockKind::Intercept, "intercept"}, {BlockKind::IID, "iid"}, {BlockKind::RW1, "rw1"}, {BlockKind::BYM2, "bym2"}};
const std::map<LikKind, std::string> kLikNames{{LikKind::Bernoulli, "bernoulli"}, {LikKind::TruncPoisson, "trunc_poisson"},
                                               {LikKind::EGP, "egp"},             {LikKind::Gamma, "gamma"},
                                               {LikKind::Weibull, "weibull"},     {LikKind::Gaussian, "gaussian"}};
const std::map<TransformKind, std::string> kTransformNames{
    {TransformKind::Log, "log"}, {TransformKind::Logit, "logit"}, {TransformKind::Identity, "identity"}};
const std::map<PriorKind, std::string> kPriorNames{{PriorKind::PcXi, "pc_xi"},         {PriorKind::PcKappa, "pc_kappa"},
                                                   {PriorKind::Gamma, "gamma"},        {PriorKind::PcPrec, "pc_prec"},
                                                   {PriorKind::PcBym2Phi, "pc_bym2_phi"}, {PriorKind::Normal, "normal"},
                                                   {PriorKind::Flat, "flat"}};

template <class E>
E lookup(const std::map<E, std::string>& names, const std::string& s, const char* what) {
  for (const auto& [k, v] : names)
    if (v == s) return k;
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json pc_json(const dist::PcPriorConfig& c) {
  return {{"rate", c.rate},
          {"xi_low", c.xi_low},
          {"xi_high", c.xi_high},
          {"kappa_form", c.kappa_form == dist::KappaPriorForm::Exact ? "exact" : "approximate"}};
}

dist::PcPriorConfig json_pc(const json& j) {
  dist::PcPriorConfig c;
  c.rate = j.at("rate").get<double>();
  c.xi_low = j.at("xi_low").get<double>();
  c.xi_high = j.at("xi_high").get<double>();
  c.kappa_form = j.at("kappa_form").get<std::string>() == "exact" ? dist::KappaPriorForm::Exact
                                                                   : dist::KappaPriorForm::Approximate;
  return c;
}

}  // namespace

std::string model_to_json(const LatentModel& m) {
  json j;
  j["format"] = "firecast-latent-model";
  j["version"] = 1;
  j["alpha"] = m.alpha;
  j["xi_slot"] = m.xi_slot;
  j["kappa_slot"] = m.kappa_slot;
  j["shape_slot"] = m.shape_slot;
  j["area_lik"] = kLikNames.at(m.area_lik);
  json hs = json::array();
  for (const auto& h : m.hypers()) {
    json p{{"kind", kPriorNames.at(h.prior.kind)}, {"a", h.prior.a}, {"b", h.prior.b}};
    if (h.prior.kind == PriorKind::PcXi || h.prior.kind == PriorKind::PcKappa) p["pc"] = pc_json(h.prior.pc);
    if (h.prior.kind == PriorKind::PcBym2Phi) {
      p["eigen"] = h.prior.eigen;
      p["phi_rate"] = h.prior.phi_rate;
    }
    hs.push_back({{"name", h.name},
                  {"transform", {{"kind", kTransformNames.at(h.transform.kind)}, {"lo", h.transform.lo}, {"hi", h.transform.hi}}},
                  {"prior", p},
                  {"initial", h.initial},
                  {"fixed", h.fixed}});
  }
  j["hypers"] = hs;
  json bs = json::array();
  for (const auto& b : m.blocks()) {
    json bj{{"name", b.name},         {"kind", kBlockNames.at(b.kind)}, {"base_dim", b.base_dim},
            {"n_groups", b.n_groups}, {"tau_slot", b.tau_slot},         {"phi_slot", b.phi_slot},
            {"fixed_precision", b.fixed_precision}};
    if (b.icar) {
      json edges = json::array();
      for (const auto& [a, c] : b.icar->graph.edges) edges.push_back({a, c});
      bj["graph"] = {{"n", b.icar->graph.n}, {"edges", edges}};
    }
    bs.push_back(bj);
  }
  j["blocks"] = bs;
  json os = json::array();
  for (const auto& o : m.observations()) {
    json en = json::array();
    for (const auto& e : o.entries) en.push_back({e.col, e.scale_slot, e.coef});
    os.push_back({kLikNames.at(o.lik), o.y, o.gauss_precision, o.predictor, en});
  }
  j["observations"] = os;
  return j.dump(1);
}

LatentModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("latent model file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "firecast-latent-model") throw ConfigError("not a firecast latent model file");
  LatentModel m;
  try {
    m.alpha = j.at("alpha").get<double>();
    m.xi_slot = j.at("xi_slot").get<int>();
    m.kappa_slot = j.at("kappa_slot").get<int>();
    m.shape_slot = j.at("shape_slot").get<int>();
    m.area_lik = lookup(kLikNames, j.at("area_lik").get<std::string>(), "likelihood");
    for (const auto& hj : j.at("hypers")) {
      HyperParam h;
      h.name = hj.at("name").get<std::string>();
      const auto& tj = hj.at("transform");
      h.transform.kind = lookup(kTransformNames, tj.at("kind").get<std::string>(), "transform");
      h.transform.lo = tj.at("lo").get<double>();
      h.transform.hi = tj.at("hi").get<double>();
      const auto& pj = hj.at("prior");
      h.prior.kind = lookup(kPriorNames, pj.at("kind").get<std::string>(), "prior");
      h.prior.a = pj.at("a").get<double>();
      h.prior.b = pj.at("b").get<double>();
      if (pj.contains("pc")) h.prior.pc = json_pc(pj.at("pc"));
      if (pj.contains("eigen")) {
        h.prior.eigen = pj.at("eigen").get<std::vector<double>>();
        h.prior.phi_rate = pj.at("phi_rate").get<double>();
      }
      h.initial = hj.at("initial").get<double>();
      h.fixed = hj.at("fixed").get<bool>();
      m.add_hyper(std::move(h));
    }
    for (const auto& bj : j.at("blocks")) {
      Block b;
      b.name = bj.at("name").get<std::string>();
      b.kind = lookup(kBlockNames, bj.at("kind").get<std::string>(), "block kind");
      b.base_dim = bj.at("base_dim").get<int>();
      b.n_groups = bj.at("n_groups").get<int>();
      b.tau_slot = bj.at("tau_slot").get<int>();
      b.phi_slot = bj.at("phi_slot").get<int>();
      b.fixed_precision = bj.at("fixed_precision").get<double>();
      if (bj.contains("graph")) {
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : bj.at("graph").at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        const Graph g = Graph::from_edges(bj.at("graph").at("n").get<std::size_t>(), std::move(edges));
        b.icar = std::make_shared<ScaledIcar>(build_icar_scaled(g));
      }
      m.add_block(std::move(b));
    }
    for (const auto& oj : j.at("observations")) {
      Observation o;
      o.lik = lookup(kLikNames, oj.at(0).get<std::string>(), "likelihood");
      o.y = oj.at(1).get<double>();
      o.gauss_precision = oj.at(2).get<double>();
      o.predictor = oj.at(3).get<int>();
      for (const auto& e : oj.at(4)) o.entries.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
      m.add_observation(std::move(o));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed latent model file: ") + e.what());
  }
  m.validate();
  return m;
}

std::string fit_to_json(const Fit& fit) {
  json j;
  j["format"] = "firecast-latent-fit";
  j["version"] = 1;
  j["mode"] = {{"internal", vec_json(fit.mode.internal)},
               {"latent", vec_json(fit.mode.latent)},
               {"log_post", fit.mode.log_post},
               {"iterations", fit.mode.iterations},
               {"evaluations", fit.mode.evaluations},
               {"converged", fit.mode.converged}};
  j["sigma"] = vec_json(fit.sigma);
  json ps = json::array();
  for (const auto& p : fit.points)
    ps.push_back({{"theta", vec_json(p.theta)},
                  {"internal", vec_json(p.internal)},
                  {"log_marginal", p.log_marginal},
                  {"log_prior", p.log_prior},
                  {"log_post", p.log_post},
                  {"weight", p.weight},
                  {"mode", vec_json(p.mode)}});
  j["points"] = ps;
  return j.dump(1);
}

Fit fit_from_json(const std::string& text, const LatentModel& model) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("latent fit file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "firecast-latent-fit") throw ConfigError("not a firecast latent fit file");
  Fit fit;
  LaplaceEngine engine(model);
  try {
    const auto& mj = j.at("mode");
    fit.mode.internal = json_vec(mj.at("internal"));
    fit.mode.latent = json_vec(mj.at("latent"));
    fit.mode.log_post = mj.at("log_post").get<double>();
    fit.mode.iterations = mj.at("iterations").get<int>();
    fit.mode.evaluations = mj.at("evaluations").get<int>();
    fit.mode.converged = mj.at("converged").get<bool>();
    fit.sigma = json_vec(j.at("sigma"));
    for (const auto& pj : j.at("points")) {
      HyperPoint p;
      p.theta = json_vec(pj.at("theta"));
      p.internal = json_vec(pj.at("internal"));
      p.log_marginal = pj.at("log_marginal").get<double>();
      p.log_prior = pj.at("log_prior").get<double>();
      p.log_post = pj.at("log_post").get<double>();
      p.weight = pj.at("weight").get<double>();
      p.mode = json_vec(pj.at("mode"));
      if (p.theta.size() != static_cast<Eigen::Index>(model.hypers().size()) || p.mode.size() != model.dim())
        throw DimensionError("latent fit does not match the model");
      p.approx = engine.approx_at(p.theta, p.mode);
      fit.points.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed latent fit file: ") + e.what());
  }
  return fit;
}

}  // namespace firecast::latent

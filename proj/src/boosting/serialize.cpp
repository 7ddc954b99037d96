#include <json.hpp>

#include "firecast/boosting.hpp"
#include "firecast/errors.hpp"

namespace firecast::gbm {

using nlohmann::json;

namespace {

const char* loss_name(Loss l) {
  switch (l) {
    case Loss::Poisson: return "poisson";
    case Loss::Tweedie: return "tweedie";
    case Loss::SquaredError: return "squared_error";
  }
  return "";
}

Loss loss_from_name(const std::string& s) {
  if (s == "poisson") return Loss::Poisson;
  if (s == "tweedie") return Loss::Tweedie;
  if (s == "squared_error") return Loss::SquaredError;
  throw ConfigError("unknown loss '" + s + "'");
}

}  // namespace

std::string to_json(const TreeEnsemble& m) {
  json j;
  j["format"] = "firecast-ensemble";
  j["version"] = 1;
  j["loss"] = loss_name(m.loss.loss);
  j["tweedie_power"] = m.loss.tweedie_power;
  j["base_score"] = m.base_score;
  j["learning_rate"] = m.learning_rate;
  j["n_features"] = m.n_features;
  j["feature_names"] = m.feature_names;
  json trees = json::array();
  for (const auto& t : m.trees) {
    // column layout: feature, threshold, default_left, left, right, weight, cover, gain
    json nodes = json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.default_left ? 1 : 0, n.left, n.right, n.weight,
                       n.cover, n.gain});
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump(1);
}

TreeEnsemble ensemble_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("ensemble file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "firecast-ensemble") throw ConfigError("not a firecast ensemble file");
  TreeEnsemble m;
  try {
    m.loss.loss = loss_from_name(j.at("loss").get<std::string>());
    m.loss.tweedie_power = j.at("tweedie_power").get<double>();
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& tj : j.at("trees")) {
      RegressionTree t;
      for (const auto& nj : tj) {
        TreeNode n;
        n.feature = nj.at(0).get<int>();
        n.threshold = nj.at(1).get<double>();
        n.default_left = nj.at(2).get<int>() != 0;
        n.left = nj.at(3).get<int>();
        n.right = nj.at(4).get<int>();
        n.weight = nj.at(5).get<double>();
        n.cover = nj.at(6).get<double>();
        n.gain = nj.at(7).get<double>();
        if (n.feature >= static_cast<int>(m.n_features)) throw ConfigError("ensemble: split feature out of range");
        t.nodes.push_back(n);
      }
      t.validate();
      m.trees.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed ensemble file: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("malformed ensemble tree: ") + e.what());
  }
  m.loss.validate();
  return m;
}

}  // namespace firecast::gbm

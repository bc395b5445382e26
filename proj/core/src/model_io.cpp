#include "fipe/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fipe/error.hpp"

namespace fipe {

using nlohmann::json;

namespace {

[[noreturn]] void fail(ModelFormatErrc code, const std::string& what) {
  throw ModelFormatError(code, what);
}

const json& require(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key)) {
    fail(ModelFormatErrc::SchemaViolation,
         ctx + ": missing key '" + key + "'");
  }
  return obj.at(key);
}

int require_int(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_number_integer()) {
    fail(ModelFormatErrc::SchemaViolation,
         ctx + ": '" + key + "' must be an integer");
  }
  return v.get<int>();
}

double require_real(const json& v, const std::string& ctx) {
  if (!v.is_number()) {
    fail(ModelFormatErrc::SchemaViolation, ctx + ": expected a number");
  }
  return v.get<double>();
}

FeatureSpec parse_feature(const json& f, std::size_t j,
                          std::vector<double>* declared) {
  const std::string ctx = "feature " + std::to_string(j);
  FeatureSpec spec;
  const json& name = require(f, "name", ctx);
  if (!name.is_string()) {
    fail(ModelFormatErrc::SchemaViolation, ctx + ": name must be a string");
  }
  spec.name = name.get<std::string>();
  const json& kind = require(f, "kind", ctx);
  const std::string k = kind.is_string() ? kind.get<std::string>() : "";
  if (k == "continuous") {
    spec.type = FeatureType::Continuous;
  } else if (k == "binary") {
    spec.type = FeatureType::Binary;
  } else if (k == "categorical") {
    spec.type = FeatureType::Categorical;
    spec.num_levels = require_int(f, "levels", ctx);
    if (spec.num_levels < 2) {
      fail(ModelFormatErrc::SchemaViolation,
           ctx + ": categorical feature needs levels >= 2");
    }
  } else {
    fail(ModelFormatErrc::SchemaViolation, ctx + ": unknown kind '" + k + "'");
  }
  if (f.contains("thresholds")) {
    if (spec.type != FeatureType::Continuous || !f["thresholds"].is_array()) {
      fail(ModelFormatErrc::SchemaViolation,
           ctx + ": thresholds only allowed as a list on continuous features");
    }
    for (const json& t : f["thresholds"]) declared->push_back(require_real(t, ctx));
    for (std::size_t r = 0; r < declared->size(); ++r) {
      if (!std::isfinite((*declared)[r]) ||
          (r > 0 && !((*declared)[r - 1] < (*declared)[r]))) {
        fail(ModelFormatErrc::NonMonotoneThresholds,
             ctx + ": thresholds must be finite and strictly increasing");
      }
    }
  }
  return spec;
}

Tree parse_tree(const json& t, std::size_t m,
                const std::vector<FeatureSpec>& features) {
  const std::string ctx = "tree " + std::to_string(m);
  const int root_id = require_int(t, "root", ctx);
  const json& nodes = require(t, "nodes", ctx);
  if (!nodes.is_array() || nodes.empty()) {
    fail(ModelFormatErrc::SchemaViolation, ctx + ": nodes must be a list");
  }

  std::map<int, int> position;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int id = require_int(nodes[i], "id", ctx);
    if (!position.emplace(id, static_cast<int>(i)).second) {
      fail(ModelFormatErrc::SchemaViolation,
           ctx + ": duplicate node id " + std::to_string(id));
    }
  }
  auto resolve = [&](int id, const std::string& where) {
    auto it = position.find(id);
    if (it == position.end()) {
      fail(ModelFormatErrc::DanglingNode,
           where + ": references missing node id " + std::to_string(id));
    }
    return it->second;
  };

  std::vector<Node> out;
  out.reserve(nodes.size());
  for (const json& n : nodes) {
    const int id = n.at("id").get<int>();
    const std::string where = ctx + " node " + std::to_string(id);
    const json& kind = require(n, "kind", where);
    const std::string k = kind.is_string() ? kind.get<std::string>() : "";
    if (k == "leaf") {
      const json& scores = require(n, "scores", where);
      if (!scores.is_array()) {
        fail(ModelFormatErrc::SchemaViolation, where + ": scores must be a list");
      }
      std::vector<double> s;
      for (const json& v : scores) s.push_back(require_real(v, where));
      out.push_back(Node::leaf(id, std::move(s)));
      continue;
    }
    if (k != "split") {
      fail(ModelFormatErrc::SchemaViolation,
           where + ": kind must be 'split' or 'leaf'");
    }
    const int feature = require_int(n, "feature", where);
    if (feature < 0 || static_cast<std::size_t>(feature) >= features.size()) {
      fail(ModelFormatErrc::SchemaViolation,
           where + ": feature index out of range");
    }
    const int left = resolve(require_int(n, "left", where), where);
    const int right = resolve(require_int(n, "right", where), where);
    switch (features[feature].type) {
      case FeatureType::Continuous:
        out.push_back(Node::threshold_split(
            id, feature, require_real(require(n, "threshold", where), where),
            left, right));
        break;
      case FeatureType::Binary:
        out.push_back(Node::binary_split(id, feature, left, right));
        break;
      case FeatureType::Categorical:
        out.push_back(Node::category_split(
            id, feature, require_int(n, "category", where), left, right));
        break;
    }
  }
  return Tree(std::move(out), resolve(root_id, ctx + " root"));
}

void check_version(const json& doc) {
  if (doc.contains("format_version")) {
    const json& v = doc["format_version"];
    if (!v.is_number_integer() || v.get<int>() != kModelFormatVersion) {
      fail(ModelFormatErrc::UnsupportedVersion,
           "format_version " + v.dump() + " is not supported");
    }
  }
}

json feature_to_json(const FeatureSpec& f) {
  json fj;
  fj["name"] = f.name;
  fj["kind"] = to_string(f.type);
  if (f.type == FeatureType::Categorical) fj["levels"] = f.num_levels;
  return fj;
}

}  // namespace

Ensemble model_from_json(const json& doc) {
  if (!doc.is_object()) {
    fail(ModelFormatErrc::SchemaViolation, "model must be a JSON object");
  }
  check_version(doc);
  const int num_classes = require_int(doc, "num_classes", "model");

  const json& features_json = require(doc, "features", "model");
  if (!features_json.is_array()) {
    fail(ModelFormatErrc::SchemaViolation, "features must be a list");
  }
  std::vector<FeatureSpec> features;
  std::vector<std::vector<double>> declared(features_json.size());
  std::vector<bool> has_declared(features_json.size(), false);
  for (std::size_t j = 0; j < features_json.size(); ++j) {
    features.push_back(parse_feature(features_json[j], j, &declared[j]));
    has_declared[j] = features_json[j].contains("thresholds");
  }

  const json& weights_json = require(doc, "weights", "model");
  if (!weights_json.is_array()) {
    fail(ModelFormatErrc::SchemaViolation, "weights must be a list");
  }
  std::vector<double> weights;
  for (const json& w : weights_json) weights.push_back(require_real(w, "weights"));

  const json& trees_json = require(doc, "trees", "model");
  if (!trees_json.is_array()) {
    fail(ModelFormatErrc::SchemaViolation, "trees must be a list");
  }
  std::vector<Tree> trees;
  for (std::size_t m = 0; m < trees_json.size(); ++m) {
    trees.push_back(parse_tree(trees_json[m], m, features));
  }

  Ensemble ensemble(std::move(features), std::move(trees), std::move(weights),
                    num_classes);
  for (std::size_t j = 0; j < declared.size(); ++j) {
    if (!has_declared[j]) continue;
    auto derived = ensemble.schema().thresholds(j);
    if (!std::equal(derived.begin(), derived.end(), declared[j].begin(),
                    declared[j].end())) {
      fail(ModelFormatErrc::SchemaViolation,
           "declared thresholds of feature '" +
               ensemble.schema().feature(j).name +
               "' differ from the split thresholds");
    }
  }
  return ensemble;
}

json model_to_json(const Ensemble& ensemble) {
  const FeatureSchema& schema = ensemble.schema();
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["num_classes"] = ensemble.num_classes();
  json features = json::array();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const FeatureSpec& f = schema.feature(j);
    json fj = feature_to_json(f);
    if (f.type == FeatureType::Continuous) {
      auto t = schema.thresholds(j);
      fj["thresholds"] = std::vector<double>(t.begin(), t.end());
    }
    features.push_back(std::move(fj));
  }
  doc["features"] = std::move(features);
  doc["weights"] = ensemble.weights();

  json trees = json::array();
  for (const Tree& tree : ensemble.trees()) {
    json nodes = json::array();
    for (const Node& node : tree.nodes()) {
      json nj;
      nj["id"] = node.id;
      if (node.is_leaf) {
        nj["kind"] = "leaf";
        nj["scores"] = node.scores;
      } else {
        nj["kind"] = "split";
        nj["feature"] = node.feature;
        if (node.split == SplitKind::Threshold) nj["threshold"] = node.threshold;
        if (node.split == SplitKind::Category) nj["category"] = node.category;
        nj["left"] = tree.node(node.left).id;
        nj["right"] = tree.node(node.right).id;
      }
      nodes.push_back(std::move(nj));
    }
    json tj;
    tj["root"] = tree.node(tree.root()).id;
    tj["nodes"] = std::move(nodes);
    trees.push_back(std::move(tj));
  }
  doc["trees"] = std::move(trees);
  return doc;
}

Ensemble parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ModelFormatErrc::Syntax, e.what());
  }
  return model_from_json(doc);
}

std::string dump_model(const Ensemble& ensemble) {
  return model_to_json(ensemble).dump(2);
}

Ensemble load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

void save_model(const Ensemble& ensemble, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write model file " + path.string());
  out << dump_model(ensemble) << '\n';
}

std::vector<FeatureSpec> features_from_json(const json& doc) {
  if (!doc.is_object()) {
    fail(ModelFormatErrc::SchemaViolation, "schema must be a JSON object");
  }
  check_version(doc);
  const json& list = require(doc, "features", "schema");
  if (!list.is_array() || list.empty()) {
    fail(ModelFormatErrc::SchemaViolation, "features must be a non-empty list");
  }
  std::vector<FeatureSpec> out;
  for (std::size_t j = 0; j < list.size(); ++j) {
    std::vector<double> ignored;
    out.push_back(parse_feature(list[j], j, &ignored));
  }
  return out;
}

json features_to_json(const std::vector<FeatureSpec>& features) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["features"] = json::array();
  for (const FeatureSpec& f : features) doc["features"].push_back(feature_to_json(f));
  return doc;
}

std::vector<FeatureSpec> load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open schema file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ModelFormatErrc::Syntax, e.what());
  }
  return features_from_json(doc);
}

}  // namespace fipe

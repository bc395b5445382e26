#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fipe/ensemble.hpp"

namespace fipe {

inline constexpr int kModelFormatVersion = 1;

// JSON model files. Every ensemble invariant is validated on load; failures
// raise ModelFormatError with a code naming the violated rule.
//
//   { "format_version": 1, "num_classes": C,
//     "features": [{"name", "kind", "levels"?, "thresholds"?}],
//     "weights": [M reals],
//     "trees": [{"root": id, "nodes": [
//         {"id", "kind": "split", "feature", "threshold"? | "category"?,
//          "left", "right"} | {"id", "kind": "leaf", "scores": [C reals]}]}] }
//
// "thresholds" is optional on continuous features. When present it must be
// strictly increasing and equal the union of that feature's split thresholds.
Ensemble model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const Ensemble& ensemble);

Ensemble parse_model(const std::string& text);
std::string dump_model(const Ensemble& ensemble);

Ensemble load_model(const std::filesystem::path& path);
void save_model(const Ensemble& ensemble, const std::filesystem::path& path);

// Feature schema files, the "features" list of a model without thresholds:
//   { "format_version": 1, "features": [{"name", "kind", "levels"?}] }
std::vector<FeatureSpec> features_from_json(const nlohmann::json& doc);
nlohmann::json features_to_json(const std::vector<FeatureSpec>& features);
std::vector<FeatureSpec> load_features(const std::filesystem::path& path);

}  // namespace fipe

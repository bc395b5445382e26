#include <doctest.h>

#include <random>

#include "fipe/ensemble.hpp"
#include "fipe/error.hpp"
#include "fipe/model_io.hpp"
#include "fixtures.hpp"

using namespace fipe;

namespace {

FeatureSchema one_continuous(std::vector<double> thresholds) {
  return FeatureSchema({{"x"}}, {std::move(thresholds)});
}

}  // namespace

TEST_CASE("predict_scores: single stump routes left") {
  Ensemble e(test::continuous_features(1), {test::stump(0, 0.5, 0, 1, 2)}, {1},
             2);
  auto s = e.predict_scores(std::vector<double>{1.0}, Point{0.3});
  CHECK(s == std::vector<double>{1.0, 0.0});
  CHECK(e.predict_scores(std::vector<double>{1.0}, Point{0.5}) ==
        std::vector<double>{1.0, 0.0});
  CHECK(e.predict_scores(std::vector<double>{1.0}, Point{0.51}) ==
        std::vector<double>{0.0, 1.0});
}

TEST_CASE("predict_scores: zero weights give the zero vector") {
  auto e = test::three_stumps();
  auto s = e.predict_scores(std::vector<double>{0, 0, 0}, Point{0.4});
  CHECK(s == std::vector<double>{0.0, 0.0});
}

TEST_CASE("predict_scores: vote tally of three stumps") {
  // At x = 0.6 the stumps vote class 0, 1, 1 (thresholds 0.7, 0.5, 0.3).
  Ensemble e(test::continuous_features(1),
             {test::stump(0, 0.7, 0, 1, 2), test::stump(0, 0.5, 0, 1, 2),
              test::stump(0, 0.3, 0, 1, 2)},
             {1, 1, 1}, 2);
  CHECK(e.predict_scores(Point{0.6}) == std::vector<double>{1.0, 2.0});
  CHECK(e.predict_class(Point{0.6}) == 1);
}

TEST_CASE("predict_class: smallest index wins ties") {
  Ensemble e(test::continuous_features(1),
             {test::stump(0, 0.5, 0, 0, 2), test::stump(0, 0.5, 1, 1, 2)},
             {1, 1}, 2);
  CHECK(e.predict_class(Point{0.2}) == 0);
  CHECK(argmax(std::vector<double>{1, 2}) == 1);
  CHECK(argmax(std::vector<double>{3, 3, 1}) == 0);
}

TEST_CASE("predict_class: all-zero weights predict class 0") {
  auto e = test::three_stumps();
  for (double x : {-1.0, 0.4, 0.6, 2.0}) {
    CHECK(e.predict_class(std::vector<double>{0, 0, 0}, Point{x}) == 0);
  }
}

TEST_CASE("predict: arity and weight mismatches are invalid input") {
  auto e = test::three_stumps();
  CHECK_THROWS_AS(e.predict_scores(Point{0.1, 0.2}), InvalidInput);
  CHECK_THROWS_AS(e.predict_scores(std::vector<double>{1, 1}, Point{0.1}),
                  InvalidInput);
}

TEST_CASE("cell_of uses the closed-left convention") {
  CHECK(cell_of(one_continuous({0.5}), Point{0.2}).index[0] == 0);
  CHECK(cell_of(one_continuous({0.2, 0.8}), Point{0.2}).index[0] == 0);
  CHECK(cell_of(one_continuous({0.2, 0.8}), Point{0.9}).index[0] == 2);
  CHECK(cell_of(one_continuous({0.2, 0.8}), Point{0.8}).index[0] == 1);
}

TEST_CASE("cell_center: midpoints and padding") {
  CHECK(cell_center(one_continuous({0.2, 0.8}), {{1}})[0] ==
        doctest::Approx(0.5));
  CHECK(cell_center(one_continuous({0.5}), {{0}})[0] == doctest::Approx(-0.5));
  CHECK(cell_center(one_continuous({0.5}), {{1}})[0] == doctest::Approx(1.5));
  CHECK_THROWS_AS(cell_center(one_continuous({0.5}), {{2}}), InvalidInput);
}

TEST_CASE("binary and categorical routing") {
  using fipe::Node;
  std::vector<FeatureSpec> features = {{"flag", FeatureType::Binary},
                                       {"color", FeatureType::Categorical, 3}};
  Tree t({Node::binary_split(0, 0, 1, 2), Node::leaf(1, test::one_hot(0, 2)),
          Node::category_split(2, 1, 2, 3, 4), Node::leaf(3, test::one_hot(0, 2)),
          Node::leaf(4, test::one_hot(1, 2))},
         0);
  Ensemble e(features, {t}, {1}, 2);
  CHECK(e.predict_class(Point{0, 2}) == 0);  // flag = 0 goes left
  CHECK(e.predict_class(Point{1, 2}) == 1);  // color == 2 goes right
  CHECK(e.predict_class(Point{1, 1}) == 0);
  CHECK_THROWS_AS(e.predict_class(Point{0.5, 1}), InvalidInput);
  CHECK_THROWS_AS(e.predict_class(Point{1, 3}), InvalidInput);
  CHECK(cell_of(e.schema(), Point{1, 2}).index == std::vector<int>{1, 2});
  CHECK(cell_center(e.schema(), {{1, 2}}) == Point{1, 2});
}

TEST_CASE("Tree computes depths and rejects malformed structure") {
  using fipe::Node;
  Tree t({Node::threshold_split(7, 0, 0.5, 1, 2), Node::leaf(8, {1, 0}),
          Node::threshold_split(9, 0, 0.8, 3, 4), Node::leaf(10, {1, 0}),
          Node::leaf(11, {0, 1})},
         0);
  CHECK(t.max_depth() == 2);
  CHECK(t.node(3).depth == 2);
  CHECK(t.num_leaves() == 3);

  CHECK_THROWS_AS(Tree({Node::threshold_split(0, 0, 0.5, 1, 5), Node::leaf(1, {1, 0})}, 0),
                  ModelFormatError);
  CHECK_THROWS_AS(Tree({Node::threshold_split(0, 0, 0.5, 1, 1), Node::leaf(1, {1, 0})}, 0),
                  ModelFormatError);
  CHECK_THROWS_AS(Tree({Node::leaf(0, {1, 0}), Node::leaf(1, {1, 0})}, 0),
                  ModelFormatError);
}

TEST_CASE("Ensemble derives sorted threshold lists from the splits") {
  Ensemble e(test::continuous_features(2),
             {test::stump(0, 0.7, 0, 1, 2), test::stump(1, 0.1, 0, 1, 2),
              test::stump(0, 0.2, 0, 1, 2), test::stump(0, 0.7, 1, 0, 2)},
             {1, 2, 3, 4}, 2);
  auto t0 = e.schema().thresholds(0);
  CHECK(std::vector<double>(t0.begin(), t0.end()) == std::vector<double>{0.2, 0.7});
  CHECK(e.tree(0).node(0).threshold_index == 1);
  CHECK(e.tree(2).node(0).threshold_index == 0);
  CHECK(e.tree(1).node(0).threshold_index == 0);
}

TEST_CASE("Ensemble rejects invalid weights, scores and splits") {
  auto f = test::continuous_features(1);
  auto t = test::stump(0, 0.5, 0, 1, 2);
  CHECK_THROWS_AS(Ensemble(f, {t}, {0}, 2), ModelFormatError);
  CHECK_THROWS_AS(Ensemble(f, {t}, {-1}, 2), ModelFormatError);
  CHECK_THROWS_AS(Ensemble(f, {t}, {1, 1}, 2), ModelFormatError);
  CHECK_THROWS_AS(Ensemble(f, {t}, {1}, 3), ModelFormatError);
  CHECK_THROWS_AS(Ensemble(test::continuous_features(0), {t}, {1}, 2),
                  ModelFormatError);
  std::vector<FeatureSpec> bin = {{"b", FeatureType::Binary}};
  CHECK_THROWS_AS(Ensemble(bin, {t}, {1}, 2), ModelFormatError);
}

TEST_CASE("model_io: round trip is lossless") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto e = test::random_mixed(rng, 1 + trial % 5, 2 + trial % 2);
    const auto doc = model_to_json(e);
    auto back = model_from_json(doc);
    CHECK(model_to_json(back) == doc);
    CHECK(back.schema() == e.schema());
    CHECK(back.weights() == e.weights());
  }
}

TEST_CASE("model_io: distinct diagnostics for invalid files") {
  const std::string good = dump_model(test::three_stumps());
  auto doc = nlohmann::json::parse(good);

  auto code_of = [](const nlohmann::json& d) {
    try {
      model_from_json(d);
    } catch (const ModelFormatError& e) {
      return e.code();
    }
    FAIL("model was accepted");
    return ModelFormatErrc::Syntax;
  };

  auto bad_score = doc;
  bad_score["trees"][0]["nodes"][1]["scores"] = {1.5, 0.0};
  CHECK(code_of(bad_score) == ModelFormatErrc::ScoreOutOfRange);

  auto bad_thresholds = doc;
  bad_thresholds["features"][0]["thresholds"] = {0.8, 0.2};
  CHECK(code_of(bad_thresholds) == ModelFormatErrc::NonMonotoneThresholds);

  auto dangling = doc;
  dangling["trees"][0]["nodes"][0]["left"] = 42;
  CHECK(code_of(dangling) == ModelFormatErrc::DanglingNode);

  auto schema = doc;
  schema.erase("features");
  CHECK(code_of(schema) == ModelFormatErrc::SchemaViolation);

  auto mismatch = doc;
  mismatch["features"][0]["thresholds"] = {0.3, 0.5};
  CHECK(code_of(mismatch) == ModelFormatErrc::SchemaViolation);

  auto version = doc;
  version["format_version"] = 99;
  CHECK(code_of(version) == ModelFormatErrc::UnsupportedVersion);

  CHECK_THROWS_AS(parse_model("{not json"), ModelFormatError);
}

TEST_CASE("model_io: thresholds key is optional") {
  auto doc = model_to_json(test::three_stumps());
  doc["features"][0].erase("thresholds");
  auto e = model_from_json(doc);
  CHECK(e.schema().thresholds(0).size() == 3);
}

TEST_CASE("property: points in one cell reach the same leaves") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    auto e = test::random_mixed(rng, 4, 3);
    for (int k = 0; k < 50; ++k) {
      const Point x = test::random_point(rng, e.schema());
      const Point c = cell_center(e.schema(), cell_of(e.schema(), x));
      for (std::size_t m = 0; m < e.size(); ++m) {
        CHECK(e.tree(m).leaf_index(x) == e.tree(m).leaf_index(c));
      }
    }
  }
}

TEST_CASE("property: argmax is invariant to positive weight scaling") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto e = test::random_stumps(rng, 7, 2, 4, 3);
    std::vector<double> scaled = e.weights();
    const double lambda = 0.01 + (rng() % 1000) / 10.0;
    for (double& w : scaled) w *= lambda;
    for (int k = 0; k < 50; ++k) {
      const Point x = test::random_point(rng, e.schema());
      // Scaling by a power of two is exact, so compare that route too.
      std::vector<double> twice = e.weights();
      for (double& w : twice) w *= 2.0;
      CHECK(e.predict_class(twice, x) == e.predict_class(x));
      const auto a = e.predict_scores(x);
      const auto b = e.predict_scores(scaled, x);
      const int ca = argmax(a);
      // Up to rounding: only near-ties may flip.
      if (argmax(b) != ca) {
        CHECK(std::abs(a[ca] - a[argmax(b)]) < 1e-12);
      }
    }
  }
}

TEST_CASE("property: cell_of inverts cell_center on every cell") {
  std::mt19937_64 rng(29);
  auto e = test::random_mixed(rng, 6, 2);
  const auto& s = e.schema();
  std::vector<int> extent;
  long total = 1;
  for (std::size_t j = 0; j < s.size(); ++j) {
    extent.push_back(s.cell_extent(j));
    total *= extent.back();
  }
  for (long idx = 0; idx < total; ++idx) {
    CellSignature cell;
    long rest = idx;
    for (int k : extent) {
      cell.index.push_back(static_cast<int>(rest % k));
      rest /= k;
    }
    CHECK(cell_of(s, cell_center(s, cell)) == cell);
  }
}

#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fipe/driver.hpp"
#include "fipe/error.hpp"
#include "fipe/verifier.hpp"
#include "fixtures.hpp"

using namespace fipe;

namespace {

std::vector<Point> sample_points(std::mt19937_64& rng, const FeatureSchema& s,
                                 int n) {
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) out.push_back(test::random_point(rng, s));
  return out;
}

std::vector<Point> all_centers(const Ensemble& e) {
  std::vector<Point> out;
  for (const auto& cell : enumerate_cells(e.schema())) {
    out.push_back(cell_center(e.schema(), cell));
  }
  return out;
}

}  // namespace

TEST_CASE("fipe: three-stump instance keeps only the middle tree") {
  auto e = test::three_stumps();
  const std::vector<Point> init = {Point{0.0}, Point{1.0}};
  for (Norm norm : {Norm::L0, Norm::L1}) {
    CAPTURE(to_string(norm));
    FipeOptions o;
    o.norm = norm;
    auto out = fipe::fipe(e, init, o);
    CHECK(out.active == std::vector<int>{1});
    CHECK(out.history.back().added.empty());
    CHECK(out.n_oracle == static_cast<std::size_t>(out.iterations) * 2);
    CHECK(certify(e, out.weights, o.epsilon).identical);
  }
}

TEST_CASE("fipe: already-minimal ensemble keeps every tree") {
  // Majority of three stumps on distinct features.
  Ensemble e(test::continuous_features(3),
             {test::stump(0, 0.5, 0, 1, 2), test::stump(1, 0.5, 0, 1, 2),
              test::stump(2, 0.5, 0, 1, 2)},
             {1, 1, 1}, 2);
  const std::vector<Point> init = {Point{0, 0, 0}};
  auto out = fipe::fipe(e, init);
  CHECK(out.support() == 3);
  CHECK(brute_force_min_support(e, out.prune_set) == 3);
  CHECK(certify(e, out.weights, 1e-6).disagreement_cells.empty());
}

TEST_CASE("fipe: l0 is idempotent on its own output") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    auto e = test::random_stumps(rng, 7, 2, 3, 2);
    const auto init = sample_points(rng, e.schema(), 10);
    auto first = fipe::fipe(e, init);
    auto again = fipe::fipe(e.with_weights(first.weights), init);
    CHECK(again.support() == first.support());
  }
}

TEST_CASE("property: random instances certify, terminate and grow the set") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 25; ++trial) {
    const int num_classes = 2 + trial % 2;
    auto e = (trial % 2 == 0) ? test::random_stumps(rng, 8, 3, 3, num_classes)
                              : test::random_mixed(rng, 5, num_classes);
    const auto init = sample_points(rng, e.schema(), 15);
    FipeOptions o;
    o.norm = (trial % 3 == 0) ? Norm::L0 : Norm::L1;
    FipeOutcome out;
    try {
      out = fipe::fipe(e, init, o);
    } catch (const InvalidInput&) {
      continue;  // every sample tied or sub-epsilon
    }
    auto report = certify(e, out.weights, o.epsilon);
    CHECK(report.disagreement_cells.empty());
    CHECK(static_cast<std::uint64_t>(out.iterations) <= cell_count(e.schema()));
    CHECK(out.n_oracle ==
          static_cast<std::size_t>(out.iterations * num_classes * (num_classes - 1)));

    std::set<CellSignature> added;
    for (std::size_t k = 0; k < out.history.size(); ++k) {
      if (k > 0) {
        CHECK(out.history[k].prune_set_size > out.history[k - 1].prune_set_size);
      }
      for (const auto& cell : out.history[k].added) {
        CHECK(added.insert(cell).second);
      }
    }
    // Fidelity follows from the certificate wherever the margin is >= eps.
    std::vector<Point> visible;
    for (const Point& x : sample_points(rng, e.schema(), 300)) {
      if (prediction_margin(e.predict_scores(x)) >= o.epsilon) visible.push_back(x);
    }
    if (!visible.empty()) CHECK(fidelity(e, out.weights, visible) == 1.0);
  }
}

TEST_CASE("fipe: deterministic for fixed inputs") {
  std::mt19937_64 rng(55);
  auto e = test::random_mixed(rng, 6, 3);
  const auto init = all_centers(e);
  FipeOptions o;
  o.subsample = 10;
  o.seed = 9;
  auto a = fipe::fipe(e, init, o);
  auto b = fipe::fipe(e, init, o);
  CHECK(a.weights == b.weights);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].added == b.history[k].added);
  }
}

TEST_CASE("fipe: run log has one JSON record per iteration") {
  auto e = test::three_stumps();
  const std::vector<Point> init = {Point{0.0}};
  std::ostringstream log;
  FipeOptions o;
  o.run_log = &log;
  auto out = fipe::fipe(e, init, o);
  std::istringstream in(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["iteration"] == lines + 1);
    CHECK(j.contains("prune_set_size"));
    CHECK(j["pair_objectives"].size() == 2);
    ++lines;
  }
  CHECK(lines == out.iterations);
}

TEST_CASE("fipe: errors") {
  auto e = test::three_stumps();
  const std::vector<Point> none;
  CHECK_THROWS_AS(fipe::fipe(e, none), InvalidInput);
  const std::vector<Point> init = {Point{0.0}};
  FipeOptions o;
  o.epsilon = 0.0;
  CHECK_THROWS_AS(fipe::fipe(e, init, o), InvalidInput);
  o = {};
  o.max_iterations = 0;
  CHECK_THROWS_AS(fipe::fipe(e, init, o), InvalidInput);
  o = {};
  o.max_iterations = 1;  // one point cannot certify on the first pass
  CHECK_THROWS_AS(fipe::fipe(e, init, o), IterationLimitExceeded);
  const std::vector<Point> wrong_arity = {Point{0.0, 1.0}};
  CHECK_THROWS_AS(fipe::fipe(e, wrong_arity), InvalidInput);
}

TEST_CASE("fipe: tied initial points") {
  Ensemble tied(test::continuous_features(1),
                {test::stump(0, 0.5, 0, 1, 2), test::stump(0, 0.5, 1, 0, 2)},
                {1, 1}, 2);
  const std::vector<Point> init = {Point{0.2}};
  CHECK_THROWS_AS(fipe::fipe(tied, init), InvalidInput);
  for (Norm norm : {Norm::L0, Norm::L1}) {
    FipeOptions o;
    o.norm = norm;
    o.drop_sub_epsilon_points = false;
    CHECK_THROWS_AS(fipe::fipe(tied, init, o), TiedPrediction);
  }
}

TEST_CASE("fidelity") {
  // alpha = (1, 2); the second tree alone decides (0.3, 0.6].
  Ensemble e(test::continuous_features(1),
             {test::stump(0, 0.3, 0, 1, 2), test::stump(0, 0.6, 0, 1, 2)},
             {1, 2}, 2);
  const std::vector<Point> pts = {Point{0.1}, Point{0.4}, Point{0.5}, Point{0.9}};
  CHECK(fidelity(e, e.weights(), pts) == 1.0);
  const std::vector<double> w = {1, 0};
  CHECK(fidelity(e, w, pts) == doctest::Approx(0.5));
  const std::vector<Point> none;
  CHECK_THROWS_AS(fidelity(e, w, none), InvalidInput);
}

TEST_CASE("accuracy") {
  auto e = test::three_stumps();
  // Classes under alpha: 0, 0, 1, 1, 1.
  const std::vector<Point> pts = {Point{0.1}, Point{0.4}, Point{0.6}, Point{0.8},
                                  Point{2.0}};
  const std::vector<int> right = {0, 0, 1, 1, 1};
  const std::vector<int> wrong = {1, 1, 0, 0, 0};
  const std::vector<int> mixed = {0, 1, 1, 0, 1};
  CHECK(accuracy(e, e.weights(), pts, right) == 1.0);
  CHECK(accuracy(e, e.weights(), pts, wrong) == 0.0);
  CHECK(accuracy(e, e.weights(), pts, mixed) == doctest::Approx(0.6));
  const std::vector<int> bad = {0, 0, 1, 1, 2};
  CHECK_THROWS_AS(accuracy(e, e.weights(), pts, bad), InvalidInput);
  const std::vector<int> short_labels = {0};
  CHECK_THROWS_AS(accuracy(e, e.weights(), pts, short_labels), InvalidInput);
}

TEST_CASE("parse_norm") {
  CHECK(parse_norm("l0") == Norm::L0);
  CHECK(parse_norm("l1") == Norm::L1);
  CHECK_THROWS_AS(parse_norm("l2"), InvalidInput);
}

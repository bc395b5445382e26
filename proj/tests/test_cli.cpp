#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "fipe/model_io.hpp"
#include "fipe/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = FIPE_DATA_DIR;

struct Result {
  int code;
  std::string out, err;
};

Result fipe_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fipe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = fipe::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("fipe_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }
std::string data(const std::string& name) { return (kData / name).string(); }

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("train: adaboost on xor loads cleanly, forest has unit weights") {
  auto r = fipe_cli({"train", "--data", data("xor.csv"), "--model", "ab",
                     "--n-estimators", "10", "--out", path("xor_ab.json")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("training accuracy") != std::string::npos);
  auto e = fipe::load_model(path("xor_ab.json"));
  CHECK(e.size() == 10);

  r = fipe_cli({"train", "--data", data("blobs.csv"), "--model", "rf",
                "--n-estimators", "5", "--out", path("blobs_rf.json")});
  REQUIRE(r.code == 0);
  CHECK(fipe::load_model(path("blobs_rf.json")).weights() == std::vector<double>(5, 1.0));
}

TEST_CASE("train: deterministic per seed") {
  for (const char* name : {"a.json", "b.json"}) {
    REQUIRE(fipe_cli({"train", "--data", data("blobs.csv"), "--model", "rf",
                      "--n-estimators", "4", "--seed", "3", "--out", path(name)})
                .code == 0);
  }
  CHECK(slurp(path("a.json")) == slurp(path("b.json")));
  REQUIRE(fipe_cli({"train", "--data", data("blobs.csv"), "--model", "rf",
                    "--n-estimators", "4", "--seed", "4", "--out", path("c.json")})
              .code == 0);
  CHECK(slurp(path("a.json")) != slurp(path("c.json")));
}

TEST_CASE("train: schema file and bad input") {
  CHECK(fipe_cli({"train", "--data", data("xor.csv"), "--schema", data("xy_schema.json"),
                  "--n-estimators", "3", "--out", path("s.json")})
            .code == 0);
  CHECK(fipe_cli({"train", "--data", data("missing.csv"), "--out", path("x.json")}).code == 4);
  CHECK(fipe_cli({"train", "--data", data("xor.csv"), "--model", "gbm", "--out",
                  path("x.json")})
            .code == 4);
  CHECK(fipe_cli({"train", "--data", data("three_stumps_points.csv"), "--schema",
                  data("xy_schema.json"), "--out", path("x.json")})
            .code == 4);
  CHECK(fipe_cli({}).code == 4);
  CHECK(fipe_cli({"--help"}).code == 0);
}

TEST_CASE("prune: three-stump fixture keeps one tree and verifies") {
  for (const char* norm : {"l0", "l1"}) {
    CAPTURE(norm);
    auto r = fipe_cli({"prune", "--model", data("three_stumps.json"), "--data",
                       data("three_stumps_points.csv"), "--norm", norm, "--out",
                       path("stumps_pruned.json"), "--report", path("stumps_report.json")});
    REQUIRE(r.code == 0);
    auto rep = read_json(path("stumps_report.json"));
    CHECK(rep["m_original"] == 3);
    CHECK(rep["m_pruned"] == 1);
    CHECK(rep["active"] == json::array({1}));
    CHECK(rep["fidelity_test"] == 1.0);
    CHECK(rep["accuracy_test"] == 1.0);
    for (const char* key : {"format_version", "weights", "iterations", "n_oracle", "wall_time"}) {
      CHECK(rep.contains(key));
    }
    CHECK(rep["wall_time"].contains("prune"));
    CHECK(rep["wall_time"].contains("oracle"));
    // Same trees, new weights.
    auto original = read_json(data("three_stumps.json"));
    auto pruned = read_json(path("stumps_pruned.json"));
    CHECK(pruned["trees"] == fipe::model_to_json(fipe::load_model(data("three_stumps.json")))["trees"]);
    CHECK(pruned["weights"] != original["weights"]);

    r = fipe_cli({"verify", "--model", data("three_stumps.json"), "--pruned",
                  path("stumps_pruned.json")});
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["identical"] == true);
  }
}

TEST_CASE("prune: single tree and report on stdout") {
  auto r = fipe_cli({"prune", "--model", data("single_tree.json"), "--data",
                     data("three_stumps_points.csv"), "--out", path("single_pruned.json"),
                     "--report", "-"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["m_pruned"] == 1);
}

TEST_CASE("prune: l1 support is at least the l0 support") {
  REQUIRE(fipe_cli({"train", "--data", data("xor.csv"), "--n-estimators", "10",
                    "--max-depth", "2", "--out", path("xor10.json")})
              .code == 0);
  std::size_t support[2];
  int k = 0;
  for (const char* norm : {"l1", "l0"}) {
    REQUIRE(fipe_cli({"prune", "--model", path("xor10.json"), "--data", data("xor.csv"),
                      "--norm", norm, "--out", path("xor10_pruned.json"), "--report",
                      path("xor10_report.json")})
                .code == 0);
    support[k++] = read_json(path("xor10_report.json"))["m_pruned"];
    CHECK(fipe_cli({"verify", "--model", path("xor10.json"), "--pruned",
                    path("xor10_pruned.json")})
              .code == 0);
  }
  CHECK(support[0] >= support[1]);
}

TEST_CASE("prune: bad input") {
  CHECK(fipe_cli({"prune", "--model", data("three_stumps.json"), "--data", data("xor.csv"),
                  "--out", path("p.json")})
            .code == 4);
  CHECK(fipe_cli({"prune", "--model", data("three_stumps.json"), "--data",
                  data("three_stumps_points.csv"), "--norm", "l2", "--out", path("p.json")})
            .code == 4);
  CHECK(fipe_cli({"prune", "--model", data("three_stumps.json"), "--data",
                  data("three_stumps_points.csv"), "--epsilon", "0", "--out", path("p.json")})
            .code == 4);
  // One iteration cannot both prune and certify this instance.
  std::ofstream(path("one_point.csv")) << "x0\n0.0\n";
  CHECK(fipe_cli({"prune", "--model", data("three_stumps.json"), "--data",
                  path("one_point.csv"), "--max-iters", "1", "--out", path("p.json")})
            .code == 5);
}

TEST_CASE("verify: model against itself, zeroed necessary tree, cap") {
  CHECK(fipe_cli({"verify", "--model", data("three_stumps.json"), "--pruned",
                  data("three_stumps.json")})
            .code == 0);

  auto doc = read_json(data("three_stumps.json"));
  doc["weights"] = {1.0, 0.0, 0.0};
  std::ofstream(path("first_only.json")) << doc.dump();
  auto r = fipe_cli({"verify", "--model", data("three_stumps.json"), "--pruned",
                     path("first_only.json")});
  CHECK(r.code == 3);
  auto rep = json::parse(r.out);
  CHECK(rep["identical"] == false);
  // Only (0.3, 0.5] changes class: the first stump alone says 1 there.
  REQUIRE(rep["disagreement_cells"].size() == 1);
  CHECK(rep["disagreement_cells"][0]["cell"] == json::array({1}));
  CHECK(rep["oracle_separating"].size() >= 1);
  CHECK(r.err.find("cell [1]") != std::string::npos);

  CHECK(fipe_cli({"verify", "--model", data("three_stumps.json"), "--pruned",
                  data("three_stumps.json"), "--max-cells", "2"})
            .code == 4);
  CHECK(fipe_cli({"verify", "--model", data("three_stumps.json"), "--pruned",
                  data("single_tree.json")})
            .code == 4);
}

TEST_CASE("predict: matches the library and rejects empty data") {
  auto r = fipe_cli({"predict", "--model", data("single_tree.json"), "--data",
                     data("three_stumps_points.csv")});
  REQUIRE(r.code == 0);
  CHECK(r.out == "prediction\n0\n0\n1\n1\n");

  REQUIRE(fipe_cli({"train", "--data", data("blobs.csv"), "--n-estimators", "8",
                    "--max-depth", "2", "--out", path("blobs_ab.json")})
              .code == 0);
  auto e = fipe::load_model(path("blobs_ab.json"));
  fipe::Dataset ten = fipe::make_synthetic(fipe::SyntheticKind::Blobs, 10, 77);
  ten.labels.clear();
  fipe::save_csv(ten, path("ten.csv"));
  REQUIRE(fipe_cli({"predict", "--model", path("blobs_ab.json"), "--data", path("ten.csv"),
                    "--out", path("ten_pred.csv")})
              .code == 0);
  std::istringstream lines(slurp(path("ten_pred.csv")));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "prediction");
  for (const auto& x : ten.rows) {
    REQUIRE(std::getline(lines, line));
    CHECK(std::stoi(line) == e.predict_class(x));
  }

  std::ofstream(path("empty.csv")) << "x0\n";
  CHECK(fipe_cli({"predict", "--model", data("single_tree.json"), "--data",
                  path("empty.csv")})
            .code == 4);
}

TEST_CASE("bundled fixtures: prune then verify exits 0") {
  struct Case {
    std::string model, data;
  };
  std::vector<Case> cases = {{data("three_stumps.json"), data("three_stumps_points.csv")},
                             {data("single_tree.json"), data("three_stumps_points.csv")}};
  for (const char* csv : {"xor.csv", "separable.csv", "blobs.csv"}) {
    const std::string m = path(std::string("fx_") + csv + ".json");
    REQUIRE(fipe_cli({"train", "--data", data(csv), "--n-estimators", "8",
                      "--max-depth", "2", "--out", m})
                .code == 0);
    cases.push_back({m, data(csv)});
  }
  for (const auto& c : cases) {
    CAPTURE(c.model);
    REQUIRE(fipe_cli({"prune", "--model", c.model, "--data", c.data, "--out",
                      path("fx_pruned.json")})
                .code == 0);
    CHECK(fipe_cli({"verify", "--model", c.model, "--pruned", path("fx_pruned.json")})
              .code == 0);
  }
}

TEST_CASE("synth writes a loadable dataset") {
  REQUIRE(fipe_cli({"synth", "--kind", "separable", "--n", "20", "--out",
                    path("sep.csv")})
              .code == 0);
  auto d = fipe::load_csv(path("sep.csv"));
  CHECK(d.size() == 20);
  CHECK(fipe_cli({"synth", "--kind", "moons"}).code == 4);
}

#include "cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fipe/driver.hpp"
#include "fipe/error.hpp"
#include "fipe/model_io.hpp"
#include "fipe/oracle.hpp"
#include "fipe/trainer.hpp"
#include "fipe/verifier.hpp"

namespace fipe::cli {
namespace {

using nlohmann::json;

struct TrainArgs {
  std::string data, schema, model = "ab", out;
  int n_estimators = 100;
  std::optional<int> max_depth;
  std::uint64_t seed = 0;
};

struct PruneArgs {
  std::string model, data, test, norm = "l1", out, report, run_log;
  double epsilon = 1e-6;
  int max_iters = 1000;
  std::optional<std::size_t> subsample;
  std::uint64_t seed = 0;
  bool sequential = false;
};

struct VerifyArgs {
  std::string model, pruned, report;
  double epsilon = 1e-6;
  std::uint64_t max_cells = kDefaultMaxCells;
};

struct PredictArgs {
  std::string model, data, out;
};

struct SynthArgs {
  std::string kind, out;
  std::size_t n = 200;
  std::uint64_t seed = 0;
};

void write_json(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << doc.dump(2) << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot write " + path);
  f << doc.dump(2) << '\n';
}

json cell_json(const FeatureSchema& schema, const CellSignature& cell) {
  json j = json::object();
  j["cell"] = cell.index;
  j["center"] = cell_center(schema, cell).values;
  return j;
}

json disagreement_json(const FeatureSchema& schema, const CellDisagreement& d) {
  json j = cell_json(schema, d.cell);
  j["original_class"] = d.original_class;
  j["pruned_class"] = d.pruned_class;
  j["original_margin"] = d.original_margin;
  return j;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  std::vector<FeatureSpec> schema;
  if (!a.schema.empty()) schema = load_features(a.schema);
  const Dataset data = load_csv(a.data, a.schema.empty() ? nullptr : &schema);
  const bool forest = a.model == "rf";
  const int depth = a.max_depth.value_or(forest ? 3 : 1);
  const Ensemble e = forest
                         ? train_random_forest(data, a.n_estimators, depth, a.seed)
                         : train_adaboost(data, a.n_estimators, depth, a.seed);
  save_model(e, a.out);
  out << "trained " << (forest ? "random forest" : "adaboost") << " with "
      << e.size() << " trees, training accuracy "
      << accuracy(e, e.weights(), data.rows, data.labels) << '\n';
  return kOk;
}

int cmd_prune(const PruneArgs& a, std::ostream& out, std::ostream& err) {
  const Ensemble e = load_model(a.model);
  const auto& features = e.schema().features();
  const Dataset train = load_csv(a.data, &features);
  if (train.rows.empty()) throw InvalidInput(a.data + " has no rows");
  const Dataset test = a.test.empty() ? train : load_csv(a.test, &features);

  FipeOptions o;
  o.norm = parse_norm(a.norm);
  o.epsilon = a.epsilon;
  o.max_iterations = a.max_iters;
  o.seed = a.seed;
  o.subsample = a.subsample;
  o.parallel = !a.sequential;
  std::ofstream log;
  if (!a.run_log.empty()) {
    log.open(a.run_log);
    if (!log) throw InvalidInput("cannot write " + a.run_log);
    o.run_log = &log;
  }

  const FipeOutcome r = fipe::fipe(e, train.rows, o);
  const Ensemble pruned = e.with_weights(r.weights);
  save_model(pruned, a.out);

  json report;
  report["format_version"] = kReportFormatVersion;
  report["norm"] = to_string(o.norm);
  report["epsilon"] = o.epsilon;
  report["m_original"] = e.size();
  report["m_pruned"] = r.support();
  report["active"] = r.active;
  report["weights"] = r.weights;
  report["iterations"] = r.iterations;
  report["n_oracle"] = r.n_oracle;
  report["dropped_points"] = r.dropped_points;
  report["prune_set_size"] = r.prune_set.size();
  if (test.rows.empty()) {
    report["fidelity_test"] = nullptr;
  } else {
    report["fidelity_test"] = fidelity(e, r.weights, test.rows);
  }
  if (test.labeled() && !test.rows.empty()) {
    report["accuracy_test"] = accuracy(e, r.weights, test.rows, test.labels);
    report["accuracy_test_original"] =
        accuracy(e, e.weights(), test.rows, test.labels);
  } else {
    report["accuracy_test"] = nullptr;
    report["accuracy_test_original"] = nullptr;
  }
  report["wall_time"] = {{"prune", r.prune_seconds},
                         {"oracle", r.oracle_seconds},
                         {"total", r.total_seconds}};
  if (!a.report.empty()) write_json(report, a.report, out);
  std::ostream& summary = a.report == "-" ? err : out;
  summary << "kept " << r.support() << " of " << e.size() << " trees after "
      << r.iterations << " iterations (" << r.n_oracle << " oracle calls)\n";
  return kOk;
}

bool same_trees(const Ensemble& a, const Ensemble& b) {
  if (a.num_classes() != b.num_classes() || a.size() != b.size()) return false;
  const json ja = model_to_json(a), jb = model_to_json(b);
  return ja["trees"] == jb["trees"] && ja["features"] == jb["features"];
}

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  const Ensemble e = load_model(a.model);
  const Ensemble p = load_model(a.pruned);
  if (!same_trees(e, p)) {
    throw InvalidInput(a.pruned + " does not share the trees of " + a.model);
  }
  const FeatureSchema& schema = e.schema();
  const CertificationReport cert = certify(e, p.weights(), a.epsilon, a.max_cells);

  SeparationOptions so;
  so.epsilon = a.epsilon;
  const SeparationResult sep = separate(e, p.weights(), so);

  json report;
  report["format_version"] = kReportFormatVersion;
  report["epsilon"] = a.epsilon;
  report["cells_checked"] = cert.cells_checked;
  report["disagreement_cells"] = json::array();
  for (const auto& d : cert.disagreement_cells) {
    report["disagreement_cells"].push_back(disagreement_json(schema, d));
  }
  report["sub_epsilon_cells"] = json::array();
  for (const auto& d : cert.sub_epsilon_cells) {
    report["sub_epsilon_cells"].push_back(disagreement_json(schema, d));
  }
  report["pruned_tie_cells"] = cert.pruned_tie_cells.size();
  report["oracle_calls"] = sep.calls();
  report["oracle_separating"] = json::array();
  for (const auto& pair : sep.pairs) {
    if (!pair.cell) continue;
    json j = cell_json(schema, *pair.cell);
    j["c"] = pair.c;
    j["y"] = pair.y;
    j["objective"] = pair.objective;
    report["oracle_separating"].push_back(j);
  }
  const bool identical = cert.disagreement_cells.empty() && sep.empty();
  report["identical"] = identical;
  report["identical_everywhere"] = identical && cert.sub_epsilon_cells.empty();
  write_json(report, a.report, out);

  if (!cert.sub_epsilon_cells.empty()) {
    err << "note: " << cert.sub_epsilon_cells.size()
        << " disagreeing cells have original margin below epsilon\n";
  }
  if (identical) return kOk;
  err << "not identical: " << cert.disagreement_cells.size()
      << " disagreeing cells, " << report["oracle_separating"].size()
      << " separating oracle points\n";
  for (const auto& d : cert.disagreement_cells) {
    err << "  cell [";
    for (std::size_t j = 0; j < d.cell.size(); ++j) {
      err << (j ? "," : "") << d.cell.index[j];
    }
    err << "] original " << d.original_class << " pruned " << d.pruned_class
        << '\n';
  }
  return kNotIdentical;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Ensemble e = load_model(a.model);
  const Dataset data = load_csv(a.data, &e.schema().features());
  if (data.rows.empty()) throw InvalidInput(a.data + " has no rows");
  std::ofstream file;
  std::ostream* dst = &out;
  if (!a.out.empty() && a.out != "-") {
    file.open(a.out);
    if (!file) throw InvalidInput("cannot write " + a.out);
    dst = &file;
  }
  *dst << "prediction\n";
  for (const Point& x : data.rows) *dst << e.predict_class(x) << '\n';
  return kOk;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const Dataset d = make_synthetic(parse_synthetic_kind(a.kind), a.n, a.seed);
  if (a.out.empty() || a.out == "-") {
    write_csv(out, d);
  } else {
    save_csv(d, a.out);
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Faithful pruning of tree ensembles", "fipe"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train an AdaBoost or random-forest model");
  train->add_option("--data", ta.data, "Labeled CSV")->required();
  train->add_option("--schema", ta.schema, "Feature schema JSON");
  train->add_option("--model", ta.model, "ab or rf")
      ->check(CLI::IsMember({"ab", "rf"}))
      ->capture_default_str();
  train->add_option("--n-estimators", ta.n_estimators)->capture_default_str();
  train->add_option("--max-depth", ta.max_depth, "Default 1 for ab, 3 for rf");
  train->add_option("--seed", ta.seed)->capture_default_str();
  train->add_option("--out", ta.out, "Model file to write")->required();

  PruneArgs pa;
  auto* prune = app.add_subcommand("prune", "Prune a model with certified fidelity");
  prune->add_option("--model", pa.model)->required();
  prune->add_option("--data", pa.data, "CSV of initial points")->required();
  prune->add_option("--test", pa.test, "CSV for fidelity and accuracy (default: --data)");
  prune->add_option("--norm", pa.norm)
      ->check(CLI::IsMember({"l0", "l1"}))
      ->capture_default_str();
  prune->add_option("--epsilon", pa.epsilon)->capture_default_str();
  prune->add_option("--max-iters", pa.max_iters)->capture_default_str();
  prune->add_option("--subsample", pa.subsample, "Keep this many initial points");
  prune->add_option("--seed", pa.seed)->capture_default_str();
  prune->add_option("--out", pa.out, "Pruned model file")->required();
  prune->add_option("--report", pa.report, "Report JSON ('-' for stdout)");
  prune->add_option("--run-log", pa.run_log, "Per-iteration JSON lines");
  prune->add_flag("--sequential", pa.sequential, "Solve oracle pairs one at a time");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Check a pruned model against the original");
  verify->add_option("--model", va.model)->required();
  verify->add_option("--pruned", va.pruned)->required();
  verify->add_option("--epsilon", va.epsilon)->capture_default_str();
  verify->add_option("--max-cells", va.max_cells)->capture_default_str();
  verify->add_option("--report", va.report, "Report JSON (default stdout)");

  PredictArgs pra;
  auto* predict = app.add_subcommand("predict", "Predict classes for a CSV");
  predict->add_option("--model", pra.model)->required();
  predict->add_option("--data", pra.data)->required();
  predict->add_option("--out", pra.out, "CSV to write (default stdout)");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("--kind", sa.kind, "blobs, xor or separable")->required();
  synth->add_option("--n", sa.n)->capture_default_str();
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--out", sa.out, "CSV to write (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*train) return cmd_train(ta, out);
    if (*prune) return cmd_prune(pa, out, err);
    if (*verify) return cmd_verify(va, out, err);
    if (*predict) return cmd_predict(pra, out);
    if (*synth) return cmd_synth(sa, out);
  } catch (const InfeasiblePruning& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const IterationLimitExceeded& e) {
    err << "iteration limit: " << e.what() << '\n';
    return kIterationLimit;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const ModelFormatError& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const CapExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const TiedPrediction& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const Error& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace fipe::cli

// fairpen: train, sweep, evaluate and post-process fairness-penalized
// logistic regression from the command line.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairpen/fairpen.hpp"

namespace {

using namespace fairpen;
using nlohmann::json;

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tags a failure with the stage it happened in.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw UsageError(flag + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct SchemaFlags {
  std::string data;
  std::string label;
  std::string protected_col;
  std::string positive_label = "1";
  std::string protected_one = "1";
  std::string categoricals;
  bool include_protected = true;
  std::string schema_config;
  bool no_standardize = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "input CSV (header row, comma separated)")->required();
    cmd->add_option("--label", label, "label column");
    cmd->add_option("--protected", protected_col, "protected attribute column");
    cmd->add_option("--positive-label", positive_label, "raw label value mapped to 1")->capture_default_str();
    cmd->add_option("--protected-one", protected_one, "raw protected value mapped to 1")->capture_default_str();
    cmd->add_option("--categoricals", categoricals, "comma-separated columns to one-hot encode");
    cmd->add_option("--include-protected", include_protected, "use the protected attribute as a feature")
        ->capture_default_str();
    cmd->add_option("--schema-config", schema_config, "key=value schema file (flags override it)");
    cmd->add_flag("--no-standardize", no_standardize, "do not z-score non-protected features");
  }

  DataSchema schema(const CLI::App* cmd) const {
    DataSchema s;
    if (!schema_config.empty()) {
      std::ifstream in(schema_config);
      if (!in) throw UsageError("cannot open schema config '" + schema_config + "'");
      s = parse_schema_config(in);
    }
    if (cmd->count("--label")) s.label_column = label;
    if (cmd->count("--protected")) s.protected_column = protected_col;
    if (cmd->count("--positive-label") || schema_config.empty()) s.positive_label = positive_label;
    if (cmd->count("--protected-one") || schema_config.empty()) s.protected_one = protected_one;
    if (cmd->count("--categoricals")) s.categorical_columns = parse_names(categoricals);
    if (cmd->count("--include-protected") || schema_config.empty()) s.include_protected_as_feature = include_protected;
    if (s.label_column.empty() || s.protected_column.empty())
      throw UsageError("--label and --protected (or a schema config naming them) are required");
    return s;
  }
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("FAIRPEN_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("FAIRPEN_SEED must be a non-negative integer");
    }
  }
  return 1;
}

LoadResult load_data(const std::string& path, const DataSchema& schema) {
  auto loaded = stage("load", [&] { return load_csv(path, schema); });
  if (loaded.dropped_rows)
    std::cerr << "fairpen: dropped " << loaded.dropped_rows << " row(s) with missing values\n";
  return loaded;
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------

struct TrainCmd {
  SchemaFlags schema;
  double c1 = 0, c2 = 0, q = 0;
  std::string kind = "sd";
  std::string out;
  std::uint64_t seed = 1;

  void attach(CLI::App* cmd) {
    schema.attach(cmd);
    cmd->add_option("--c1", c1, "weight on the FPR penalizer")->check(CLI::NonNegativeNumber);
    cmd->add_option("--c2", c2, "weight on the FNR penalizer")->check(CLI::NonNegativeNumber);
    cmd->add_option("--q", q, "l2 weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--kind", kind, "penalizer: avd or sd")->check(CLI::IsMember({"avd", "sd"}))->capture_default_str();
    cmd->add_option("--out", out, "model JSON path")->required();
    cmd->add_option("--seed", seed, "random seed (training itself is deterministic)");
  }

  int run(const CLI::App* cmd) {
    const auto s = schema.schema(cmd);
    auto loaded = load_data(schema.data, s);
    SavedModel model;
    model.schema = s;
    model.encoding = loaded.encoding;
    model.standardization = schema.no_standardize ? Standardization::identity(loaded.data.dim())
                                                  : fit_standardization(loaded.data);
    const auto ds = model.standardization.apply(loaded.data);
    TrainConfig cfg;
    cfg.c1 = c1;
    cfg.c2 = c2;
    cfg.q = q;
    cfg.kind = parse_penalty_kind(kind);
    const auto res = stage("fit", [&] { return fit(ds, cfg); });
    if (!res.converged) std::cerr << "fairpen: solver stopped at max_iters without meeting a tolerance\n";
    model.params = res.params;
    model.c1 = c1;
    model.c2 = c2;
    model.q = q;
    model.kind = cfg.kind;
    const auto summary = stage("eval", [&] { return evaluate(model.params, ds); });
    stage("write", [&] {
      write_file_atomic(out, to_json(model).dump(2) + "\n");
      return 0;
    });
    print_json(to_json(summary));
    return 0;
  }
};

struct SweepCmd {
  SchemaFlags schema;
  std::string kind = "sd";
  std::string c_grid;
  std::string q_grid;
  std::string weight_mode = "both";
  double d1 = 1, d2 = 1;
  std::size_t folds = 5, reps = 5, jobs = 1;
  double test_fraction = 0.3;
  std::uint64_t seed = 1;
  bool stratify = false;
  std::string out;

  void attach(CLI::App* cmd) {
    schema.attach(cmd);
    cmd->add_option("--kind", kind, "penalizer: avd or sd")->check(CLI::IsMember({"avd", "sd"}))->capture_default_str();
    cmd->add_option("--c-grid", c_grid, "comma-separated ascending c values starting at 0");
    cmd->add_option("--q-grid", q_grid, "comma-separated l2 weights (default scales with training size)");
    cmd->add_option("--weight-mode", weight_mode, "c -> (c1,c2): fp, fn or both")
        ->check(CLI::IsMember({"fp", "fn", "both"}))
        ->capture_default_str();
    cmd->add_option("--d1", d1, "weight on D_FPR in the selection objective")->check(CLI::NonNegativeNumber);
    cmd->add_option("--d2", d2, "weight on D_FNR in the selection objective")->check(CLI::NonNegativeNumber);
    cmd->add_option("--folds", folds, "cross-validation folds")->check(CLI::Range(2, 1000000))->capture_default_str();
    cmd->add_option("--reps", reps, "repetitions with fresh splits")->check(CLI::Range(1, 1000000))->capture_default_str();
    cmd->add_option("--test-fraction", test_fraction, "held-out fraction")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--jobs", jobs, "concurrent fit tasks")->check(CLI::Range(1, 1024))->capture_default_str();
    cmd->add_flag("--stratify", stratify, "stratify the train/test split on the label");
    cmd->add_option("--out", out, "output directory for report.json and sweep.tsv")->required();
  }

  int run(const CLI::App* cmd) {
    const auto s = schema.schema(cmd);
    SchemeConfig cfg;
    if (!c_grid.empty()) cfg.c_grid = parse_list(c_grid, "--c-grid");
    if (!q_grid.empty()) cfg.q_grid = parse_list(q_grid, "--q-grid");
    cfg.kind = parse_penalty_kind(kind);
    cfg.weight_mode = parse_weight_mode(weight_mode);
    cfg.d1 = d1;
    cfg.d2 = d2;
    cfg.folds = folds;
    cfg.repetitions = reps;
    cfg.test_fraction = test_fraction;
    cfg.seed = seed;
    cfg.jobs = jobs;
    cfg.stratify = stratify;
    cfg.standardize = !schema.no_standardize;
    try {
      cfg.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    auto loaded = load_data(schema.data, s);
    const auto report = stage("sweep", [&] { return run_scheme(loaded.data, cfg); });
    stage("write", [&] {
      std::filesystem::create_directories(out);
      write_file_atomic(std::filesystem::path(out) / "report.json", to_json(report).dump(2) + "\n");
      std::ostringstream tsv;
      write_sweep_tsv(tsv, report);
      write_file_atomic(std::filesystem::path(out) / "sweep.tsv", tsv.str());
      return 0;
    });
    json summary = {{"accuracy", report.mean_accuracy},
                    {"d_fpr", report.mean_d_fpr},
                    {"d_fnr", report.mean_d_fnr},
                    {"repetitions", report.reps.size()}};
    json chosen = json::array();
    for (const auto& r : report.reps) chosen.push_back(r.chosen().c);
    summary["selected_c"] = chosen;
    print_json(summary);
    return 0;
  }
};

struct EvalCmd {
  std::string model;
  std::string data;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model, "model JSON written by train")->required();
    cmd->add_option("--data", data, "CSV to evaluate")->required();
  }

  int run(const CLI::App*) {
    const auto m = stage("load", [&] { return load_model(model); });
    const auto ds = stage("load", [&] { return m.prepare(data); });
    const auto summary = stage("eval", [&] { return evaluate(m.params, ds); });
    print_json(to_json(summary));
    return 0;
  }
};

struct SynthCmd {
  double epsilon = 0.1;
  std::size_t n = 5000;
  std::uint64_t seed = 1;
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--epsilon", epsilon, "flip probability of A; X2 flips with 2*epsilon")->capture_default_str();
    cmd->add_option("--n", n, "number of points")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--out", out, "CSV path (default: stdout)");
  }

  int run(const CLI::App*) {
    if (!(epsilon > 0 && epsilon < 0.25)) throw UsageError("--epsilon must lie strictly inside (0, 0.25)");
    const auto ds = stage("synth", [&] { return sample_d_epsilon({epsilon, n, seed}); });
    std::ostringstream csv;
    write_d_epsilon_csv(csv, ds);
    if (out.empty()) {
      std::cout << csv.str();
    } else {
      stage("write", [&] {
        write_file_atomic(out, csv.str());
        return 0;
      });
    }
    return 0;
  }
};

struct PostprocessCmd {
  std::string model;
  std::string data;
  double target = 0.0;
  double resolution = 0.01;
  std::uint64_t seed = 1;
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model, "model JSON written by train")->required();
    cmd->add_option("--data", data, "CSV the flip probabilities are fit on")->required();
    cmd->add_option("--target", target, "bound on expected D_FPR and D_FNR")->check(CLI::NonNegativeNumber);
    cmd->add_option("--resolution", resolution, "grid step for flip probabilities (must divide 1)")
        ->check(CLI::Range(1e-6, 1.0))
        ->capture_default_str();
    cmd->add_option("--seed", seed, "seed for the randomized predictions");
    cmd->add_option("--out", out, "predictor JSON path");
  }

  int run(const CLI::App*) {
    const auto m = stage("load", [&] { return load_model(model); });
    const auto ds = stage("load", [&] { return m.prepare(data); });
    const auto res = stage("postprocess", [&] { return postprocess_equalize(m.params, ds, target, resolution, seed); });
    const auto sampled = stage("eval", [&] { return summarize(res.predictor.predict_all(ds), ds); });
    if (!out.empty())
      stage("write", [&] {
        write_file_atomic(out, to_json(res.predictor).dump(2) + "\n");
        return 0;
      });
    print_json({{"predictor", to_json(res.predictor)}, {"expected", to_json(res.expected)}, {"sampled", to_json(sampled)}});
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-penalized logistic regression"};
  app.require_subcommand(1);

  TrainCmd train;
  SweepCmd sweep;
  EvalCmd eval;
  SynthCmd synth;
  PostprocessCmd post;
  auto* train_cmd = app.add_subcommand("train", "fit once with fixed hyperparameters");
  auto* sweep_cmd = app.add_subcommand("sweep", "split, cross-validate, sweep c, select and evaluate");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a CSV");
  auto* synth_cmd = app.add_subcommand("synth", "sample the two-feature toy distribution as CSV");
  auto* post_cmd = app.add_subcommand("postprocess", "fit group-dependent random flips to equalize rates");
  train.attach(train_cmd);
  sweep.attach(sweep_cmd);
  eval.attach(eval_cmd);
  synth.attach(synth_cmd);
  post.attach(post_cmd);

  std::string active;
  try {
    const auto env_seed = default_seed();
    train.seed = sweep.seed = synth.seed = post.seed = env_seed;
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "fairpen: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*train_cmd) return (active = "train", train.run(train_cmd));
    if (*sweep_cmd) return (active = "sweep", sweep.run(sweep_cmd));
    if (*eval_cmd) return (active = "eval", eval.run(eval_cmd));
    if (*synth_cmd) return (active = "synth", synth.run(synth_cmd));
    if (*post_cmd) return (active = "postprocess", post.run(post_cmd));
  } catch (const UsageError& e) {
    std::cerr << "fairpen " << active << ": " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "fairpen " << active << ": " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}

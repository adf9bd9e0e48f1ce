// protoclue command-line driver.
//
//   protoclue gen-synthetic --out-dir data
//   protoclue train-source --source data/source.eefc --out data/head.eefc
//   protoclue adapt --head data/head.eefc --target data/target.eefc
//       --labels data/target_labels.eefc --class-text data/class_text.eefc --output-dir run
//   protoclue sweep --axis K --values 1,2,3,4,5 [manifest flags]
//   protoclue inspect-banks --banks run/banks.jsonl
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 input
// format error, 4 empty evaluation.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "protoclue/config.hpp"
#include "protoclue/engine.hpp"

namespace {

using namespace protoclue;

constexpr const char* kOutputDirEnv = "PROTOCLUE_OUTPUT_DIR";

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kFormat = 3, kEmptyEval = 4 };

/// Manifest flags shared by adapt and sweep. Values are kept as text and
/// applied after the config file so that flags take precedence.
struct ManifestFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool no_adapt = false, no_mlpgm = false, no_visual = false, no_textual = false,
       no_consistency = false, single_label = false, no_confidence = false;
  std::vector<std::string> extra;  // --set key=value

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value configuration file");
    auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
      app->add_option(flag, values[key], help);
    };
    opt("--k", "k", "pseudo labels per sample (K)");
    opt("--bank-capacity", "bank_capacity", "memory bank capacity (N)");
    opt("--mu1", "mu1", "visual clue logit scale");
    opt("--mu2", "mu2", "textual clue logit scale");
    opt("--alpha", "alpha", "weight of the clue logits in the fusion");
    opt("--batch-size", "batch_size", "test batch size");
    opt("--lr", "lr", "class feature learning rate");
    opt("--seed", "seed", "seed for synthetic data and initialization");
    opt("--top-k", "top_k", "recall cutoff");
    opt("--class-count", "class_count", "number of classes");
    opt("--internal-dim", "internal_dim", "head internal dimension (synthetic runs)");
    opt("--fraction", "fraction", "leading share of the target stream to use");
    opt("--head", "head", "head checkpoint");
    opt("--target", "target", "target stream container");
    opt("--labels", "labels", "labeled container used for evaluation");
    opt("--class-text", "class_text", "initial class feature table");
    opt("--output-dir", "output_dir", "directory for reports and snapshots");
    opt("--setting", "setting", "report label (default derived from the views)");
    app->add_flag("--no-adapt", no_adapt, "disable every adaptation component");
    app->add_flag("--no-mlpgm", no_mlpgm, "use the source logits instead of prototypes");
    app->add_flag("--no-visual", no_visual, "drop the visual clue logits");
    app->add_flag("--no-textual", no_textual, "drop the textual clue logits");
    app->add_flag("--no-consistency", no_consistency, "skip the consistency update");
    app->add_flag("--single-label", single_label, "assign only the top class (K = 1)");
    app->add_flag("--no-confidence", no_confidence, "weight bank entries uniformly");
    app->add_option("--set", extra, "additional key=value settings");
  }

  RunManifest build(const CLI::App* app) const {
    RunManifest m;
    if (!config_file.empty()) apply_config_file(m, config_file);
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0')
      m.output_dir = env;
    for (const std::string& kv : extra) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_setting(m, kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : values) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (app->count(flag) > 0) apply_setting(m, key, value);
    }
    if (no_adapt) m.toggles = Toggles::none();
    if (no_mlpgm) m.toggles.use_mlpgm = false;
    if (no_visual) m.toggles.use_visual_clue = false;
    if (no_textual) m.toggles.use_textual_clue = false;
    if (no_consistency || no_visual || no_textual) m.toggles.use_consistency = false;
    if (single_label) m.toggles.multi_label = false;
    if (no_confidence) m.toggles.use_confidence = false;
    return m;
  }
};

int gen_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir, bool jsonl) {
  const SyntheticData data = generate_synthetic(spec);
  FeatureFile labeled_target = data.target;
  for (std::size_t i = 0; i < labeled_target.records.size(); ++i) {
    for (ClassId c : data.target_labels[i])
      labeled_target.records[i].labels.push_back(static_cast<std::uint16_t>(c));
  }
  const std::string ext = jsonl ? ".jsonl" : ".eefc";
  write_records(dir / ("source" + ext), data.source);
  write_records(dir / ("target" + ext), data.target);
  write_records(dir / ("target_labels" + ext), labeled_target);
  FeatureFile text{static_cast<std::uint32_t>(spec.dim), 0, {}};
  text.records.push_back(parameter_record("class_features", data.class_text));
  write_records(dir / ("class_text" + ext), text);
  std::cout << "wrote " << data.source.records.size() << " source and "
            << data.target.records.size() << " target records to " << dir.string() << '\n';
  return kOk;
}

int train_source_cmd(const std::filesystem::path& source, const std::filesystem::path& out,
                     std::size_t internal_dim, std::size_t class_count, std::size_t epochs,
                     double lr, std::uint64_t seed, std::size_t top_k) {
  const FeatureFile file = read_records(source);
  if (class_count == 0) {
    for (const FeatureRecord& r : file.records)
      for (auto l : r.labels) class_count = std::max<std::size_t>(class_count, l + 1u);
  }
  if (class_count == 0) throw ConfigError("cannot infer class count from an unlabeled source");
  const AnticipationHead head = train_head(file, internal_dim, class_count, epochs, lr, seed);
  save_head(out, head);
  std::vector<FeatureRecord> records;
  for (const FeatureRecord& r : file.records)
    if (r.view != View::Parameter) records.push_back(r);
  const double recall = evaluate_head(head, records, record_labels(records), top_k);
  std::cout << std::fixed << std::setprecision(4) << "source top-" << top_k
            << " class-mean recall: " << recall << "\nwrote " << out.string() << '\n';
  return kOk;
}

int inspect_banks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  struct Stats {
    std::size_t count = 0;
    double entropy_sum = 0.0, entropy_min = 0.0, entropy_max = 0.0, confidence_sum = 0.0;
  };
  std::map<std::size_t, Stats> stats;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad bank entry: ") + e.what(), offset);
      }
      Stats& s = stats[j.at("class_id").get<std::size_t>()];
      const double h = j.at("entropy").get<double>();
      s.entropy_min = s.count == 0 ? h : std::min(s.entropy_min, h);
      s.entropy_max = s.count == 0 ? h : std::max(s.entropy_max, h);
      s.entropy_sum += h;
      s.confidence_sum += j.at("confidence").get<double>();
      ++s.count;
    }
    offset += line.size() + 1;
  }
  std::cout << "class_id,entries,entropy_min,entropy_mean,entropy_max,confidence_mean\n"
            << std::fixed << std::setprecision(6);
  for (const auto& [c, s] : stats) {
    std::cout << c << ',' << s.count << ',' << s.entropy_min << ',' << s.entropy_sum / s.count << ','
              << s.entropy_max << ',' << s.confidence_sum / s.count << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming test-time adaptation with prototype banks and dual-clue consistency"};
  app.require_subcommand(1);

  SyntheticSpec spec;
  std::string gen_dir = "synthetic";
  bool gen_jsonl = false;
  auto* gen = app.add_subcommand("gen-synthetic", "write a seeded source/target benchmark");
  gen->add_option("--out-dir", gen_dir, "output directory");
  gen->add_option("--seed", spec.seed);
  gen->add_option("--classes", spec.class_count);
  gen->add_option("--dim", spec.dim);
  gen->add_option("--labels-per-sample", spec.labels_per_sample);
  gen->add_option("--angle", spec.view_rotation_angle, "view rotation in radians");
  gen->add_option("--sigma", spec.view_noise_sigma, "target view noise");
  gen->add_option("--samples", spec.samples);
  gen->add_option("--frames", spec.frames_per_window);
  gen->add_flag("--jsonl", gen_jsonl, "write the JSON-lines mirror instead of binary");

  std::string train_in, train_out = "head.eefc";
  std::size_t train_dim = 512, train_classes = 0, train_epochs = 500, train_top_k = 5;
  double train_lr = 0.1;
  std::uint64_t train_seed = 7;
  auto* train = app.add_subcommand("train-source", "train the anticipation head on a labeled split");
  train->add_option("--source", train_in, "labeled source container")->required();
  train->add_option("--out", train_out, "head checkpoint to write");
  train->add_option("--internal-dim", train_dim);
  train->add_option("--classes", train_classes, "class count (default: inferred from labels)");
  train->add_option("--epochs", train_epochs);
  train->add_option("--lr", train_lr);
  train->add_option("--seed", train_seed);
  train->add_option("--top-k", train_top_k);

  ManifestFlags adapt_flags;
  auto* adapt_cmd = app.add_subcommand("adapt", "adapt online to a target stream and evaluate");
  adapt_flags.attach(adapt_cmd);

  ManifestFlags sweep_flags;
  std::string axis, values;
  auto* sweep = app.add_subcommand("sweep", "run adapt once per value of one hyperparameter");
  sweep_flags.attach(sweep);
  sweep->add_option("--axis", axis, "K, N, alpha, mu1, mu2 or fraction")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();

  std::string banks_path;
  auto* inspect = app.add_subcommand("inspect-banks", "summarize a bank snapshot");
  inspect->add_option("--banks", banks_path, "banks.jsonl from adapt")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) return gen_synthetic(spec, gen_dir, gen_jsonl);
    if (train->parsed())
      return train_source_cmd(train_in, train_out, train_dim, train_classes, train_epochs,
                              train_lr, train_seed, train_top_k);
    if (adapt_cmd->parsed()) {
      const RunManifest m = adapt_flags.build(adapt_cmd);
      const RunResult r = run_adapt(m);
      std::cout << r.text_report;
      return kOk;
    }
    if (sweep->parsed()) {
      const RunManifest m = sweep_flags.build(sweep);
      const SweepAxis a = parse_axis(axis);
      const auto rows = run_sweep(m, a, parse_value_list(values));
      std::cout << sweep_csv(a, rows);
      return kOk;
    }
    if (inspect->parsed()) return inspect_banks(banks_path);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "input format error: " << e.what() << '\n';
    return kFormat;
  } catch (const EmptyEvaluation& e) {
    std::cerr << "empty evaluation: " << e.what() << '\n';
    return kEmptyEval;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

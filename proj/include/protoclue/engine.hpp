#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protoclue/core.hpp"
#include "protoclue/dccm.hpp"
#include "protoclue/metrics.hpp"
#include "protoclue/mlpgm.hpp"
#include "protoclue/source_head.hpp"
#include "protoclue/stream.hpp"
#include "protoclue/synthetic.hpp"

namespace protoclue {

/// Component switches. A disabled clue contributes zero logits; with
/// use_mlpgm off the source head's logits take the prototype branch's place.
struct Toggles {
  bool use_mlpgm = true;
  bool use_visual_clue = true;
  bool use_textual_clue = true;
  bool use_consistency = true;
  bool multi_label = true;     // false forces K = 1
  bool use_confidence = true;  // false weights bank entries uniformly

  /// Throws ConfigError if use_consistency is set without both clues.
  void validate() const;

  static Toggles none();
};

struct RunManifest {
  EngineConfig config;
  Toggles toggles;
  std::uint64_t seed = 7;

  // File inputs. When target_path is empty the synthetic spec is used and the
  // source head is trained in-process.
  std::filesystem::path head_path;
  std::filesystem::path target_path;
  std::filesystem::path labels_path;      // labeled container matched by sample id
  std::filesystem::path class_text_path;  // parameter record "class_features"
  SyntheticSpec synthetic;
  std::size_t source_epochs = 500;
  double source_lr = 0.1;

  double fraction = 1.0;  // leading share of the target stream to process
  std::string setting;    // report label; derived from the views when empty
  std::string vocabulary = "class";
  std::filesystem::path output_dir;  // empty: nothing is written

  void validate() const;
};

/// Everything a run consumes, resolved from files or generated.
struct AdaptInputs {
  AnticipationHead head;
  std::vector<FeatureRecord> target;
  std::vector<LabelSet> labels;  // aligned with target
  ClassFeatureTable initial_table;
  std::string setting;
  /// Present for synthetic runs: the labeled source split.
  std::optional<FeatureFile> source;
};

struct RunResult {
  RecallRow recall;        // top-k from the manifest config
  RecallRow recall_top1;
  BankSet banks{1, 1};
  ClassFeatureTable table;
  std::vector<double> batch_losses;
  std::vector<Vec> predictions;  // fused logits per processed sample, stream order
  std::vector<LabelSet> truths;
  std::string text_report;
  std::string csv_report;
};

AdaptInputs prepare_inputs(const RunManifest& manifest);

/// Streams the target through the engine batch by batch: head forward,
/// pseudo labels, bank update, prototypes (computed after the batch's bank
/// update), one consistency step, clue logits with the updated table, fusion
/// and evaluation.
RunResult adapt(const AdaptInputs& inputs, const RunManifest& manifest);

/// prepare_inputs + adapt, then writes report.txt, report.csv, banks.jsonl and
/// class_table.eefc when output_dir is set.
RunResult run_adapt(const RunManifest& manifest);

enum class SweepAxis { K, N, Alpha, Mu1, Mu2, Fraction };
SweepAxis parse_axis(const std::string& name);
std::string axis_name(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  RunResult result;
};

/// One adapt per value over shared inputs.
std::vector<SweepRow> run_sweep(const RunManifest& manifest, SweepAxis axis,
                                const std::vector<double>& values);
std::vector<SweepRow> run_sweep(const AdaptInputs& inputs, const RunManifest& manifest,
                                SweepAxis axis, const std::vector<double>& values);
std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

/// Class-mean recall of the unadapted head on a labeled split.
double evaluate_head(const AnticipationHead& head, std::span<const FeatureRecord> records,
                     std::span<const LabelSet> labels, std::size_t top_k);
std::vector<LabelSet> record_labels(std::span<const FeatureRecord> records);

/// Trains a fresh head on a labeled split.
AnticipationHead train_head(const FeatureFile& source, std::size_t internal_dim,
                            std::size_t class_count, std::size_t epochs, double lr,
                            std::uint64_t seed);

// ---- checkpoints --------------------------------------------------------------

void save_head(const std::filesystem::path& path, const AnticipationHead& head);
AnticipationHead load_head(const std::filesystem::path& path);
void save_table(const std::filesystem::path& path, const ClassFeatureTable& table);
ClassFeatureTable load_table(const std::filesystem::path& path);

}  // namespace protoclue

#include "protoclue/engine.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "protoclue/kernels.hpp"

namespace protoclue {

namespace {

constexpr const char* kTableName = "class_features";

std::string setting_for(View target_view) {
  return target_view == View::Ego ? "Exo2Ego" : "Ego2Exo";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
}

std::string describe(const RunManifest& m, std::size_t processed) {
  const EngineConfig& c = m.config;
  const Toggles& t = m.toggles;
  std::ostringstream out;
  out << std::setprecision(12);
  out << "config: k=" << (t.multi_label ? c.k_labels : 1) << " bank_capacity=" << c.bank_capacity
      << " mu1=" << c.mu1 << " mu2=" << c.mu2 << " alpha=" << c.alpha
      << " batch_size=" << c.batch_size << " lr=" << c.learning_rate << " top_k=" << c.top_k
      << " fraction=" << m.fraction << " seed=" << m.seed << '\n';
  out << "toggles: mlpgm=" << t.use_mlpgm << " visual=" << t.use_visual_clue
      << " textual=" << t.use_textual_clue << " consistency=" << t.use_consistency
      << " multi_label=" << t.multi_label << " confidence=" << t.use_confidence << '\n';
  out << "samples: " << processed << '\n';
  return out.str();
}

}  // namespace

void Toggles::validate() const {
  if (use_consistency && !(use_visual_clue && use_textual_clue))
    throw ConfigError("use_consistency requires both the visual and the textual clue");
}

Toggles Toggles::none() { return Toggles{false, false, false, false, false, false}; }

void RunManifest::validate() const {
  config.validate();
  toggles.validate();
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");
  if (target_path.empty()) {
    synthetic.validate();
    if (synthetic.class_count != config.class_count)
      throw ConfigError("synthetic class_count differs from the engine class_count");
  } else if (head_path.empty()) {
    throw ConfigError("a target stream requires a head checkpoint");
  }
  if (source_epochs == 0) throw ConfigError("source_epochs must be positive");
}

// ---- checkpoints ----------------------------------------------------------------

void save_head(const std::filesystem::path& path, const AnticipationHead& head) {
  head.validate();
  FeatureFile file{static_cast<std::uint32_t>(head.input_dim()), 0, {}};
  Matrix proj_bias(1, head.internal_dim());
  std::copy(head.proj_bias.begin(), head.proj_bias.end(), proj_bias.row(0).begin());
  Matrix cls_bias(1, head.class_count());
  std::copy(head.cls_bias.begin(), head.cls_bias.end(), cls_bias.row(0).begin());
  file.records.push_back(parameter_record("proj_weights", head.proj_weights));
  file.records.push_back(parameter_record("proj_bias", proj_bias));
  file.records.push_back(parameter_record("cls_weights", head.cls_weights));
  file.records.push_back(parameter_record("cls_bias", cls_bias));
  write_records(path, file);
}

AnticipationHead load_head(const std::filesystem::path& path) {
  const FeatureFile file = read_records(path);
  AnticipationHead head;
  head.proj_weights = parameter_matrix(find_parameter(file, "proj_weights"));
  head.proj_bias = parameter_matrix(find_parameter(file, "proj_bias")).data();
  head.cls_weights = parameter_matrix(find_parameter(file, "cls_weights"));
  head.cls_bias = parameter_matrix(find_parameter(file, "cls_bias")).data();
  head.validate();
  return head;
}

void save_table(const std::filesystem::path& path, const ClassFeatureTable& table) {
  FeatureFile file{static_cast<std::uint32_t>(table.dim()), 0, {}};
  file.records.push_back(parameter_record(kTableName, table.features));
  write_records(path, file);
}

ClassFeatureTable load_table(const std::filesystem::path& path) {
  const FeatureFile file = read_records(path);
  ClassFeatureTable table{parameter_matrix(find_parameter(file, kTableName))};
  table.validate();
  return table;
}

// ---- inputs ---------------------------------------------------------------------

std::vector<LabelSet> record_labels(std::span<const FeatureRecord> records) {
  std::vector<LabelSet> out;
  out.reserve(records.size());
  for (const FeatureRecord& r : records) out.emplace_back(r.labels.begin(), r.labels.end());
  return out;
}

AnticipationHead train_head(const FeatureFile& source, std::size_t internal_dim,
                            std::size_t class_count, std::size_t epochs, double lr,
                            std::uint64_t seed) {
  std::vector<LabeledSample> data;
  data.reserve(source.records.size());
  for (const FeatureRecord& r : source.records) {
    if (r.view == View::Parameter) continue;
    if (!r.labeled()) throw InvalidInput("source record '" + r.sample_id + "' is unlabeled");
    data.push_back({pooled_features(r), LabelSet(r.labels.begin(), r.labels.end())});
  }
  AnticipationHead head = AnticipationHead::random(source.dim, internal_dim, class_count, seed);
  train_source(head, data, epochs, lr);
  return head;
}

double evaluate_head(const AnticipationHead& head, std::span<const FeatureRecord> records,
                     std::span<const LabelSet> labels, std::size_t top_k) {
  if (records.size() != labels.size()) throw InvalidInput("evaluate_head: labels misaligned");
  std::vector<Vec> pooled;
  pooled.reserve(records.size());
  for (const FeatureRecord& r : records) pooled.push_back(pooled_features(r));
  const auto outs = kernels::forward_batch_parallel(head, pooled);
  EvalAccumulator acc(head.class_count(), top_k);
  for (std::size_t i = 0; i < outs.size(); ++i) acc.record(outs[i].logits, labels[i]);
  return acc.class_mean_recall();
}

AdaptInputs prepare_inputs(const RunManifest& manifest) {
  manifest.validate();
  AdaptInputs in;
  if (manifest.target_path.empty()) {
    SyntheticData data = generate_synthetic(manifest.synthetic);
    in.head = train_head(data.source, manifest.config.internal_dim, manifest.config.class_count,
                         manifest.source_epochs, manifest.source_lr, manifest.seed);
    in.target = std::move(data.target.records);
    in.labels = std::move(data.target_labels);
    in.initial_table = ClassFeatureTable{data.class_text};
    in.source = std::move(data.source);
  } else {
    in.head = load_head(manifest.head_path);
    FeatureFile target = read_records(manifest.target_path);
    std::erase_if(target.records, [](const FeatureRecord& r) { return r.view == View::Parameter; });
    in.target = std::move(target.records);
    if (!manifest.labels_path.empty()) {
      const FeatureFile labeled = read_records(manifest.labels_path);
      std::map<std::string, LabelSet> by_id;
      for (const FeatureRecord& r : labeled.records)
        by_id[r.sample_id] = LabelSet(r.labels.begin(), r.labels.end());
      for (const FeatureRecord& r : in.target) {
        auto it = by_id.find(r.sample_id);
        if (it == by_id.end())
          throw InvalidInput("no labels for target sample '" + r.sample_id + "'");
        in.labels.push_back(it->second);
      }
    } else {
      in.labels = record_labels(in.target);
    }
    in.initial_table = manifest.class_text_path.empty()
                           ? ClassFeatureTable::random_unit(in.head.class_count(), target.dim,
                                                            manifest.seed)
                           : load_table(manifest.class_text_path);
  }
  in.setting = !manifest.setting.empty() ? manifest.setting
               : in.target.empty()       ? "target"
                                         : setting_for(in.target.front().view);
  return in;
}

// ---- adaptation -------------------------------------------------------------------

RunResult adapt(const AdaptInputs& inputs, const RunManifest& manifest) {
  manifest.validate();
  EngineConfig cfg = manifest.config;
  const Toggles& tg = manifest.toggles;
  if (!tg.multi_label) cfg.k_labels = 1;

  const AnticipationHead& head = inputs.head;
  const std::size_t nc = head.class_count();
  if (nc != cfg.class_count) throw ConfigError("head class count differs from class_count");
  if (inputs.initial_table.class_count() != nc)
    throw ConfigError("class feature table row count differs from class_count");
  if (inputs.labels.size() != inputs.target.size())
    throw ConfigError("target labels are not aligned with the target stream");
  for (const FeatureRecord& r : inputs.target) {
    if (r.frame_features.empty() || r.frame_features.front().size() != head.input_dim())
      throw ConfigError("target feature dimension differs from the head input");
    if (r.visual_clue.size() != inputs.initial_table.dim() ||
        r.textual_clue.size() != inputs.initial_table.dim())
      throw ConfigError("clue dimension differs from the class feature table");
  }

  const std::size_t total = inputs.target.size();
  const std::size_t processed =
      std::min(total, static_cast<std::size_t>(std::ceil(manifest.fraction * double(total))));

  RunResult result;
  result.banks = BankSet(nc, cfg.bank_capacity);
  result.table = inputs.initial_table;
  EvalAccumulator acc(nc, cfg.top_k);
  EvalAccumulator acc1(nc, 1);
  const Vec zeros(nc, 0.0);
  const bool any_clue = tg.use_visual_clue || tg.use_textual_clue;

  for (std::size_t begin = 0; begin < processed; begin += cfg.batch_size) {
    const std::size_t end = std::min(begin + cfg.batch_size, processed);
    const std::size_t n = end - begin;

    std::vector<Vec> pooled(n);
    std::vector<ClueFeatures> clues(n);
    for (std::size_t i = 0; i < n; ++i) {
      pooled[i] = pooled_features(inputs.target[begin + i]);
      clues[i] = clue_features(inputs.target[begin + i]);
    }
    const auto outs = kernels::forward_batch_parallel(head, pooled);

    std::vector<Vec> base(n);
    if (tg.use_mlpgm) {
      std::vector<DataTuple> tuples;
      tuples.reserve(n);
      for (const HeadOutput& o : outs)
        tuples.push_back(assign_pseudo_labels(o.representation, o.logits, cfg.k_labels));
      result.banks.update(tuples);
      const PrototypeClassifier protos =
          compute_prototypes(result.banks, head.internal_dim(), tg.use_confidence);
      for (std::size_t i = 0; i < n; ++i) base[i] = prototype_logits(protos, outs[i].representation);
    } else {
      for (std::size_t i = 0; i < n; ++i) base[i] = outs[i].logits;
    }

    if (tg.use_consistency) result.batch_losses.push_back(adapt_step(result.table, clues, cfg));

    std::vector<std::pair<Vec, Vec>> clue_out;
    if (any_clue) clue_out = kernels::clue_logits_batch_parallel(clues, result.table, cfg.mu1, cfg.mu2);

    for (std::size_t i = 0; i < n; ++i) {
      const Vec& lv = tg.use_visual_clue ? clue_out[i].first : zeros;
      const Vec& lt = tg.use_textual_clue ? clue_out[i].second : zeros;
      Vec fused = fuse_logits(base[i], lv, lt, cfg.alpha);
      const LabelSet& truth = inputs.labels[begin + i];
      if (!truth.empty()) {
        acc.record(fused, truth);
        acc1.record(fused, truth);
      }
      result.predictions.push_back(std::move(fused));
      result.truths.push_back(truth);
    }
  }

  const std::string setting = inputs.setting;
  result.recall = make_row(setting, manifest.vocabulary, acc);
  result.recall_top1 = make_row(setting, manifest.vocabulary, acc1);

  const RecallRow rows[] = {result.recall, result.recall_top1};
  std::ostringstream text;
  text << describe(manifest, processed);
  write_text_report(text, rows);
  result.text_report = text.str();
  std::ostringstream csv;
  write_csv_report(csv, rows);
  result.csv_report = csv.str();
  return result;
}

RunResult run_adapt(const RunManifest& manifest) {
  const AdaptInputs inputs = prepare_inputs(manifest);
  RunResult result = adapt(inputs, manifest);
  if (!manifest.output_dir.empty()) {
    std::filesystem::create_directories(manifest.output_dir);
    write_file(manifest.output_dir / "report.txt", result.text_report);
    write_file(manifest.output_dir / "report.csv", result.csv_report);
    std::ofstream banks(manifest.output_dir / "banks.jsonl", std::ios::trunc);
    write_bank_snapshot(banks, result.banks);
    save_table(manifest.output_dir / "class_table.eefc", result.table);
  }
  return result;
}

// ---- sweeps -------------------------------------------------------------------------

SweepAxis parse_axis(const std::string& name) {
  if (name == "K" || name == "k") return SweepAxis::K;
  if (name == "N" || name == "n") return SweepAxis::N;
  if (name == "alpha") return SweepAxis::Alpha;
  if (name == "mu1") return SweepAxis::Mu1;
  if (name == "mu2") return SweepAxis::Mu2;
  if (name == "fraction") return SweepAxis::Fraction;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::K: return "K";
    case SweepAxis::N: return "N";
    case SweepAxis::Alpha: return "alpha";
    case SweepAxis::Mu1: return "mu1";
    case SweepAxis::Mu2: return "mu2";
    case SweepAxis::Fraction: return "fraction";
  }
  return "?";
}

namespace {

std::size_t as_count(double v, const char* what) {
  if (!(v >= 1.0) || v != std::floor(v))
    throw ConfigError(std::string(what) + " sweep values must be positive integers");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<SweepRow> run_sweep(const AdaptInputs& inputs, const RunManifest& manifest,
                                SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double v : values) {
    RunManifest m = manifest;
    switch (axis) {
      case SweepAxis::K: m.config.k_labels = as_count(v, "K"); break;
      case SweepAxis::N: m.config.bank_capacity = as_count(v, "N"); break;
      case SweepAxis::Alpha: m.config.alpha = v; break;
      case SweepAxis::Mu1: m.config.mu1 = v; break;
      case SweepAxis::Mu2: m.config.mu2 = v; break;
      case SweepAxis::Fraction: m.fraction = v; break;
    }
    rows.push_back({v, adapt(inputs, m)});
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const RunManifest& manifest, SweepAxis axis,
                                const std::vector<double>& values) {
  const AdaptInputs inputs = prepare_inputs(manifest);
  auto rows = run_sweep(inputs, manifest, axis, values);
  if (!manifest.output_dir.empty()) {
    std::filesystem::create_directories(manifest.output_dir);
    write_file(manifest.output_dir / "sweep.csv", sweep_csv(axis, rows));
  }
  return rows;
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "axis,value,setting,noun_or_verb,top_k,recall,top1_recall\n";
  for (const SweepRow& r : rows) {
    out << axis_name(axis) << ',' << std::defaultfloat << std::setprecision(12) << r.value << ','
        << r.result.recall.setting << ',' << r.result.recall.target << ',' << r.result.recall.top_k
        << ',' << std::fixed << std::setprecision(6) << r.result.recall.recall << ','
        << r.result.recall_top1.recall << '\n';
    out << std::defaultfloat;
  }
  return out.str();
}

}  // namespace protoclue

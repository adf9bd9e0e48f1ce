#include "protoclue/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace protoclue {

EvalAccumulator::EvalAccumulator(std::size_t class_count, std::size_t top_k)
    : top_k_(top_k), hits_(class_count, 0), totals_(class_count, 0) {
  if (class_count == 0) throw InvalidInput("EvalAccumulator: class_count must be positive");
  if (top_k == 0) throw InvalidInput("EvalAccumulator: top_k must be positive");
}

void EvalAccumulator::record(std::span<const double> predicted, const LabelSet& truth) {
  if (truth.empty()) throw InvalidInput("EvalAccumulator::record: empty ground truth");
  if (predicted.size() != hits_.size())
    throw InvalidInput("EvalAccumulator::record: prediction length mismatch");
  const auto top = topk_indices(predicted, std::min(top_k_, predicted.size()));
  for (ClassId c : truth) {
    if (c >= hits_.size()) throw InvalidInput("EvalAccumulator::record: label out of range");
    ++totals_[c];
    if (std::find(top.begin(), top.end(), c) != top.end()) ++hits_[c];
  }
}

void EvalAccumulator::merge(const EvalAccumulator& other) {
  if (other.hits_.size() != hits_.size() || other.top_k_ != top_k_)
    throw InvalidInput("EvalAccumulator::merge: incompatible accumulators");
  for (std::size_t c = 0; c < hits_.size(); ++c) {
    hits_[c] += other.hits_[c];
    totals_[c] += other.totals_[c];
  }
}

double EvalAccumulator::class_mean_recall() const {
  double sum = 0.0;
  std::size_t observed = 0;
  for (std::size_t c = 0; c < hits_.size(); ++c) {
    if (totals_[c] == 0) continue;
    sum += double(hits_[c]) / double(totals_[c]);
    ++observed;
  }
  if (observed == 0) throw EmptyEvaluation("no ground-truth classes observed");
  return 100.0 * sum / double(observed);
}

RecallRow make_row(const std::string& setting, const std::string& target,
                   const EvalAccumulator& acc) {
  return RecallRow{setting, target, acc.top_k(), acc.class_mean_recall(), acc.hits(),
                   acc.totals()};
}

void write_text_report(std::ostream& out, std::span<const RecallRow> rows) {
  out << std::fixed << std::setprecision(4);
  for (const RecallRow& r : rows) {
    out << r.setting << " [" << r.target << "] top-" << r.top_k << " class-mean recall: " << r.recall
        << '\n';
    for (std::size_t c = 0; c < r.totals.size(); ++c) {
      if (r.totals[c] == 0) continue;
      out << "  class " << c << ": " << r.hits[c] << '/' << r.totals[c] << '\n';
    }
  }
}

void write_csv_report(std::ostream& out, std::span<const RecallRow> rows) {
  out << "setting,noun_or_verb,top_k,recall,class_id,hits,totals\n";
  out << std::fixed << std::setprecision(6);
  for (const RecallRow& r : rows) {
    std::uint64_t hits = 0, totals = 0;
    for (std::size_t c = 0; c < r.totals.size(); ++c) {
      hits += r.hits[c];
      totals += r.totals[c];
    }
    out << r.setting << ',' << r.target << ',' << r.top_k << ',' << r.recall << ",all," << hits
        << ',' << totals << '\n';
    for (std::size_t c = 0; c < r.totals.size(); ++c) {
      if (r.totals[c] == 0) continue;
      const double class_recall = 100.0 * double(r.hits[c]) / double(r.totals[c]);
      out << r.setting << ',' << r.target << ',' << r.top_k << ',' << class_recall << ',' << c
          << ',' << r.hits[c] << ',' << r.totals[c] << '\n';
    }
  }
}

}  // namespace protoclue

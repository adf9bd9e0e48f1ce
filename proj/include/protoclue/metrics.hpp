#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "protoclue/core.hpp"
#include "protoclue/source_head.hpp"

namespace protoclue {

/// Per-class hit/total counters for class-mean Top-K recall. A sample counts
/// once for every ground-truth class it carries.
class EvalAccumulator {
 public:
  EvalAccumulator(std::size_t class_count, std::size_t top_k);

  void record(std::span<const double> predicted, const LabelSet& truth);
  /// Fieldwise addition; both sides must agree on class count and top_k.
  void merge(const EvalAccumulator& other);

  /// 100 * mean over observed classes of hits / totals. Throws EmptyEvaluation.
  double class_mean_recall() const;

  std::size_t class_count() const noexcept { return hits_.size(); }
  std::size_t top_k() const noexcept { return top_k_; }
  const std::vector<std::uint64_t>& hits() const noexcept { return hits_; }
  const std::vector<std::uint64_t>& totals() const noexcept { return totals_; }

 private:
  std::size_t top_k_;
  std::vector<std::uint64_t> hits_;
  std::vector<std::uint64_t> totals_;
};

struct RecallRow {
  std::string setting;
  std::string target;  // noun / verb / class vocabulary name
  std::size_t top_k = 0;
  double recall = 0.0;
  std::vector<std::uint64_t> hits;
  std::vector<std::uint64_t> totals;
};

RecallRow make_row(const std::string& setting, const std::string& target,
                   const EvalAccumulator& acc);

/// Human-readable summary, fixed precision.
void write_text_report(std::ostream& out, std::span<const RecallRow> rows);

/// CSV header: setting,noun_or_verb,top_k,recall,class_id,hits,totals. One
/// summary line per row (class_id "all"), then one line per observed class.
void write_csv_report(std::ostream& out, std::span<const RecallRow> rows);

}  // namespace protoclue

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "protoclue/core.hpp"

namespace protoclue {

/// Per-sample output of pseudo-labeling: the representation, its Top-K
/// classes, the raw logits at those classes, and the prediction entropy.
struct DataTuple {
  Vec representation;
  std::vector<ClassId> pseudo_labels;
  Vec confidences;
  double entropy = 0.0;
};

DataTuple assign_pseudo_labels(std::span<const double> representation,
                               std::span<const double> logits, std::size_t k);

struct BankEntry {
  Vec representation;
  double confidence = 0.0;
  double entropy = 0.0;
  std::uint64_t arrival = 0;  // stream position of the contributing sample
};

/// Bounded per-class store keeping the lowest-entropy entries seen so far.
///
/// Entries stay sorted by (entropy, arrival). When full, an incoming entry
/// replaces the current worst only if its entropy is strictly lower, so on
/// ties the incumbent is kept.
class MemoryBank {
 public:
  MemoryBank(ClassId class_id, std::size_t capacity);

  /// Returns true if the entry was stored.
  bool offer(BankEntry entry);

  ClassId class_id() const noexcept { return class_id_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<BankEntry>& entries() const noexcept { return entries_; }

 private:
  ClassId class_id_;
  std::size_t capacity_;
  std::vector<BankEntry> entries_;
};

class BankSet {
 public:
  BankSet(std::size_t class_count, std::size_t capacity);

  /// Applies the tuples in order; each sample gets the next arrival index.
  void update(std::span<const DataTuple> batch);

  std::size_t class_count() const noexcept { return banks_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t samples_seen() const noexcept { return next_arrival_; }
  const MemoryBank& bank(ClassId c) const { return banks_.at(c); }
  const std::vector<MemoryBank>& banks() const noexcept { return banks_; }

 private:
  std::size_t capacity_;
  std::vector<MemoryBank> banks_;
  std::uint64_t next_arrival_ = 0;
};

/// Normalization of stored confidences into prototype weights. Plain L1 when
/// every confidence is strictly positive; otherwise shift so the minimum maps
/// to a small positive offset, then L1.
Vec confidence_weights(std::span<const double> confidences);

struct PrototypeClassifier {
  Matrix prototypes;            // C' x C1
  std::vector<bool> populated;  // per class
};

/// With use_confidence == false every stored representation gets equal weight.
PrototypeClassifier compute_prototypes(const BankSet& banks, std::size_t representation_dim,
                                       bool use_confidence = true);

/// Cosine similarity of the representation to every populated prototype;
/// unpopulated classes score 0.
Vec prototype_logits(const PrototypeClassifier& classifier,
                     std::span<const double> representation);

/// One JSON object per line: {class_id, entropy, confidence, arrival, representation}.
void write_bank_snapshot(std::ostream& out, const BankSet& banks);

}  // namespace protoclue

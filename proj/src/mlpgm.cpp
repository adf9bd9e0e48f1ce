#include "protoclue/mlpgm.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"

namespace protoclue {

DataTuple assign_pseudo_labels(std::span<const double> representation,
                               std::span<const double> logits, std::size_t k) {
  require_finite(representation, "assign_pseudo_labels");
  DataTuple t;
  t.representation.assign(representation.begin(), representation.end());
  t.pseudo_labels = topk_indices(logits, k);
  t.confidences.reserve(k);
  for (ClassId c : t.pseudo_labels) t.confidences.push_back(logits[c]);
  t.entropy = entropy(logits);
  return t;
}

MemoryBank::MemoryBank(ClassId class_id, std::size_t capacity)
    : class_id_(class_id), capacity_(capacity) {
  if (capacity == 0) throw InvalidInput("MemoryBank: capacity must be at least 1");
  entries_.reserve(std::min<std::size_t>(capacity, 1024));
}

bool MemoryBank::offer(BankEntry entry) {
  auto ranks_before = [](const BankEntry& a, const BankEntry& b) {
    return a.entropy < b.entropy || (a.entropy == b.entropy && a.arrival < b.arrival);
  };
  if (entries_.size() == capacity_) {
    if (!(entry.entropy < entries_.back().entropy)) return false;
    entries_.pop_back();
  }
  auto pos = std::upper_bound(entries_.begin(), entries_.end(), entry, ranks_before);
  entries_.insert(pos, std::move(entry));
  return true;
}

BankSet::BankSet(std::size_t class_count, std::size_t capacity) : capacity_(capacity) {
  banks_.reserve(class_count);
  for (ClassId c = 0; c < class_count; ++c) banks_.emplace_back(c, capacity);
}

void BankSet::update(std::span<const DataTuple> batch) {
  for (const DataTuple& t : batch) {
    if (t.pseudo_labels.size() != t.confidences.size())
      throw InvalidInput("BankSet::update: labels and confidences misaligned");
    const std::uint64_t arrival = next_arrival_++;
    for (std::size_t j = 0; j < t.pseudo_labels.size(); ++j) {
      const ClassId c = t.pseudo_labels[j];
      if (c >= banks_.size()) throw InvalidInput("BankSet::update: class out of range");
      banks_[c].offer(BankEntry{t.representation, t.confidences[j], t.entropy, arrival});
    }
  }
}

Vec confidence_weights(std::span<const double> confidences) {
  if (confidences.empty()) return {};
  constexpr double kShift = 1e-8;
  const bool all_positive =
      std::all_of(confidences.begin(), confidences.end(), [](double v) { return v > 0.0; });
  Vec w(confidences.begin(), confidences.end());
  if (!all_positive) {
    const double lo = *std::min_element(w.begin(), w.end());
    for (double& v : w) v = v - lo + kShift;
  }
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(w.begin(), w.end(), 1.0 / double(w.size()));
    return w;
  }
  for (double& v : w) v /= total;
  return w;
}

PrototypeClassifier compute_prototypes(const BankSet& banks, std::size_t representation_dim,
                                       bool use_confidence) {
  PrototypeClassifier out{Matrix(banks.class_count(), representation_dim),
                          std::vector<bool>(banks.class_count(), false)};
  for (const MemoryBank& bank : banks.banks()) {
    if (bank.empty()) continue;
    const auto& entries = bank.entries();
    Vec weights;
    if (use_confidence) {
      Vec conf;
      conf.reserve(entries.size());
      for (const auto& e : entries) conf.push_back(e.confidence);
      weights = confidence_weights(conf);
    } else {
      weights.assign(entries.size(), 1.0 / double(entries.size()));
    }
    auto row = out.prototypes.row(bank.class_id());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const Vec& rep = entries[k].representation;
      if (rep.size() != representation_dim)
        throw InvalidInput("compute_prototypes: representation dimension mismatch");
      for (std::size_t d = 0; d < representation_dim; ++d) row[d] += weights[k] * rep[d];
    }
    out.populated[bank.class_id()] = true;
  }
  return out;
}

Vec prototype_logits(const PrototypeClassifier& classifier,
                     std::span<const double> representation) {
  if (representation.size() != classifier.prototypes.cols())
    throw InvalidInput("prototype_logits: representation dimension mismatch");
  Vec out(classifier.prototypes.rows(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (classifier.populated[c]) out[c] = cosine_or_zero(classifier.prototypes.row(c), representation);
  }
  return out;
}

void write_bank_snapshot(std::ostream& out, const BankSet& banks) {
  for (const MemoryBank& bank : banks.banks()) {
    for (const BankEntry& e : bank.entries()) {
      nlohmann::json j;
      j["class_id"] = bank.class_id();
      j["entropy"] = e.entropy;
      j["confidence"] = e.confidence;
      j["arrival"] = e.arrival;
      j["representation"] = e.representation;
      out << j.dump() << '\n';
    }
  }
}

}  // namespace protoclue

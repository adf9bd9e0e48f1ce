#include "protoclue/kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace protoclue::kernels {

namespace {

std::size_t chunk_count(std::size_t n) { return (n + kReductionChunk - 1) / kReductionChunk; }

void add_into(Matrix& dst, const Matrix& src, double scale) {
  auto& d = dst.data();
  const auto& s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

// Exceptions cannot leave an OpenMP region, so inputs are checked up front.
void check_samples(const AnticipationHead& head, std::span<const LabeledSample> data) {
  if (data.empty()) throw InvalidInput("empty dataset");
  for (const LabeledSample& s : data) {
    if (s.pooled.size() != head.input_dim()) throw InvalidInput("sample dimension mismatch");
    require_finite(s.pooled, "sample features");
    for (ClassId c : s.labels) {
      if (c >= head.class_count()) throw InvalidInput("label index out of range");
    }
  }
}

void check_pooled(const AnticipationHead& head, std::span<const Vec> pooled) {
  for (const Vec& x : pooled) {
    if (x.size() != head.input_dim()) throw InvalidInput("forward: input dimension mismatch");
  }
}

void check_clues(std::span<const ClueFeatures> batch, const ClassFeatureTable& table) {
  require_finite(table.features.data(), "class feature table");
  for (const ClueFeatures& c : batch) {
    if (c.visual.size() != table.dim() || c.textual.size() != table.dim())
      throw InvalidInput("clue dimension mismatch");
    require_finite(c.visual, "visual clue");
    require_finite(c.textual, "textual clue");
  }
}

}  // namespace

std::vector<HeadOutput> forward_batch_serial(const AnticipationHead& head,
                                             std::span<const Vec> pooled) {
  std::vector<HeadOutput> out;
  out.reserve(pooled.size());
  for (const Vec& x : pooled) out.push_back(forward_pooled(head, x));
  return out;
}

std::vector<HeadOutput> forward_batch_parallel(const AnticipationHead& head,
                                               std::span<const Vec> pooled) {
  check_pooled(head, pooled);
  std::vector<HeadOutput> out(pooled.size());
  const auto n = static_cast<std::ptrdiff_t>(pooled.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = forward_pooled(head, pooled[i]);
  return out;
}

HeadGradient dataset_bce_gradient_serial(const AnticipationHead& head,
                                         std::span<const LabeledSample> data,
                                         double* mean_loss) {
  check_samples(head, data);
  HeadGradient total = HeadGradient::zeros_like(head);
  const double scale = 1.0 / double(data.size());
  double loss = 0.0;
  for (const LabeledSample& s : data)
    loss += accumulate_bce_gradient(head, s.pooled, s.labels, scale, total);
  if (mean_loss) *mean_loss = loss * scale;
  return total;
}

HeadGradient dataset_bce_gradient_parallel(const AnticipationHead& head,
                                           std::span<const LabeledSample> data,
                                           double* mean_loss) {
  check_samples(head, data);
  const std::size_t chunks = chunk_count(data.size());
  std::vector<HeadGradient> partial(chunks, HeadGradient::zeros_like(head));
  std::vector<double> partial_loss(chunks, 0.0);
  const double scale = 1.0 / double(data.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = std::size_t(c) * kReductionChunk;
    const std::size_t end = std::min(begin + kReductionChunk, data.size());
    for (std::size_t i = begin; i < end; ++i)
      partial_loss[c] +=
          accumulate_bce_gradient(head, data[i].pooled, data[i].labels, scale, partial[c]);
  }

  HeadGradient total = HeadGradient::zeros_like(head);
  double loss = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total.add_scaled(partial[c], 1.0);
    loss += partial_loss[c];
  }
  if (mean_loss) *mean_loss = loss * scale;
  return total;
}

ConsistencyBatch consistency_batch_serial(std::span<const ClueFeatures> batch,
                                          const ClassFeatureTable& table,
                                          const EngineConfig& config) {
  check_clues(batch, table);
  ConsistencyBatch out{Matrix(table.class_count(), table.dim()), 0.0};
  if (batch.empty()) return out;
  const double scale = 1.0 / double(batch.size());
  for (const ClueFeatures& clues : batch) {
    double loss = 0.0;
    add_into(out.mean_gradient, consistency_gradient(clues, table, config, &loss), scale);
    out.mean_loss += loss * scale;
  }
  return out;
}

ConsistencyBatch consistency_batch_parallel(std::span<const ClueFeatures> batch,
                                            const ClassFeatureTable& table,
                                            const EngineConfig& config) {
  check_clues(batch, table);
  ConsistencyBatch out{Matrix(table.class_count(), table.dim()), 0.0};
  if (batch.empty()) return out;
  const std::size_t chunks = chunk_count(batch.size());
  std::vector<Matrix> partial(chunks, Matrix(table.class_count(), table.dim()));
  std::vector<double> partial_loss(chunks, 0.0);
  const double scale = 1.0 / double(batch.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = std::size_t(c) * kReductionChunk;
    const std::size_t end = std::min(begin + kReductionChunk, batch.size());
    for (std::size_t i = begin; i < end; ++i) {
      double loss = 0.0;
      add_into(partial[c], consistency_gradient(batch[i], table, config, &loss), scale);
      partial_loss[c] += loss * scale;
    }
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    add_into(out.mean_gradient, partial[c], 1.0);
    out.mean_loss += partial_loss[c];
  }
  return out;
}

std::vector<std::pair<Vec, Vec>> clue_logits_batch_parallel(std::span<const ClueFeatures> batch,
                                                            const ClassFeatureTable& table,
                                                            double mu1, double mu2) {
  check_clues(batch, table);
  std::vector<std::pair<Vec, Vec>> out(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i].first = clue_logits(batch[i].visual, table, mu1);
    out[i].second = clue_logits(batch[i].textual, table, mu2);
  }
  return out;
}

}  // namespace protoclue::kernels

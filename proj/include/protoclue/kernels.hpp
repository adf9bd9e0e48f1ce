#pragma once

// Batch kernels. Each has a serial reference and an OpenMP version. The
// OpenMP versions reduce over fixed-size chunks in chunk order, so their
// output does not depend on the thread count.

#include <span>
#include <vector>

#include "protoclue/core.hpp"
#include "protoclue/dccm.hpp"
#include "protoclue/source_head.hpp"

namespace protoclue::kernels {

inline constexpr std::size_t kReductionChunk = 32;

std::vector<HeadOutput> forward_batch_serial(const AnticipationHead& head,
                                             std::span<const Vec> pooled);
std::vector<HeadOutput> forward_batch_parallel(const AnticipationHead& head,
                                               std::span<const Vec> pooled);

/// Mean BCE gradient over the dataset; writes the mean loss if requested.
HeadGradient dataset_bce_gradient_serial(const AnticipationHead& head,
                                         std::span<const LabeledSample> data,
                                         double* mean_loss = nullptr);
HeadGradient dataset_bce_gradient_parallel(const AnticipationHead& head,
                                           std::span<const LabeledSample> data,
                                           double* mean_loss = nullptr);

struct ConsistencyBatch {
  Matrix mean_gradient;
  double mean_loss = 0.0;
};

ConsistencyBatch consistency_batch_serial(std::span<const ClueFeatures> batch,
                                          const ClassFeatureTable& table,
                                          const EngineConfig& config);
ConsistencyBatch consistency_batch_parallel(std::span<const ClueFeatures> batch,
                                            const ClassFeatureTable& table,
                                            const EngineConfig& config);

/// Clue logits for a batch: (visual, textual) per sample.
std::vector<std::pair<Vec, Vec>> clue_logits_batch_parallel(std::span<const ClueFeatures> batch,
                                                            const ClassFeatureTable& table,
                                                            double mu1, double mu2);

}  // namespace protoclue::kernels

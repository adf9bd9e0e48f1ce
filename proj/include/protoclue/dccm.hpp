#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoclue/core.hpp"

namespace protoclue {

/// Encoder features of the two clues attached to one observation. A zero
/// vector marks a missing clue.
struct ClueFeatures {
  Vec visual;
  Vec textual;
};

/// Learnable per-class feature rows the clues are scored against.
struct ClassFeatureTable {
  Matrix features;  // C' x C

  std::size_t class_count() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Unit-norm Gaussian rows.
  static ClassFeatureTable random_unit(std::size_t class_count, std::size_t dim,
                                       std::uint64_t seed);
  /// Throws InvalidInput for non-finite or zero rows.
  void validate() const;
};

/// logits[i] = mu * cos(clue, features[i]).
Vec clue_logits(std::span<const double> clue, const ClassFeatureTable& table, double mu);

/// Symmetric KL between the softmax distributions of the two logit vectors.
double consistency_loss(std::span<const double> visual_logits,
                        std::span<const double> textual_logits, double epsilon = 1e-8);

/// Gradient of the consistency loss with respect to the two logit vectors,
/// including the effect of the probability floor.
struct LogitGradient {
  Vec visual;
  Vec textual;
};
LogitGradient consistency_logit_gradient(std::span<const double> visual_logits,
                                         std::span<const double> textual_logits,
                                         double epsilon = 1e-8);

/// d cos(u, w) / d w. Zero when either vector has zero norm.
Vec cosine_gradient_wrt_second(std::span<const double> u, std::span<const double> w);

/// Exact gradient of consistency_loss(clue_logits(visual, table, mu1),
/// clue_logits(textual, table, mu2)) with respect to every table entry.
/// Optionally returns the loss value.
Matrix consistency_gradient(const ClueFeatures& clues, const ClassFeatureTable& table,
                            const EngineConfig& config, double* loss = nullptr);

/// One SGD step on the batch-mean consistency loss. Returns the loss before
/// the step. A zero learning rate leaves the table untouched.
double adapt_step(ClassFeatureTable& table, std::span<const ClueFeatures> batch,
                  const EngineConfig& config);

/// L_final = L_p + alpha * (L_v + L_t).
Vec fuse_logits(std::span<const double> prototype, std::span<const double> visual,
                std::span<const double> textual, double alpha);

}  // namespace protoclue

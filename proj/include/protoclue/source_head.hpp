#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoclue/core.hpp"

namespace protoclue {

/// Class indices of the actions that follow an observation window.
using LabelSet = std::vector<ClassId>;

/// Two-layer linear anticipation head over mean-pooled frame features.
///
/// representation = proj_weights^T * mean(frames) + proj_bias      (dim C1)
/// logits         = cls_weights^T * representation + cls_bias       (dim C')
struct AnticipationHead {
  Matrix proj_weights;  // C x C1
  Vec proj_bias;        // C1
  Matrix cls_weights;   // C1 x C'
  Vec cls_bias;         // C'

  std::size_t input_dim() const noexcept { return proj_weights.rows(); }
  std::size_t internal_dim() const noexcept { return proj_weights.cols(); }
  std::size_t class_count() const noexcept { return cls_weights.cols(); }

  /// Gaussian init scaled by fan-in, zero biases.
  static AnticipationHead random(std::size_t input_dim, std::size_t internal_dim,
                                 std::size_t class_count, std::uint64_t seed);
  static AnticipationHead zeros(std::size_t input_dim, std::size_t internal_dim,
                                std::size_t class_count);

  void validate() const;
  bool operator==(const AnticipationHead&) const = default;
};

struct HeadOutput {
  Vec representation;
  Vec logits;
};

/// Same shapes as AnticipationHead.
struct HeadGradient {
  Matrix proj_weights;
  Vec proj_bias;
  Matrix cls_weights;
  Vec cls_bias;

  static HeadGradient zeros_like(const AnticipationHead& head);
  void add_scaled(const HeadGradient& other, double scale);
};

/// Element-wise mean of the frames; all frames must share one dimension.
Vec mean_pool(std::span<const Vec> frames);

HeadOutput forward(const AnticipationHead& head, std::span<const Vec> frame_features);
HeadOutput forward_pooled(const AnticipationHead& head, std::span<const double> pooled);

/// Mean over classes of the sigmoid cross entropy against a multi-hot target.
double bce_loss(std::span<const double> logits, const LabelSet& labels);

/// Closed-form gradient of bce_loss(forward_pooled(head, pooled), labels) with
/// respect to every head parameter.
HeadGradient bce_gradient(const AnticipationHead& head, std::span<const double> pooled,
                          const LabelSet& labels);

/// Adds scale * gradient of one sample into acc and returns that sample's
/// loss. Shares a single forward pass between the two.
double accumulate_bce_gradient(const AnticipationHead& head, std::span<const double> pooled,
                               const LabelSet& labels, double scale, HeadGradient& acc);

/// Applies head -= lr * gradient.
void apply_gradient(AnticipationHead& head, const HeadGradient& grad, double lr);

struct LabeledSample {
  Vec pooled;
  LabelSet labels;
};

/// Full-batch gradient descent on mean BCE. Returns the per-epoch mean loss
/// measured before each update.
std::vector<double> train_source(AnticipationHead& head, std::span<const LabeledSample> data,
                                 std::size_t epochs, double lr);

}  // namespace protoclue

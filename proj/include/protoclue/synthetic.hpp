#pragma once

#include <cstdint>

#include "protoclue/core.hpp"
#include "protoclue/source_head.hpp"
#include "protoclue/stream.hpp"

namespace protoclue {

/// Seeded source/target benchmark with a controlled view gap.
///
/// Each class owns a random unit direction. A sample picks labels_per_sample
/// classes and mixes their directions with random positive weights; every
/// frame is that mixture plus per-sample clutter and per-frame jitter. Target
/// records replay the same events (paired views) through a fixed rotation
/// whose planes pair up the class directions first, every plane turned by
/// view_rotation_angle, plus Gaussian noise of view_noise_sigma. The visual
/// clue is the last frame, the textual clue the noiseless mixture, and the class text table holds the class directions.
struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t class_count = 10;
  std::size_t dim = 32;
  std::size_t labels_per_sample = 2;
  double view_rotation_angle = 0.6;
  double view_noise_sigma = 0.1;
  std::size_t samples = 2000;
  std::size_t frames_per_window = 5;
  double clutter_sigma = 0.2;
  double frame_jitter_sigma = 0.1;

  void validate() const;
};

struct SyntheticData {
  FeatureFile source;       // labeled, View::Exo
  FeatureFile target;       // labels stripped, View::Ego
  std::vector<LabelSet> target_labels;
  Matrix class_text;        // C' x dim
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Orthogonal dim x dim matrix turning each of dim/2 orthogonal planes by
/// angle. The planes are built from the rows of `leading` first (taken in
/// consecutive pairs after orthogonalization), then from random directions.
Matrix view_rotation(std::size_t dim, double angle, std::uint64_t seed,
                     const Matrix* leading = nullptr);

}  // namespace protoclue

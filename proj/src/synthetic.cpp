#include "protoclue/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace protoclue {

namespace {

// Independent streams per concern so that, e.g., changing the sample count
// does not move the class directions.
std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t(out[0]) << 32) | out[1];
}

// Draws standard normals and scales them, so the number of draws does not
// depend on sigma (sigma == 0 is allowed).
Vec gaussian_vector(std::mt19937_64& rng, std::size_t dim, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec v(dim);
  for (double& x : v) x = sigma * n(rng);
  return v;
}

void normalize(Vec& v) {
  const double n = l2_norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

Vec multiply(const Matrix& m, std::span<const double> x) {
  Vec y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
  return y;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (class_count == 0 || dim == 0 || frames_per_window == 0)
    throw ConfigError("synthetic spec: class_count, dim and frames_per_window must be positive");
  if (labels_per_sample == 0 || labels_per_sample > class_count)
    throw ConfigError("synthetic spec: labels_per_sample must be in [1, class_count]");
  if (class_count > 65535) throw ConfigError("synthetic spec: too many classes");
  if (!(view_noise_sigma >= 0.0) || !(clutter_sigma >= 0.0) || !(frame_jitter_sigma >= 0.0))
    throw ConfigError("synthetic spec: noise levels must be non-negative");
  if (!std::isfinite(view_rotation_angle)) throw ConfigError("synthetic spec: bad angle");
}

Matrix view_rotation(std::size_t dim, double angle, std::uint64_t seed, const Matrix* leading) {
  // Orthonormal basis B (Gram-Schmidt over the leading rows, then random
  // fill), then R = B G B^T with G a block-diagonal rotation by `angle` in
  // each consecutive coordinate pair.
  std::mt19937_64 rng(seed);
  std::vector<Vec> basis;
  std::size_t next_leading = 0;
  while (basis.size() < dim) {
    Vec v;
    if (leading != nullptr && next_leading < leading->rows()) {
      const auto row = leading->row(next_leading++);
      v.assign(row.begin(), row.end());
    } else {
      v = gaussian_vector(rng, dim, 1.0);
    }
    for (const Vec& b : basis) {
      const double p = dot(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= p * b[i];
    }
    if (l2_norm(v) < 1e-6) continue;
    normalize(v);
    basis.push_back(std::move(v));
  }
  Matrix g(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) g(i, i) = 1.0;
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i + 1 < dim; i += 2) {
    g(i, i) = c;
    g(i, i + 1) = -s;
    g(i + 1, i) = s;
    g(i + 1, i + 1) = c;
  }
  // R[r][k] = sum_{i,j} B[i][r] G[i][j] B[j][k], where basis[i] is row i of B.
  Matrix r(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double gij = g(i, j);
      if (gij == 0.0) continue;
      for (std::size_t a = 0; a < dim; ++a) {
        const double ba = basis[i][a] * gij;
        for (std::size_t b = 0; b < dim; ++b) r(a, b) += ba * basis[j][b];
      }
    }
  }
  return r;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t dim = spec.dim;
  const std::size_t nc = spec.class_count;

  SyntheticData out;
  out.class_text = Matrix(nc, dim);
  {
    std::mt19937_64 rng(substream(spec.seed, 1));
    for (std::size_t c = 0; c < nc; ++c) {
      Vec d = gaussian_vector(rng, dim, 1.0);
      normalize(d);
      std::copy(d.begin(), d.end(), out.class_text.row(c).begin());
    }
  }
  const Matrix rotation =
      view_rotation(dim, spec.view_rotation_angle, substream(spec.seed, 2), &out.class_text);

  // Both splits replay the same event stream (paired views); only the target
  // passes through the view transform.
  auto make_split = [&](View view, bool shifted, std::vector<LabelSet>* labels) {
    FeatureFile file{static_cast<std::uint32_t>(dim),
                     static_cast<std::uint32_t>(spec.frames_per_window), {}};
    file.records.reserve(spec.samples);
    std::mt19937_64 rng(substream(spec.seed, 10));
    std::mt19937_64 view_rng(substream(spec.seed, 20));
    std::uniform_real_distribution<double> weight(0.5, 1.5);
    std::vector<ClassId> classes(nc);

    for (std::size_t s = 0; s < spec.samples; ++s) {
      std::iota(classes.begin(), classes.end(), ClassId{0});
      for (std::size_t k = 0; k < spec.labels_per_sample; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, nc - 1);
        std::swap(classes[k], classes[pick(rng)]);
      }
      LabelSet sample_labels(classes.begin(),
                             classes.begin() + static_cast<std::ptrdiff_t>(spec.labels_per_sample));
      std::sort(sample_labels.begin(), sample_labels.end());

      Vec mixture(dim, 0.0);
      double total = 0.0;
      for (ClassId c : sample_labels) {
        const double w = weight(rng);
        total += w;
        const auto d = out.class_text.row(c);
        for (std::size_t i = 0; i < dim; ++i) mixture[i] += w * d[i];
      }
      for (double& v : mixture) v /= total;
      const Vec clutter = gaussian_vector(rng, dim, spec.clutter_sigma);

      FeatureRecord r;
      r.sample_id = std::string(view == View::Exo ? "exo-" : "ego-") + std::to_string(s);
      r.view = view;
      for (std::size_t f = 0; f < spec.frames_per_window; ++f) {
        const Vec jitter = gaussian_vector(rng, dim, spec.frame_jitter_sigma);
        Vec frame(dim);
        for (std::size_t i = 0; i < dim; ++i) frame[i] = mixture[i] + clutter[i] + jitter[i];
        if (shifted) {
          if (spec.view_rotation_angle != 0.0) frame = multiply(rotation, frame);
          const Vec noise = gaussian_vector(view_rng, dim, spec.view_noise_sigma);
          for (std::size_t i = 0; i < dim; ++i) frame[i] += noise[i];
        }
        r.frame_features.push_back(to_floats(frame));
      }
      r.visual_clue = r.frame_features.back();
      r.textual_clue = to_floats(mixture);
      if (labels != nullptr) {
        labels->push_back(sample_labels);
      } else {
        for (ClassId c : sample_labels) r.labels.push_back(static_cast<std::uint16_t>(c));
      }
      file.records.push_back(std::move(r));
    }
    return file;
  };

  out.source = make_split(View::Exo, false, nullptr);
  out.target = make_split(View::Ego, true, &out.target_labels);
  return out;
}

}  // namespace protoclue

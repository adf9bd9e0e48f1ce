#include "protoclue/source_head.hpp"

#include <cmath>
#include <random>

#include "protoclue/kernels.hpp"

namespace protoclue {

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec multi_hot(const LabelSet& labels, std::size_t class_count) {
  Vec y(class_count, 0.0);
  for (ClassId c : labels) {
    if (c >= class_count) throw InvalidInput("label index out of range");
    y[c] = 1.0;
  }
  return y;
}

}  // namespace

AnticipationHead AnticipationHead::zeros(std::size_t input_dim, std::size_t internal_dim,
                                         std::size_t class_count) {
  return AnticipationHead{Matrix(input_dim, internal_dim), Vec(internal_dim, 0.0),
                          Matrix(internal_dim, class_count), Vec(class_count, 0.0)};
}

AnticipationHead AnticipationHead::random(std::size_t input_dim, std::size_t internal_dim,
                                          std::size_t class_count, std::uint64_t seed) {
  AnticipationHead head = zeros(input_dim, internal_dim, class_count);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> proj(0.0, 1.0 / std::sqrt(double(input_dim)));
  std::normal_distribution<double> cls(0.0, 1.0 / std::sqrt(double(internal_dim)));
  for (double& w : head.proj_weights.data()) w = proj(rng);
  for (double& w : head.cls_weights.data()) w = cls(rng);
  return head;
}

void AnticipationHead::validate() const {
  if (input_dim() == 0 || internal_dim() == 0 || class_count() == 0)
    throw InvalidInput("head: empty parameter matrix");
  if (proj_bias.size() != internal_dim() || cls_weights.rows() != internal_dim() ||
      cls_bias.size() != class_count())
    throw InvalidInput("head: inconsistent parameter shapes");
  require_finite(proj_weights.data(), "head.proj_weights");
  require_finite(proj_bias, "head.proj_bias");
  require_finite(cls_weights.data(), "head.cls_weights");
  require_finite(cls_bias, "head.cls_bias");
}

HeadGradient HeadGradient::zeros_like(const AnticipationHead& head) {
  return HeadGradient{Matrix(head.proj_weights.rows(), head.proj_weights.cols()),
                      Vec(head.proj_bias.size(), 0.0),
                      Matrix(head.cls_weights.rows(), head.cls_weights.cols()),
                      Vec(head.cls_bias.size(), 0.0)};
}

void HeadGradient::add_scaled(const HeadGradient& other, double scale) {
  auto axpy = [scale](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  };
  axpy(proj_weights.data(), other.proj_weights.data());
  axpy(proj_bias, other.proj_bias);
  axpy(cls_weights.data(), other.cls_weights.data());
  axpy(cls_bias, other.cls_bias);
}

Vec mean_pool(std::span<const Vec> frames) {
  if (frames.empty()) throw InvalidInput("mean_pool: empty frame list");
  const std::size_t dim = frames.front().size();
  Vec mean(dim, 0.0);
  for (const Vec& f : frames) {
    if (f.size() != dim) throw InvalidInput("mean_pool: frame dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += f[i];
  }
  for (double& v : mean) v /= double(frames.size());
  return mean;
}

HeadOutput forward(const AnticipationHead& head, std::span<const Vec> frame_features) {
  const Vec pooled = mean_pool(frame_features);
  return forward_pooled(head, pooled);
}

HeadOutput forward_pooled(const AnticipationHead& head, std::span<const double> pooled) {
  if (pooled.size() != head.input_dim()) throw InvalidInput("forward: input dimension mismatch");
  const std::size_t c1 = head.internal_dim();
  const std::size_t nc = head.class_count();
  HeadOutput out{head.proj_bias, head.cls_bias};
  for (std::size_t r = 0; r < pooled.size(); ++r) {
    const double x = pooled[r];
    if (x == 0.0) continue;
    const auto w = head.proj_weights.row(r);
    for (std::size_t j = 0; j < c1; ++j) out.representation[j] += x * w[j];
  }
  for (std::size_t r = 0; r < c1; ++r) {
    const double h = out.representation[r];
    if (h == 0.0) continue;
    const auto w = head.cls_weights.row(r);
    for (std::size_t j = 0; j < nc; ++j) out.logits[j] += h * w[j];
  }
  return out;
}

double bce_loss(std::span<const double> logits, const LabelSet& labels) {
  if (logits.empty()) throw InvalidInput("bce_loss: empty logits");
  require_finite(logits, "bce_loss");
  const Vec y = multi_hot(labels, logits.size());
  // -[y log s(l) + (1-y) log(1-s(l))] == softplus(l) - y*l
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += softplus(logits[i]) - y[i] * logits[i];
  return std::max(s / double(logits.size()), 0.0);
}

HeadGradient bce_gradient(const AnticipationHead& head, std::span<const double> pooled,
                          const LabelSet& labels) {
  HeadGradient g = HeadGradient::zeros_like(head);
  accumulate_bce_gradient(head, pooled, labels, 1.0, g);
  return g;
}

double accumulate_bce_gradient(const AnticipationHead& head, std::span<const double> pooled,
                               const LabelSet& labels, double scale, HeadGradient& acc) {
  const HeadOutput out = forward_pooled(head, pooled);
  const std::size_t nc = head.class_count();
  const std::size_t c1 = head.internal_dim();
  const Vec y = multi_hot(labels, nc);

  // dL/dlogit_c = (sigmoid(l_c) - y_c) / C'
  Vec d_logit(nc);
  double loss = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    d_logit[c] = (sigmoid(out.logits[c]) - y[c]) / double(nc);
    loss += softplus(out.logits[c]) - y[c] * out.logits[c];
    acc.cls_bias[c] += scale * d_logit[c];
  }

  Vec d_rep(c1, 0.0);
  for (std::size_t r = 0; r < c1; ++r) {
    const auto w = head.cls_weights.row(r);
    auto gw = acc.cls_weights.row(r);
    const double h = scale * out.representation[r];
    double back = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      gw[c] += h * d_logit[c];
      back += w[c] * d_logit[c];
    }
    d_rep[r] = back;
    acc.proj_bias[r] += scale * back;
  }
  for (std::size_t r = 0; r < pooled.size(); ++r) {
    const double x = scale * pooled[r];
    if (x == 0.0) continue;
    auto gw = acc.proj_weights.row(r);
    for (std::size_t j = 0; j < c1; ++j) gw[j] += x * d_rep[j];
  }
  return std::max(loss / double(nc), 0.0);
}

void apply_gradient(AnticipationHead& head, const HeadGradient& grad, double lr) {
  if (lr == 0.0) return;
  auto step = [lr](std::vector<double>& p, const std::vector<double>& g) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  };
  step(head.proj_weights.data(), grad.proj_weights.data());
  step(head.proj_bias, grad.proj_bias);
  step(head.cls_weights.data(), grad.cls_weights.data());
  step(head.cls_bias, grad.cls_bias);
}

std::vector<double> train_source(AnticipationHead& head, std::span<const LabeledSample> data,
                                 std::size_t epochs, double lr) {
  if (epochs == 0) throw InvalidInput("train_source: epochs must be >= 1");
  if (data.empty()) throw InvalidInput("train_source: empty dataset");
  for (const auto& s : data) {
    if (s.labels.empty()) throw InvalidInput("train_source: unlabeled record");
  }
  head.validate();
  std::vector<double> losses;
  losses.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    double loss = 0.0;
    const HeadGradient g = kernels::dataset_bce_gradient_parallel(head, data, &loss);
    losses.push_back(loss);
    apply_gradient(head, g, lr);
  }
  return losses;
}

}  // namespace protoclue

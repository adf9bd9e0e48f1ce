#include "protoclue/dccm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "protoclue/kernels.hpp"

namespace protoclue {

ClassFeatureTable ClassFeatureTable::random_unit(std::size_t class_count, std::size_t dim,
                                                 std::uint64_t seed) {
  ClassFeatureTable t{Matrix(class_count, dim)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t c = 0; c < class_count; ++c) {
    auto row = t.features.row(c);
    double n = 0.0;
    while (n == 0.0) {
      for (double& v : row) v = normal(rng);
      n = l2_norm(row);
    }
    for (double& v : row) v /= n;
  }
  return t;
}

void ClassFeatureTable::validate() const {
  if (class_count() == 0 || dim() == 0) throw InvalidInput("class feature table is empty");
  require_finite(features.data(), "class feature table");
  for (std::size_t c = 0; c < class_count(); ++c) {
    if (l2_norm(features.row(c)) == 0.0) throw InvalidInput("class feature table: zero row");
  }
}

Vec clue_logits(std::span<const double> clue, const ClassFeatureTable& table, double mu) {
  if (clue.size() != table.dim()) throw InvalidInput("clue_logits: dimension mismatch");
  Vec out(table.class_count(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = mu * cosine_or_zero(clue, table.features.row(c));
  return out;
}

double consistency_loss(std::span<const double> visual_logits,
                        std::span<const double> textual_logits, double epsilon) {
  if (visual_logits.size() != textual_logits.size())
    throw InvalidInput("consistency_loss: length mismatch");
  return symmetric_kl(softmax(visual_logits), softmax(textual_logits), epsilon);
}

LogitGradient consistency_logit_gradient(std::span<const double> visual_logits,
                                         std::span<const double> textual_logits,
                                         double epsilon) {
  if (visual_logits.size() != textual_logits.size())
    throw InvalidInput("consistency_logit_gradient: length mismatch");
  const Vec p = softmax(visual_logits);
  const Vec q = softmax(textual_logits);
  const std::size_t n = p.size();

  // L = sum_i (p_i - q_i) * a_i with a_i = log max(p_i, eps) - log max(q_i, eps).
  // A floored probability contributes a constant log, so its log-derivative
  // term drops out (masks mp, mq).
  Vec a(n);
  double pa = 0.0, qa = 0.0, masked_p = 0.0, masked_q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::log(std::max(p[i], epsilon)) - std::log(std::max(q[i], epsilon));
    pa += p[i] * a[i];
    qa += q[i] * a[i];
    if (p[i] >= epsilon) masked_p += p[i] - q[i];
    if (q[i] >= epsilon) masked_q += p[i] - q[i];
  }
  LogitGradient g{Vec(n), Vec(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const double mp = p[j] >= epsilon ? 1.0 : 0.0;
    const double mq = q[j] >= epsilon ? 1.0 : 0.0;
    g.visual[j] = p[j] * (a[j] - pa) + (p[j] - q[j]) * mp - p[j] * masked_p;
    g.textual[j] = -q[j] * (a[j] - qa) - ((p[j] - q[j]) * mq - q[j] * masked_q);
  }
  return g;
}

Vec cosine_gradient_wrt_second(std::span<const double> u, std::span<const double> w) {
  if (u.size() != w.size()) throw InvalidInput("cosine_gradient: dimension mismatch");
  Vec g(w.size(), 0.0);
  const double nu = l2_norm(u);
  const double nw = l2_norm(w);
  if (nu == 0.0 || nw == 0.0) return g;
  const double cos = dot(u, w) / (nu * nw);
  for (std::size_t i = 0; i < w.size(); ++i) g[i] = u[i] / (nu * nw) - cos * w[i] / (nw * nw);
  return g;
}

Matrix consistency_gradient(const ClueFeatures& clues, const ClassFeatureTable& table,
                            const EngineConfig& config, double* loss) {
  const Vec lv = clue_logits(clues.visual, table, config.mu1);
  const Vec lt = clue_logits(clues.textual, table, config.mu2);
  if (loss != nullptr) *loss = consistency_loss(lv, lt, config.kl_epsilon);
  const LogitGradient dl = consistency_logit_gradient(lv, lt, config.kl_epsilon);

  Matrix grad(table.class_count(), table.dim());
  for (std::size_t c = 0; c < table.class_count(); ++c) {
    const auto w = table.features.row(c);
    auto out = grad.row(c);
    const double sv = dl.visual[c] * config.mu1;
    const double st = dl.textual[c] * config.mu2;
    if (sv != 0.0) {
      const Vec dv = cosine_gradient_wrt_second(clues.visual, w);
      for (std::size_t d = 0; d < out.size(); ++d) out[d] += sv * dv[d];
    }
    if (st != 0.0) {
      const Vec dt = cosine_gradient_wrt_second(clues.textual, w);
      for (std::size_t d = 0; d < out.size(); ++d) out[d] += st * dt[d];
    }
  }
  return grad;
}

double adapt_step(ClassFeatureTable& table, std::span<const ClueFeatures> batch,
                  const EngineConfig& config) {
  if (!(config.learning_rate >= 0.0)) throw InvalidInput("adapt_step: negative learning rate");
  if (batch.empty()) return 0.0;
  const kernels::ConsistencyBatch result =
      kernels::consistency_batch_parallel(batch, table, config);
  if (config.learning_rate != 0.0) {
    auto& w = table.features.data();
    const auto& g = result.mean_gradient.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * g[i];
  }
  return result.mean_loss;
}

Vec fuse_logits(std::span<const double> prototype, std::span<const double> visual,
                std::span<const double> textual, double alpha) {
  if (prototype.size() != visual.size() || prototype.size() != textual.size())
    throw InvalidInput("fuse_logits: length mismatch");
  Vec out(prototype.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = prototype[i] + alpha * (visual[i] + textual[i]);
  return out;
}

}  // namespace protoclue

#include "protoclue/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protoclue {

void EngineConfig::validate() const {
  if (class_count == 0) throw ConfigError("class_count must be positive");
  if (k_labels == 0) throw ConfigError("k_labels must be positive");
  if (k_labels > class_count) throw ConfigError("k_labels exceeds class_count");
  if (bank_capacity == 0) throw ConfigError("bank_capacity must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (frames_per_window == 0) throw ConfigError("frames_per_window must be positive");
  if (internal_dim == 0) throw ConfigError("internal_dim must be positive");
  if (top_k == 0) throw ConfigError("top_k must be positive");
  if (!(kl_epsilon > 0.0)) throw ConfigError("kl_epsilon must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (!(tau_obs_s > 0.0)) throw ConfigError("tau_obs_s must be positive");
  if (!(tau_interval_s >= 0.0)) throw ConfigError("tau_interval_s must be non-negative");
  for (double v : {mu1, mu2, alpha}) {
    if (!std::isfinite(v)) throw ConfigError("mu1, mu2 and alpha must be finite");
  }
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite value");
  }
}

Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty logits");
  require_finite(logits, "softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

double entropy(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("entropy: empty logits");
  require_finite(logits, "entropy");
  // log p_i = (l_i - m) - log Z keeps the log finite even when p_i underflows.
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = std::log(z);
  double h = 0.0;
  for (double l : logits) {
    const double log_p = (l - m) - log_z;
    h -= std::exp(log_p) * log_p;
  }
  return std::max(h, 0.0);
}

std::vector<ClassId> topk_indices(std::span<const double> logits, std::size_t k) {
  if (k > logits.size()) throw InvalidInput("topk_indices: k exceeds class count");
  std::vector<ClassId> idx(logits.size());
  std::iota(idx.begin(), idx.end(), ClassId{0});
  auto before = [&](ClassId a, ClassId b) {
    return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    before);
  idx.resize(k);
  return idx;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("cosine_similarity: dimension mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateVector("cosine_similarity: zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double cosine_or_zero(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("cosine_similarity: dimension mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double symmetric_kl(std::span<const double> p, std::span<const double> q, double epsilon) {
  if (p.size() != q.size()) throw InvalidInput("symmetric_kl: length mismatch");
  if (!(epsilon > 0.0)) throw InvalidInput("symmetric_kl: epsilon must be positive");
  // KL(p||q) + KL(q||p) == sum (p_i - q_i)(log p_i - log q_i); the summand is
  // symmetric under p <-> q, so argument order cannot change the result.
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double lp = std::log(std::max(p[i], epsilon));
    const double lq = std::log(std::max(q[i], epsilon));
    s += (p[i] - q[i]) * (lp - lq);
  }
  return std::max(s, 0.0);
}

}  // namespace protoclue

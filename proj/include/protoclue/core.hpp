#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace protoclue {

using ClassId = std::size_t;
using Vec = std::vector<double>;

// Error hierarchy. Every engine failure derives from Error so the CLI can map
// categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DegenerateVector : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyEvaluation : public Error {
 public:
  using Error::Error;
};

class WindowOutOfRange : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Hyperparameters shared by every stage of the engine.
struct EngineConfig {
  std::size_t k_labels = 3;
  std::size_t bank_capacity = 500;
  double mu1 = 1.0;
  double mu2 = 0.5;
  double alpha = 0.5;
  std::size_t batch_size = 64;
  std::size_t class_count = 10;
  double learning_rate = 5e-4;
  std::size_t frames_per_window = 5;
  double tau_obs_s = 2.0;
  double tau_interval_s = 1.0;
  double kl_epsilon = 1e-8;
  std::size_t internal_dim = 512;
  std::size_t top_k = 5;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

// ---- numeric primitives ----------------------------------------------------

/// Throws InvalidInput if any value is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);

/// Numerically stable softmax (max-subtraction).
Vec softmax(std::span<const double> logits);

/// Shannon entropy (natural log) of softmax(logits).
double entropy(std::span<const double> logits);

/// Indices of the k largest scores, descending; equal scores ordered by
/// ascending index.
std::vector<ClassId> topk_indices(std::span<const double> logits, std::size_t k);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Throws DegenerateVector when either argument has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// cosine_similarity with the engine convention: 0 for a zero-norm argument.
double cosine_or_zero(std::span<const double> a, std::span<const double> b);

/// KL(p||q) + KL(q||p); each probability is floored at epsilon before the log.
double symmetric_kl(std::span<const double> p, std::span<const double> q,
                    double epsilon = 1e-8);

}  // namespace protoclue

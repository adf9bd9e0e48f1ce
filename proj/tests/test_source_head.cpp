#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "protoclue/metrics.hpp"
#include "protoclue/source_head.hpp"
#include "support.hpp"

using namespace protoclue;

namespace {

AnticipationHead identity_head(std::size_t n) {
  AnticipationHead h = AnticipationHead::zeros(n, n, n);
  for (std::size_t i = 0; i < n; ++i) {
    h.proj_weights(i, i) = 1.0;
    h.cls_weights(i, i) = 1.0;
  }
  return h;
}

AnticipationHead random_head(std::mt19937_64& rng, std::size_t c, std::size_t c1, std::size_t k) {
  AnticipationHead h = AnticipationHead::zeros(c, c1, k);
  h.proj_weights = testing::random_matrix(rng, c, c1, 0.5);
  h.proj_bias = testing::random_vec(rng, c1, 0.5);
  h.cls_weights = testing::random_matrix(rng, c1, k, 0.5);
  h.cls_bias = testing::random_vec(rng, k, 0.5);
  return h;
}

// Flattened parameter access for finite differences.
std::vector<double*> parameters(AnticipationHead& h) {
  std::vector<double*> out;
  for (double& x : h.proj_weights.data()) out.push_back(&x);
  for (double& x : h.proj_bias) out.push_back(&x);
  for (double& x : h.cls_weights.data()) out.push_back(&x);
  for (double& x : h.cls_bias) out.push_back(&x);
  return out;
}

std::vector<double> flatten(const HeadGradient& g) {
  std::vector<double> out(g.proj_weights.data());
  out.insert(out.end(), g.proj_bias.begin(), g.proj_bias.end());
  out.insert(out.end(), g.cls_weights.data().begin(), g.cls_weights.data().end());
  out.insert(out.end(), g.cls_bias.begin(), g.cls_bias.end());
  return out;
}

}  // namespace

TEST_CASE("forward examples") {
  const AnticipationHead zero = AnticipationHead::zeros(3, 4, 2);
  const HeadOutput z = forward(zero, std::vector<Vec>{{1.0, 2.0, 3.0}});
  CHECK(z.representation == Vec(4, 0.0));
  CHECK(z.logits == Vec(2, 0.0));

  const AnticipationHead id = identity_head(3);
  const Vec f{0.2, -1.0, 4.0};
  const HeadOutput o = forward(id, std::vector<Vec>{f});
  CHECK(o.representation == f);
  CHECK(o.logits == f);

  const AnticipationHead id2 = identity_head(2);
  const HeadOutput m = forward(id2, std::vector<Vec>{{1.0, 0.0}, {0.0, 1.0}});
  CHECK(m.representation == Vec{0.5, 0.5});
  CHECK(m.logits == Vec{0.5, 0.5});
}

TEST_CASE("forward rejects malformed inputs") {
  const AnticipationHead h = AnticipationHead::zeros(3, 4, 2);
  CHECK_THROWS_AS(forward(h, std::vector<Vec>{}), InvalidInput);
  CHECK_THROWS_AS(forward(h, std::vector<Vec>{{1.0, 2.0}}), InvalidInput);
  CHECK_THROWS_AS(mean_pool(std::vector<Vec>{{1.0, 2.0}, {1.0}}), InvalidInput);
}

TEST_CASE("forward is linear in the frames when biases are zero") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    AnticipationHead h = random_head(rng, 6, 5, 4);
    std::fill(h.proj_bias.begin(), h.proj_bias.end(), 0.0);
    std::fill(h.cls_bias.begin(), h.cls_bias.end(), 0.0);
    std::vector<Vec> frames{testing::random_vec(rng, 6), testing::random_vec(rng, 6)};
    const double a = 0.5 + trial * 0.1;
    std::vector<Vec> scaled = frames;
    for (Vec& f : scaled)
      for (double& x : f) x *= a;
    const Vec base = forward(h, frames).logits;
    const Vec out = forward(h, scaled).logits;
    for (std::size_t i = 0; i < base.size(); ++i)
      CHECK(out[i] == doctest::Approx(a * base[i]).epsilon(1e-10));
  }
}

TEST_CASE("bce_loss examples") {
  CHECK(bce_loss(Vec(4, 0.0), LabelSet{0, 2}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(Vec{1000.0}, LabelSet{0}) == doctest::Approx(0.0));
  const double expected = 0.5 * (-std::log(0.5) - std::log(0.75));
  CHECK(bce_loss(Vec{0.0, std::log(3.0)}, LabelSet{1}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.4904).epsilon(1e-4));
  CHECK_THROWS_AS(bce_loss(Vec{0.0, 0.0}, LabelSet{2}), InvalidInput);
}

TEST_CASE("bce_loss is non-negative") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec l = testing::random_vec(rng, 5, 10.0);
    CHECK(bce_loss(l, LabelSet{static_cast<ClassId>(trial % 5)}) >= 0.0);
  }
}

TEST_CASE("BCE gradient matches central finite differences") {
  std::mt19937_64 rng(1234);
  constexpr double kStep = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    AnticipationHead h = random_head(rng, 8, 6, 4);
    const Vec pooled = testing::random_vec(rng, 8);
    LabelSet labels{static_cast<ClassId>(trial % 4)};
    if (trial % 3 == 0) labels.push_back((trial + 1) % 4);

    const std::vector<double> analytic = flatten(bce_gradient(h, pooled, labels));
    std::vector<double> numeric;
    for (double* p : parameters(h)) {
      const double saved = *p;
      *p = saved + kStep;
      const double up = bce_loss(forward_pooled(h, pooled).logits, labels);
      *p = saved - kStep;
      const double down = bce_loss(forward_pooled(h, pooled).logits, labels);
      *p = saved;
      numeric.push_back((up - down) / (2.0 * kStep));
    }
    CHECK(testing::relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("accumulate_bce_gradient agrees with bce_gradient") {
  std::mt19937_64 rng(8);
  const AnticipationHead h = random_head(rng, 5, 4, 3);
  const Vec pooled = testing::random_vec(rng, 5);
  const LabelSet labels{1};
  HeadGradient acc = HeadGradient::zeros_like(h);
  const double loss = accumulate_bce_gradient(h, pooled, labels, 2.0, acc);
  CHECK(loss == doctest::Approx(bce_loss(forward_pooled(h, pooled).logits, labels)));
  const std::vector<double> expected = flatten(bce_gradient(h, pooled, labels));
  const std::vector<double> got = flatten(acc);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(2.0 * expected[i]));
}

TEST_CASE("train_source with lr 0 leaves the head unchanged") {
  std::mt19937_64 rng(2);
  AnticipationHead h = random_head(rng, 4, 3, 2);
  const AnticipationHead before = h;
  std::vector<LabeledSample> data{{testing::random_vec(rng, 4), {0}},
                                  {testing::random_vec(rng, 4), {1}}};
  train_source(h, data, 3, 0.0);
  CHECK(h == before);
}

TEST_CASE("single-sample single-class step matches the closed form") {
  std::mt19937_64 rng(17);
  AnticipationHead h = random_head(rng, 4, 3, 1);
  const AnticipationHead before = h;
  const Vec pooled = testing::random_vec(rng, 4);
  const double lr = 0.3;
  const HeadOutput out = forward_pooled(before, pooled);
  const double s = 1.0 / (1.0 + std::exp(-out.logits[0]));

  std::vector<LabeledSample> data{{pooled, {0}}};
  train_source(h, data, 1, lr);
  for (std::size_t j = 0; j < 3; ++j) {
    const double delta = h.cls_weights(j, 0) - before.cls_weights(j, 0);
    CHECK(delta == doctest::Approx(-lr * (s - 1.0) * out.representation[j]).epsilon(1e-12));
  }
  CHECK(h.cls_bias[0] - before.cls_bias[0] == doctest::Approx(-lr * (s - 1.0)).epsilon(1e-12));
}

TEST_CASE("train_source reaches perfect recall on a separable two-class set") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<LabeledSample> data;
  for (int i = 0; i < 200; ++i) {
    const ClassId c = static_cast<ClassId>(i % 2);
    Vec x(4);
    for (double& v : x) v = noise(rng);
    x[c] += 2.0;
    data.push_back({x, {c}});
  }
  AnticipationHead h = AnticipationHead::random(4, 8, 2, 7);
  const std::vector<double> losses = train_source(h, data, 500, 0.1);
  CHECK(losses.size() == 500);
  CHECK(losses.back() < losses.front());

  EvalAccumulator acc(2, 1);
  for (const LabeledSample& s : data) acc.record(forward_pooled(h, s.pooled).logits, s.labels);
  CHECK(acc.class_mean_recall() == 100.0);
}

TEST_CASE("train_source rejects bad input") {
  AnticipationHead h = AnticipationHead::random(2, 2, 2, 1);
  std::vector<LabeledSample> unlabeled{{{1.0, 0.0}, {}}};
  CHECK_THROWS_AS(train_source(h, unlabeled, 1, 0.1), InvalidInput);
  std::vector<LabeledSample> ok{{{1.0, 0.0}, {0}}};
  CHECK_THROWS_AS(train_source(h, ok, 0, 0.1), InvalidInput);
  CHECK_THROWS_AS(train_source(h, std::vector<LabeledSample>{}, 1, 0.1), InvalidInput);
}

TEST_CASE("random init is seeded") {
  CHECK(AnticipationHead::random(5, 4, 3, 9) == AnticipationHead::random(5, 4, 3, 9));
  CHECK_FALSE(AnticipationHead::random(5, 4, 3, 9) == AnticipationHead::random(5, 4, 3, 10));
}

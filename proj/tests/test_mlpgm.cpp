#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "protoclue/mlpgm.hpp"
#include "support.hpp"

using namespace protoclue;

namespace {

DataTuple tuple(std::vector<ClassId> labels, double h, Vec rep = {1.0, 0.0}) {
  DataTuple t;
  t.representation = std::move(rep);
  t.confidences.assign(labels.size(), 1.0);
  t.pseudo_labels = std::move(labels);
  t.entropy = h;
  return t;
}

std::vector<double> bank_entropies(const MemoryBank& b) {
  std::vector<double> out;
  for (const BankEntry& e : b.entries()) out.push_back(e.entropy);
  return out;
}

}  // namespace

TEST_CASE("assign_pseudo_labels examples") {
  const DataTuple t = assign_pseudo_labels(Vec{1.0, 2.0}, Vec{0.9, 0.1, 0.5}, 2);
  CHECK(t.pseudo_labels == std::vector<ClassId>{0, 2});
  CHECK(t.confidences == Vec{0.9, 0.5});
  CHECK(t.representation == Vec{1.0, 2.0});
  CHECK(t.entropy == entropy(Vec{0.9, 0.1, 0.5}));

  const DataTuple all = assign_pseudo_labels(Vec{1.0}, Vec{0.3, -1.0, 2.0, 0.0}, 4);
  std::vector<ClassId> sorted = all.pseudo_labels;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<ClassId>{0, 1, 2, 3});

  const DataTuple uniform = assign_pseudo_labels(Vec{1.0}, Vec(19, 0.0), 3);
  CHECK(uniform.pseudo_labels == std::vector<ClassId>{0, 1, 2});
  CHECK(std::abs(uniform.entropy - std::log(19.0)) < 1e-9);

  CHECK_THROWS_AS(assign_pseudo_labels(Vec{1.0}, Vec{0.1, 0.2}, 3), InvalidInput);
}

TEST_CASE("bank update examples") {
  BankSet banks(5, 4);
  const std::vector<DataTuple> one{tuple({3}, 0.4)};
  banks.update(one);
  for (ClassId c = 0; c < 5; ++c) CHECK(banks.bank(c).size() == (c == 3 ? 1u : 0u));

  MemoryBank b(0, 2);
  b.offer({{1.0}, 1.0, 0.5, 0});
  b.offer({{1.0}, 1.0, 0.9, 1});
  CHECK(b.offer({{1.0}, 1.0, 0.7, 2}));
  CHECK(bank_entropies(b) == std::vector<double>{0.5, 0.7});
  CHECK_FALSE(b.offer({{1.0}, 1.0, 0.9, 3}));
  CHECK(bank_entropies(b) == std::vector<double>{0.5, 0.7});
}

TEST_CASE("incumbent wins entropy ties at capacity") {
  MemoryBank b(0, 1);
  CHECK(b.offer({{1.0}, 1.0, 0.5, 0}));
  CHECK_FALSE(b.offer({{2.0}, 1.0, 0.5, 1}));
  CHECK(b.entries().front().arrival == 0);
}

TEST_CASE("streaming banks equal the offline lowest-entropy selection") {
  std::mt19937_64 rng(42);
  for (int stream = 0; stream < 60; ++stream) {
    const std::size_t classes = 2 + stream % 9;
    const std::size_t capacity = stream % 2 == 0 ? 5 : 50;
    const std::size_t k = 1 + stream % std::min<std::size_t>(classes, 3);
    std::uniform_int_distribution<std::size_t> count_dist(1, 1000);
    std::uniform_int_distribution<int> coarse(0, 20);  // coarse entropies force ties
    const std::size_t samples = count_dist(rng);

    std::vector<DataTuple> all;
    for (std::size_t s = 0; s < samples; ++s) {
      std::vector<ClassId> labels(classes);
      std::iota(labels.begin(), labels.end(), 0);
      std::shuffle(labels.begin(), labels.end(), rng);
      labels.resize(k);
      DataTuple t = tuple(labels, coarse(rng) * 0.1, testing::random_vec(rng, 3));
      t.confidences = testing::random_vec(rng, k);
      all.push_back(std::move(t));
    }

    BankSet banks(classes, capacity);
    std::size_t pos = 0;
    std::uniform_int_distribution<std::size_t> batch_dist(1, 64);
    while (pos < all.size()) {
      const std::size_t n = std::min(batch_dist(rng), all.size() - pos);
      banks.update(std::span<const DataTuple>(all.data() + pos, n));
      pos += n;
    }
    CHECK(banks.samples_seen() == samples);

    for (ClassId c = 0; c < classes; ++c) {
      std::vector<std::tuple<double, std::uint64_t, Vec, double>> offline;
      for (std::size_t s = 0; s < all.size(); ++s) {
        for (std::size_t i = 0; i < k; ++i) {
          if (all[s].pseudo_labels[i] == c)
            offline.emplace_back(all[s].entropy, s, all[s].representation, all[s].confidences[i]);
        }
      }
      std::stable_sort(offline.begin(), offline.end(), [](const auto& a, const auto& b) {
        return std::get<0>(a) < std::get<0>(b);
      });
      if (offline.size() > capacity) offline.resize(capacity);

      const auto& entries = banks.bank(c).entries();
      REQUIRE(entries.size() == offline.size());
      std::set<std::uint64_t> arrivals;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(entries[i].entropy == std::get<0>(offline[i]));
        CHECK(entries[i].arrival == std::get<1>(offline[i]));
        CHECK(entries[i].representation == std::get<2>(offline[i]));
        CHECK(entries[i].confidence == std::get<3>(offline[i]));
        arrivals.insert(entries[i].arrival);
      }
      CHECK(arrivals.size() == entries.size());
    }
  }
}

TEST_CASE("each sample lands in exactly K banks before any eviction") {
  std::mt19937_64 rng(3);
  BankSet banks(6, 1000);
  std::vector<DataTuple> batch;
  for (int s = 0; s < 100; ++s)
    batch.push_back(assign_pseudo_labels(testing::random_vec(rng, 4), testing::random_vec(rng, 6), 3));
  std::vector<std::size_t> sizes_before(6, 0);
  banks.update(std::span<const DataTuple>(batch.data(), 50));
  for (ClassId c = 0; c < 6; ++c) sizes_before[c] = banks.bank(c).size();
  banks.update(std::span<const DataTuple>(batch.data() + 50, 50));

  std::map<std::uint64_t, int> per_sample;
  for (const MemoryBank& b : banks.banks()) {
    CHECK(b.size() >= sizes_before[b.class_id()]);
    CHECK(b.size() <= b.capacity());
    std::set<std::uint64_t> seen;
    for (const BankEntry& e : b.entries()) {
      CHECK(seen.insert(e.arrival).second);
      ++per_sample[e.arrival];
    }
  }
  CHECK(per_sample.size() == 100);
  for (const auto& [_, n] : per_sample) CHECK(n == 3);
}

TEST_CASE("confidence weights") {
  CHECK(confidence_weights(Vec{3.0, 1.0}) == Vec{0.75, 0.25});
  const Vec eq = confidence_weights(Vec{-2.0, -2.0});
  CHECK(eq[0] == doctest::Approx(0.5));
  CHECK(eq[1] == doctest::Approx(0.5));
  const Vec shifted = confidence_weights(Vec{-1.0, 1.0});
  CHECK(shifted[0] == doctest::Approx(1e-8 / (2.0 + 2e-8)));
  CHECK(shifted[1] == doctest::Approx((2.0 + 1e-8) / (2.0 + 2e-8)));
  CHECK(confidence_weights(Vec{5.0}) == Vec{1.0});
}

TEST_CASE("compute_prototypes examples") {
  SUBCASE("single entry") {
    BankSet banks(2, 4);
    banks.update(std::vector<DataTuple>{tuple({1}, 0.2, {0.3, -0.7})});
    const PrototypeClassifier p = compute_prototypes(banks, 2);
    CHECK(p.prototypes(1, 0) == 0.3);
    CHECK(p.prototypes(1, 1) == -0.7);
    CHECK(p.populated == std::vector<bool>{false, true});
    CHECK(p.prototypes(0, 0) == 0.0);
    CHECK(p.prototypes(0, 1) == 0.0);
  }
  SUBCASE("confidences 3 and 1 weight by plain L1") {
    BankSet banks(1, 4);
    DataTuple a = tuple({0}, 0.1, {1.0, 0.0});
    a.confidences = {3.0};
    DataTuple b = tuple({0}, 0.2, {0.0, 1.0});
    b.confidences = {1.0};
    banks.update(std::vector<DataTuple>{a, b});
    const PrototypeClassifier p = compute_prototypes(banks, 2);
    CHECK(p.prototypes(0, 0) == doctest::Approx(0.75));
    CHECK(p.prototypes(0, 1) == doctest::Approx(0.25));
  }
  SUBCASE("equal confidences give the midpoint") {
    BankSet banks(1, 4);
    banks.update(std::vector<DataTuple>{tuple({0}, 0.1, {1.0, 4.0}), tuple({0}, 0.2, {3.0, 0.0})});
    const PrototypeClassifier p = compute_prototypes(banks, 2);
    CHECK(p.prototypes(0, 0) == doctest::Approx(2.0));
    CHECK(p.prototypes(0, 1) == doctest::Approx(2.0));
  }
  SUBCASE("uniform weighting ignores confidences") {
    BankSet banks(1, 4);
    DataTuple a = tuple({0}, 0.1, {1.0, 0.0});
    a.confidences = {3.0};
    DataTuple b = tuple({0}, 0.2, {0.0, 1.0});
    b.confidences = {1.0};
    banks.update(std::vector<DataTuple>{a, b});
    const PrototypeClassifier p = compute_prototypes(banks, 2, false);
    CHECK(p.prototypes(0, 0) == doctest::Approx(0.5));
    CHECK(p.prototypes(0, 1) == doctest::Approx(0.5));
  }
}

TEST_CASE("prototype weights sum to one and prototypes stay in the convex hull") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 30;
    Vec conf = testing::random_vec(rng, n, 2.0);
    if (trial % 3 == 0)
      for (double& c : conf) c = std::abs(c) + 0.01;
    const Vec w = confidence_weights(conf);
    double sum = 0.0;
    for (double x : w) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    // Per coordinate, a convex combination stays within [min, max].
    BankSet banks(1, 64);
    std::vector<DataTuple> batch;
    for (std::size_t i = 0; i < n; ++i) {
      DataTuple t = tuple({0}, 0.01 * double(i), testing::random_vec(rng, 3));
      t.confidences = {conf[i]};
      batch.push_back(t);
    }
    banks.update(batch);
    const PrototypeClassifier p = compute_prototypes(banks, 3);
    for (std::size_t d = 0; d < 3; ++d) {
      double lo = 1e300, hi = -1e300;
      for (const DataTuple& t : batch) {
        lo = std::min(lo, t.representation[d]);
        hi = std::max(hi, t.representation[d]);
      }
      CHECK(p.prototypes(0, d) >= lo - 1e-12);
      CHECK(p.prototypes(0, d) <= hi + 1e-12);
    }
  }
}

TEST_CASE("prototype_logits examples") {
  PrototypeClassifier p{Matrix(2, 2), {true, true}};
  p.prototypes(0, 0) = 1.0;
  p.prototypes(1, 1) = 1.0;
  const Vec l = prototype_logits(p, Vec{1.0, 1.0});
  CHECK(l[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(l[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(prototype_logits(p, Vec{2.0, 0.0})[0] == doctest::Approx(1.0));

  const PrototypeClassifier empty{Matrix(3, 2), {false, false, false}};
  CHECK(prototype_logits(empty, Vec{1.0, 1.0}) == Vec(3, 0.0));

  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    PrototypeClassifier r{testing::random_matrix(rng, 4, 5), {true, true, false, true}};
    for (double v : prototype_logits(r, testing::random_vec(rng, 5))) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("bank snapshot is one JSON object per entry") {
  BankSet banks(3, 4);
  banks.update(std::vector<DataTuple>{tuple({0, 2}, 0.3, {1.0, 2.0}), tuple({2}, 0.1, {0.5, 0.5})});
  std::ostringstream out;
  write_bank_snapshot(out, banks);
  std::istringstream in(out.str());
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0]["class_id"] == 0);
  CHECK(rows[1]["class_id"] == 2);
  CHECK(rows[1]["entropy"] == 0.1);
  CHECK(rows[2]["representation"] == nlohmann::json::array({1.0, 2.0}));
  CHECK(rows[2].contains("confidence"));
}

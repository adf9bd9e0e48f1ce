#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "protoclue/metrics.hpp"
#include "support.hpp"

using namespace protoclue;

namespace {

// Brute-force recompute from the raw log: membership by counting strictly better scores.
double brute_force_recall(const std::vector<Vec>& preds, const std::vector<LabelSet>& truths,
                          std::size_t classes, std::size_t k) {
  std::vector<double> hits(classes, 0.0), totals(classes, 0.0);
  for (std::size_t s = 0; s < preds.size(); ++s) {
    for (ClassId c : truths[s]) {
      std::size_t rank = 0;
      for (ClassId o = 0; o < classes; ++o) {
        if (preds[s][o] > preds[s][c] || (preds[s][o] == preds[s][c] && o < c)) ++rank;
      }
      totals[c] += 1.0;
      if (rank < k) hits[c] += 1.0;
    }
  }
  double sum = 0.0;
  std::size_t observed = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (totals[c] == 0.0) continue;
    sum += hits[c] / totals[c];
    ++observed;
  }
  return 100.0 * sum / double(observed);
}

}  // namespace

TEST_CASE("accumulator examples") {
  EvalAccumulator acc(8, 5);
  acc.record(Vec{8, 7, 6, 5, 4, 3, 2, 1}, LabelSet{2});
  CHECK(acc.hits()[2] == 1);
  CHECK(acc.totals()[2] == 1);

  EvalAccumulator two(8, 5);
  two.record(Vec{8, 7, 6, 5, 4, 3, 2, 1}, LabelSet{0, 7});
  CHECK(two.hits()[0] == 1);
  CHECK(two.totals()[0] == 1);
  CHECK(two.hits()[7] == 0);
  CHECK(two.totals()[7] == 1);

  EvalAccumulator all(4, 4);
  all.record(Vec{0.1, 0.4, 0.2, 0.3}, LabelSet{0, 1, 2, 3});
  for (ClassId c = 0; c < 4; ++c) CHECK(all.hits()[c] == 1);

  EvalAccumulator wide(3, 5);
  wide.record(Vec{0.1, 0.2, 0.3}, LabelSet{0});
  CHECK(wide.hits()[0] == 1);
}

TEST_CASE("class-mean recall examples") {
  EvalAccumulator one(2, 1);
  for (int i = 0; i < 3; ++i) one.record(Vec{1.0, 0.0}, LabelSet{0});
  one.record(Vec{0.0, 1.0}, LabelSet{0});
  CHECK(one.class_mean_recall() == 75.0);

  EvalAccumulator macro(2, 1);
  for (int i = 0; i < 10; ++i) macro.record(Vec{1.0, 0.0}, LabelSet{0});
  macro.record(Vec{1.0, 0.0}, LabelSet{1});
  CHECK(macro.class_mean_recall() == 50.0);

  EvalAccumulator three(4, 1);
  three.record(Vec{1, 0, 0, 0}, LabelSet{0});
  three.record(Vec{0, 1, 0, 0}, LabelSet{1});
  three.record(Vec{1, 0, 0, 0}, LabelSet{1});
  three.record(Vec{1, 0, 0, 0}, LabelSet{2});
  CHECK(three.class_mean_recall() == doctest::Approx(50.0));
}

TEST_CASE("accumulator errors") {
  EvalAccumulator acc(3, 2);
  CHECK_THROWS_AS(acc.class_mean_recall(), EmptyEvaluation);
  CHECK_THROWS_AS(acc.record(Vec{1, 2, 3}, LabelSet{}), InvalidInput);
  CHECK_THROWS_AS(acc.record(Vec{1, 2}, LabelSet{0}), InvalidInput);
  CHECK_THROWS_AS(acc.record(Vec{1, 2, 3}, LabelSet{3}), InvalidInput);
  CHECK_THROWS_AS(acc.merge(EvalAccumulator(3, 1)), InvalidInput);
  CHECK_THROWS_AS(EvalAccumulator(0, 1), InvalidInput);
}

TEST_CASE("recall matches brute force, is order invariant and monotone in k") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> coarse(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = 3 + trial % 8;
    std::vector<Vec> preds;
    std::vector<LabelSet> truths;
    for (int s = 0; s < 60; ++s) {
      Vec p(classes);
      for (double& x : p) x = coarse(rng);  // ties exercise the index rule
      preds.push_back(p);
      truths.push_back({static_cast<ClassId>(s % classes), static_cast<ClassId>((s * 3 + 1) % classes)});
      if (truths.back()[0] == truths.back()[1]) truths.back().pop_back();
    }
    double previous = -1.0;
    for (std::size_t k = 1; k <= classes; ++k) {
      EvalAccumulator acc(classes, k);
      for (std::size_t s = 0; s < preds.size(); ++s) acc.record(preds[s], truths[s]);
      const double r = acc.class_mean_recall();
      CHECK(r == doctest::Approx(brute_force_recall(preds, truths, classes, k)).epsilon(1e-12));
      CHECK(r >= previous);
      previous = r;

      std::vector<std::size_t> order(preds.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      EvalAccumulator a(classes, k), b(classes, k);
      for (std::size_t i = 0; i < order.size(); ++i)
        (i % 2 ? a : b).record(preds[order[i]], truths[order[i]]);
      a.merge(b);
      CHECK(a.hits() == acc.hits());
      CHECK(a.totals() == acc.totals());
    }
  }
}

TEST_CASE("reports") {
  EvalAccumulator acc(3, 1);
  acc.record(Vec{1, 0, 0}, LabelSet{0});
  acc.record(Vec{1, 0, 0}, LabelSet{2});
  const std::vector<RecallRow> rows{make_row("Exo2Ego", "verb", acc)};
  CHECK(rows[0].recall == 50.0);

  std::ostringstream text;
  write_text_report(text, rows);
  CHECK(text.str() ==
        "Exo2Ego [verb] top-1 class-mean recall: 50.0000\n"
        "  class 0: 1/1\n"
        "  class 2: 0/1\n");

  std::ostringstream csv;
  write_csv_report(csv, rows);
  CHECK(csv.str() ==
        "setting,noun_or_verb,top_k,recall,class_id,hits,totals\n"
        "Exo2Ego,verb,1,50.000000,all,1,2\n"
        "Exo2Ego,verb,1,100.000000,0,1,1\n"
        "Exo2Ego,verb,1,0.000000,2,0,1\n");
}

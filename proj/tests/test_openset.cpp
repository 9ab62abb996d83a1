#include <set>

#include "acorn/error.hpp"
#include "acorn/openset.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace acorn;

TEST_CASE("split of one class with three samples") {
  const std::vector<std::string> labels = {"a", "a", "a"};
  const auto s = split(labels, {{"a"}, {}, 2.0 / 3.0, 1});
  CHECK(s.train.size() == 2);
  CHECK(s.test_known.size() == 1);
  CHECK(s.test_unknown.empty());
}

TEST_CASE("split partitions, is seeded and respects roles") {
  std::vector<std::string> labels;
  for (int i = 0; i < 30; ++i) labels.push_back("k1");
  for (int i = 0; i < 12; ++i) labels.push_back("u");
  for (int i = 0; i < 9; ++i) labels.push_back("k2");
  labels.push_back("ignored");
  const SplitSpec spec{{"k1", "k2"}, {"u"}, 2.0 / 3.0, 5};
  const auto s = split(labels, spec);
  CHECK(s.train.size() == 20 + 6);
  CHECK(s.test_known.size() == 10 + 3);
  CHECK(s.test_unknown.size() == 12);
  std::set<std::size_t> all;
  for (auto* part : {&s.train, &s.test_known, &s.test_unknown}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    all.insert(part->begin(), part->end());
  }
  CHECK(all.size() == 51);
  for (auto i : s.train) CHECK(labels[i] != "u");
  for (auto i : s.test_unknown) CHECK(labels[i] == "u");
  CHECK(split(labels, spec).train == s.train);
  auto other = spec;
  other.seed = 6;
  CHECK(split(labels, other).train != s.train);
}

TEST_CASE("split errors") {
  const std::vector<std::string> labels = {"a", "a", "b"};
  auto kind = [&](SplitSpec spec) {
    try {
      split(labels, spec);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind({{"a"}, {"a"}, 0.5, 0}) == ErrorKind::LabelOverlap);
  CHECK(kind({{"a", "b"}, {}, 0.5, 0}) == ErrorKind::EmptyClass);
  CHECK(kind({{"c"}, {}, 0.5, 0}) == ErrorKind::EmptyClass);
  CHECK(kind({{"a"}, {}, 1.0, 0}) == ErrorKind::InvalidArgument);
}

TEST_CASE("summary matches the decision-log oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t classes = 1 + rng.below(4);
    std::vector<std::size_t> truth;
    std::vector<Decision> d;
    const std::size_t n = 1 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      truth.push_back(rng.bernoulli(0.3) ? kUnknownClass : rng.below(classes));
      d.push_back(rng.bernoulli(0.4) ? Decision::unknown() : Decision::accept(rng.below(classes)));
    }
    const auto r = summarize(truth, d, classes, 2.0);
    const auto m = oracle::metrics_from_log(truth, d);
    CHECK(r.known_accuracy.has_value() == m.accuracy.has_value());
    if (m.accuracy) CHECK(*r.known_accuracy == doctest::Approx(*m.accuracy).epsilon(1e-12));
    CHECK(r.unknown_recall.has_value() == m.recall.has_value());
    if (m.recall) {
      CHECK(*r.unknown_recall == doctest::Approx(*m.recall).epsilon(1e-12));
      CHECK(*r.unknown_precision == doctest::Approx(*m.precision).epsilon(1e-12));
      CHECK(std::abs(*r.unknown_f1 - *m.f1) < 1e-9);
    }
    std::size_t total = 0;
    for (const auto& row : r.confusion) {
      CHECK(row.size() == classes + 1);
      for (auto c : row) total += c;
    }
    CHECK(total == n);
    std::size_t diagonal = 0;
    for (std::size_t c = 0; c < classes; ++c) diagonal += r.confusion[c][c];
    if (r.n_known_test) CHECK(*r.known_accuracy == doctest::Approx(100.0 * diagonal / r.n_known_test));
  }
}

TEST_CASE("no unknown samples leaves unknown metrics empty") {
  const std::vector<std::size_t> truth = {0, 0, 1};
  const std::vector<Decision> d = {Decision::accept(0), Decision::accept(0), Decision::accept(1)};
  const auto r = summarize(truth, d, 2, 1.0);
  CHECK(*r.known_accuracy == 100.0);
  CHECK_FALSE(r.unknown_recall);
  CHECK_FALSE(r.unknown_f1);
  const std::vector<OpenSetReport> rs = {r};
  CHECK(reports_to_csv(rs) ==
        "alpha,known_acc,unk_recall,unk_precision,unk_f1,n_known_test,n_unknown_test,inference_seconds\n"
        "1.000000,100.000000,NA,NA,NA,3,0,0.000000\n");
}

TEST_CASE("rejecting a correct label counts against accuracy") {
  const std::vector<std::size_t> truth = {0, 1, kUnknownClass, kUnknownClass};
  const std::vector<Decision> d = {Decision::unknown(), Decision::accept(0), Decision::unknown(),
                                   Decision::accept(1)};
  const auto r = summarize(truth, d, 2, 1.0);
  CHECK(*r.known_accuracy == 0.0);
  CHECK(*r.unknown_recall == 50.0);
  CHECK(*r.unknown_precision == 50.0);
  CHECK(*r.unknown_f1 == 50.0);
}

TEST_CASE("best recall at an accuracy floor") {
  auto point = [](double acc, double rec) {
    CurvePoint p;
    p.method = "m";
    p.report.known_accuracy = acc;
    p.report.unknown_recall = rec;
    return p;
  };
  const std::vector<CurvePoint> pts = {point(99, 10), point(95, 60), point(90, 80)};
  CHECK(best_recall_at_accuracy(pts, 94)->report.unknown_recall == 60);
  CHECK(best_recall_at_accuracy(pts, 80)->report.unknown_recall == 80);
  CHECK_FALSE(best_recall_at_accuracy(pts, 99.5));
}

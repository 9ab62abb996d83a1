#include <cmath>

#include "acorn/error.hpp"
#include "acorn/svd_detect.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace acorn;

namespace {

double orthonormality_defect(const Matrix& v) {
  double worst = 0;
  for (std::size_t a = 0; a < v.cols(); ++a)
    for (std::size_t b = 0; b < v.cols(); ++b) {
      double s = 0;
      for (std::size_t i = 0; i < v.rows(); ++i) s += v(i, a) * v(i, b);
      worst = std::max(worst, std::abs(s - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

void check_against_oracle(const Matrix& x, double energy) {
  const auto det = fit_detector(x, energy);
  const auto ref = oracle::one_sided_jacobi(x);
  std::vector<double> squared;
  const double top = ref.singular[0] * ref.singular[0];
  for (double s : ref.singular) squared.push_back(s * s < 1e-12 * top ? 0.0 : s * s);
  const auto r = oracle::scan_energy_rank(squared, energy);
  REQUIRE(det.rank() == r);
  CHECK(orthonormality_defect(det.basis) < 1e-8);
  const auto p = oracle::projector(det.basis, det.rank());
  const auto q = oracle::projector(ref.v, r);
  CHECK(oracle::projector_distance(p, q) < 1e-6);
}

}  // namespace

TEST_CASE("symmetric eigen on a diagonal and a 2x2") {
  Matrix d(3, 3);
  d(0, 0) = 1;
  d(1, 1) = 5;
  d(2, 2) = 3;
  const auto e = symmetric_eigen(d);
  CHECK(e.values == std::vector<double>{5, 3, 1});
  Matrix s(2, 2);
  s(0, 0) = 2;
  s(0, 1) = s(1, 0) = 1;
  s(1, 1) = 2;
  const auto f = symmetric_eigen(s);
  CHECK(f.values[0] == doctest::Approx(3));
  CHECK(f.values[1] == doctest::Approx(1));
  CHECK(std::abs(std::abs(f.vectors(0, 0)) - std::sqrt(0.5)) < 1e-12);
}

TEST_CASE("rank-one matrix") {
  Matrix x(5, 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = 1.0 + static_cast<double>(j);
  auto d = calibrate(fit_detector(x), x);
  CHECK(d.rank() == 1);
  for (std::size_t i = 0; i < 5; ++i) CHECK(recon_error(d.basis, x.row(i)) < 1e-10);
  CHECK(d.mean_error < 1e-10);
  CHECK(d.std_error < 1e-10);
}

TEST_CASE("random matrices match the one-sided Jacobi oracle on both Gram routes") {
  Rng rng(17);
  check_against_oracle(oracle::random_matrix(rng, 50, 20), 0.999);
  check_against_oracle(oracle::random_matrix(rng, 8, 30), 0.999);
  check_against_oracle(oracle::random_matrix(rng, 30, 12), 0.9);
  // Low-rank plus zero columns.
  Matrix low(40, 25);
  const auto a = oracle::random_matrix(rng, 40, 3), b = oracle::random_matrix(rng, 3, 25);
  low = oracle::multiply(a, b);
  for (std::size_t i = 0; i < 40; ++i) low(i, 4) = low(i, 17) = 0.0;
  check_against_oracle(low, 0.999);
  CHECK(fit_detector(low).rank() <= 3);
}

TEST_CASE("energy rank is minimal") {
  const std::vector<double> s = {5, 3, 1, 1};
  CHECK(energy_rank(s, 0.4) == 1);
  CHECK(energy_rank(s, 0.5) == 2);
  CHECK(energy_rank(s, 0.8) == 3);
  CHECK(energy_rank(s, 0.79) == 2);
  CHECK(energy_rank(s, 0.999) == 4);
  CHECK(energy_rank(std::vector<double>{0, 0}, 0.9) == 0);
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(1 + rng.below(20));
    for (auto& x : v) x = rng.uniform();
    std::sort(v.rbegin(), v.rend());
    const double e = rng.uniform(0.1, 0.999);
    CHECK(energy_rank(v, e) == oracle::scan_energy_rank(v, e));
  }
}

TEST_CASE("reconstruction error identities") {
  Rng rng(8);
  auto x = oracle::random_matrix(rng, 12, 9);
  const auto d = fit_detector(x, 0.6);
  const auto p = oracle::projector(d.basis, d.rank());
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(9);
    for (auto& e : v) e = rng.uniform(-3, 3);
    const double err = recon_error(d.basis, v);
    CHECK(err <= oracle::norm(v) + 1e-9);
    CHECK(std::abs(err - oracle::projector_error(p, v)) < 1e-9);
  }
  std::vector<double> col(9);
  for (std::size_t i = 0; i < 9; ++i) col[i] = d.basis(i, 0);
  CHECK(recon_error(d.basis, col) < 1e-10);
  CHECK_THROWS_AS(recon_error(d.basis, std::vector<double>(3)), Error);
}

TEST_CASE("hand calibration on three samples") {
  // Basis e1 in R^2; errors are |second coordinate|: 1, 2, 4.
  ClassDetector d;
  d.basis = Matrix(2, 1);
  d.basis(0, 0) = 1;
  Matrix x(3, 2);
  x(0, 0) = 3;  x(0, 1) = 1;
  x(1, 0) = -1; x(1, 1) = -2;
  x(2, 0) = 0;  x(2, 1) = 4;
  const auto c = calibrate(d, x);
  CHECK(c.calibrated);
  CHECK(std::abs(c.mean_error - 7.0 / 3.0) < 1e-12);
  CHECK(std::abs(c.std_error - std::sqrt(14.0 / 9.0)) < 1e-12);
}

TEST_CASE("decide is strict and requires calibration") {
  ClassDetector d;
  d.basis = Matrix(2, 1);
  d.basis(0, 0) = 1;
  CHECK_THROWS_AS(decide(d, std::vector<double>{1, 0}, 0, 1.0), Error);
  d.mean_error = 1.0;
  d.std_error = 0.5;
  d.calibrated = true;
  CHECK(decide(d, std::vector<double>{9, 1.9}, 4, 2.0) == Decision::accept(4));
  CHECK(decide(d, std::vector<double>{9, 2.0}, 4, 2.0) == Decision::unknown());
  CHECK(decide_error(d, 2.0, 4, 2.0) == Decision::unknown());
  CHECK(decide(d, std::vector<double>{0, 0.5}, 1, 1.0).known);
  for (double a : kDefaultAlphaGrid) CHECK_FALSE(decide(d, std::vector<double>{0, 2.6}, 1, a).known);
  CHECK_THROWS_AS(decide(d, std::vector<double>{1, 0}, 0, 0.0), Error);
}

TEST_CASE("zero matrices are refused") {
  try {
    fit_detector(Matrix(3, 4));
    FAIL("expected ZeroMatrix");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroMatrix);
  }
}

TEST_CASE("naive detector on a single class equals the class detector") {
  Rng rng(4);
  const auto x = oracle::random_matrix(rng, 15, 6);
  const std::vector<std::size_t> y(15, 0);
  const auto bank = fit_detector_bank(x, y, 1);
  const auto naive = fit_naive_detector(x);
  const auto p = oracle::projector(bank.detectors[0].basis, bank.detectors[0].rank());
  const auto q = oracle::projector(naive.detector.basis, naive.detector.rank());
  CHECK(oracle::projector_distance(p, q) < 1e-8);
  CHECK(naive.detector.mean_error == doctest::Approx(bank.detectors[0].mean_error));
}

TEST_CASE("pooled subspace reconstructs two separated classes") {
  // Class 0 near e1, class 1 near e2; the naive detector spans both.
  Rng rng(6);
  Matrix x(40, 5);
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t c = i % 2;
    y.push_back(c);
    x(i, c) = 10 + rng.uniform();
    for (std::size_t j = 2; j < 5; ++j) x(i, j) = 0.01 * rng.uniform(-1, 1);
  }
  const auto bank = fit_detector_bank(x, y, 2, 0.99);
  const auto naive = fit_naive_detector(x, 0.99);
  std::vector<double> mix = {7, 7, 0, 0, 0};
  CHECK(decide_naive(naive, mix, 0, 3.0).known);
  CHECK_FALSE(bank.decide(mix, 0, 3.0).known);
  CHECK_FALSE(bank.decide(mix, 1, 3.0).known);
}

TEST_CASE("max-softmax rejection") {
  const std::vector<double> uniform(10, 0.1);
  CHECK_FALSE(naive_rejection(uniform, 0.5).known);
  const std::vector<double> onehot = {0, 0, 1};
  CHECK(naive_rejection(onehot, 0.999) == Decision::accept(2));
  CHECK_THROWS_AS(naive_rejection(onehot, 1.0), Error);
  CHECK_THROWS_AS(naive_rejection(onehot, 0.0), Error);
}

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "acorn/matrix.hpp"

namespace acorn {

struct EigenDecomposition {
  std::vector<double> values;  // decreasing
  Matrix vectors;              // column k pairs with values[k]
  std::size_t sweeps = 0;
};

// Cyclic Jacobi for a symmetric matrix. Converged when the off-diagonal
// Frobenius norm is at most tolerance * ||A||_F; throws EigenFailure after
// max_sweeps.
EigenDecomposition symmetric_eigen(const Matrix& a, double tolerance = 1e-12, std::size_t max_sweeps = 100);

inline constexpr double kDefaultEnergy = 0.999;
// Eigenvalues below this fraction of the largest count as zero.
inline constexpr double kEigenFloor = 1e-12;

// Smallest r with sum_{k<=r} s_k > energy * sum_k s_k, where s holds squared
// singular values in decreasing order (already floored). Returns 0 when the
// total is zero.
std::size_t energy_rank(std::span<const double> squared_singular_values, double energy);

// ||x - V (V^T x)||_2 without forming V V^T.
double recon_error(const Matrix& basis, std::span<const double> x);

struct Decision {
  bool known = false;
  std::size_t label = 0;  // meaningful only when known

  static Decision unknown() { return {}; }
  static Decision accept(std::size_t label) { return {true, label}; }
  bool operator==(const Decision&) const = default;
};

// Right-singular subspace of one class's training matrix plus its
// reconstruction-error statistics.
struct ClassDetector {
  std::size_t class_index = 0;
  Matrix basis;  // F x R, orthonormal columns
  double mean_error = 0.0;
  double std_error = 0.0;
  bool calibrated = false;

  std::size_t rank() const { return basis.cols(); }
  std::size_t dimension() const { return basis.rows(); }
  double threshold(double alpha) const { return mean_error + alpha * std_error; }

  bool operator==(const ClassDetector&) const = default;
};

// Rows of x are samples. Uses the Gram matrix of the smaller side after
// dropping all-zero columns. Throws ZeroMatrix / EigenFailure.
ClassDetector fit_detector(const Matrix& x, double energy = kDefaultEnergy, std::size_t class_index = 0);

// Population mean and standard deviation of the rows' reconstruction errors.
ClassDetector calibrate(ClassDetector detector, const Matrix& x);

// Known(predicted) iff error < mean + alpha * std (strict).
Decision decide(const ClassDetector& detector, std::span<const double> x, std::size_t predicted, double alpha);
// Same rule for an already computed reconstruction error.
Decision decide_error(const ClassDetector& detector, double error, std::size_t predicted, double alpha);

inline const std::vector<double> kDefaultAlphaGrid = {1.0, 1.5, 2.0, 2.5, 3.0};

struct DetectorBank {
  std::vector<ClassDetector> detectors;  // index = class
  double energy = kDefaultEnergy;
  std::vector<double> alpha_grid = kDefaultAlphaGrid;

  Decision decide(std::span<const double> x, std::size_t predicted, double alpha) const;
  bool operator==(const DetectorBank&) const = default;
};

// One fitted and calibrated detector per class in [0, classes).
DetectorBank fit_detector_bank(const Matrix& x, std::span<const std::size_t> labels, std::size_t classes,
                               double energy = kDefaultEnergy);

// Single subspace over all training samples regardless of class.
struct NaiveDetector {
  ClassDetector detector;

  bool operator==(const NaiveDetector&) const = default;
};

NaiveDetector fit_naive_detector(const Matrix& x, double energy = kDefaultEnergy);
Decision decide_naive(const NaiveDetector& naive, std::span<const double> x, std::size_t predicted, double alpha);

// Unknown iff the largest probability is below threshold, 0 < threshold < 1.
Decision naive_rejection(std::span<const double> probabilities, double threshold);

}  // namespace acorn

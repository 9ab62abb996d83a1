#include "acorn/svd_detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acorn/error.hpp"

namespace acorn {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

double frobenius(const Matrix& a) {
  double sum = 0.0;
  for (double v : a.data()) sum += v * v;
  return std::sqrt(sum);
}

// Modified Gram-Schmidt on the columns, applied twice.
void orthonormalize_columns(Matrix& v) {
  const std::size_t n = v.rows();
  const std::size_t r = v.cols();
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t j = 0; j < k; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += v(i, j) * v(i, k);
        for (std::size_t i = 0; i < n; ++i) v(i, k) -= dot * v(i, j);
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm += v(i, k) * v(i, k);
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < n; ++i) v(i, k) /= norm;
    }
  }
}

}  // namespace

EigenDecomposition symmetric_eigen(const Matrix& input, double tolerance, std::size_t max_sweeps) {
  if (input.rows() != input.cols()) throw Error(ErrorKind::ShapeMismatch, "eigensolver needs a square matrix");
  const std::size_t n = input.rows();
  Matrix a = input;
  // Rows of vt are the eigenvectors being accumulated.
  Matrix vt(n, n);
  for (std::size_t i = 0; i < n; ++i) vt(i, i) = 1.0;

  const double norm = frobenius(a);
  EigenDecomposition out;
  bool converged = norm == 0.0 || off_diagonal_norm(a) <= tolerance * norm;
  while (!converged) {
    if (out.sweeps == max_sweeps) {
      throw Error(ErrorKind::EigenFailure,
                  "Jacobi did not converge in " + std::to_string(max_sweeps) + " sweeps");
    }
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        auto row_p = a.row(p);
        auto row_q = a.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = row_p[k];
          const double akq = row_q[k];
          const double new_p = c * akp - s * akq;
          const double new_q = s * akp + c * akq;
          row_p[k] = new_p;
          row_q[k] = new_q;
          a(k, p) = new_p;
          a(k, q) = new_q;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double xp = vp[k];
          const double xq = vq[k];
          vp[k] = c * xp - s * xq;
          vq[k] = s * xp + c * xq;
        }
      }
    }
    converged = off_diagonal_norm(a) <= tolerance * norm;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    const auto v = vt.row(order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v[i];
  }
  return out;
}

std::size_t energy_rank(std::span<const double> s, double energy) {
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  if (total <= 0.0) return 0;
  double running = 0.0;
  for (std::size_t r = 0; r < s.size(); ++r) {
    running += s[r];
    if (running > energy * total) return r + 1;
  }
  // Only reachable through rounding when energy is ~1; keep every component.
  return s.size();
}

double recon_error(const Matrix& basis, std::span<const double> x) {
  if (x.size() != basis.rows()) throw Error(ErrorKind::ShapeMismatch, "vector length differs from detector dimension");
  const std::size_t f = basis.rows();
  const std::size_t r = basis.cols();
  std::vector<double> coeff(r, 0.0);
  for (std::size_t i = 0; i < f; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const auto row = basis.row(i);
    for (std::size_t k = 0; k < r; ++k) coeff[k] += row[k] * xi;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < f; ++i) {
    const auto row = basis.row(i);
    double projected = 0.0;
    for (std::size_t k = 0; k < r; ++k) projected += row[k] * coeff[k];
    const double d = x[i] - projected;
    sum += d * d;
  }
  return std::sqrt(sum);
}

ClassDetector fit_detector(const Matrix& x, double energy, std::size_t class_index) {
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorKind::ZeroMatrix, "detector needs at least one sample");
  if (!(energy > 0.0 && energy <= 1.0)) throw Error(ErrorKind::InvalidArgument, "energy must be in (0, 1]");

  const std::size_t n = x.rows();
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (x(i, j) != 0.0) {
        active.push_back(j);
        break;
      }
    }
  }
  if (active.empty()) throw Error(ErrorKind::ZeroMatrix, "training matrix is all zero");
  const std::size_t fa = active.size();

  Matrix compact(n, fa);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < fa; ++j) compact(i, j) = x(i, active[j]);

  // Feature-side Gram X^T X when it is the smaller one, else sample-side X X^T.
  const bool feature_side = fa <= n;
  const std::size_t g = feature_side ? fa : n;
  Matrix gram(g, g);
  if (feature_side) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = compact.row(i);
      for (std::size_t p = 0; p < fa; ++p) {
        const double rp = row[p];
        if (rp == 0.0) continue;
        auto out = gram.row(p);
        for (std::size_t q = p; q < fa; ++q) out[q] += rp * row[q];
      }
    }
  } else {
    for (std::size_t p = 0; p < n; ++p) {
      const auto rp = compact.row(p);
      for (std::size_t q = p; q < n; ++q) {
        const auto rq = compact.row(q);
        double dot = 0.0;
        for (std::size_t j = 0; j < fa; ++j) dot += rp[j] * rq[j];
        gram(p, q) = dot;
      }
    }
  }
  for (std::size_t p = 0; p < g; ++p)
    for (std::size_t q = p + 1; q < g; ++q) gram(q, p) = gram(p, q);

  const auto eig = symmetric_eigen(gram);
  std::vector<double> squared = eig.values;
  const double largest = std::max(squared.empty() ? 0.0 : squared.front(), 0.0);
  for (auto& s : squared) {
    if (s < kEigenFloor * largest) s = 0.0;
  }
  const std::size_t rank = energy_rank(squared, energy);
  if (rank == 0) throw Error(ErrorKind::ZeroMatrix, "training matrix has no energy");

  ClassDetector det;
  det.class_index = class_index;
  det.basis = Matrix(x.cols(), rank);
  if (feature_side) {
    for (std::size_t j = 0; j < fa; ++j)
      for (std::size_t k = 0; k < rank; ++k) det.basis(active[j], k) = eig.vectors(j, k);
  } else {
    // v_k = X^T u_k / sigma_k
    for (std::size_t k = 0; k < rank; ++k) {
      const double sigma = std::sqrt(squared[k]);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = eig.vectors(i, k) / sigma;
        if (u == 0.0) continue;
        const auto row = compact.row(i);
        for (std::size_t j = 0; j < fa; ++j) det.basis(active[j], k) += u * row[j];
      }
    }
    orthonormalize_columns(det.basis);
  }
  return det;
}

ClassDetector calibrate(ClassDetector detector, const Matrix& x) {
  if (x.rows() == 0) throw Error(ErrorKind::TooFewSamples, "calibration needs at least one sample");
  std::vector<double> errors(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) errors[i] = recon_error(detector.basis, x.row(i));
  const double n = static_cast<double>(errors.size());
  const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  detector.mean_error = mean;
  detector.std_error = std::sqrt(var / n);
  detector.calibrated = true;
  return detector;
}

Decision decide_error(const ClassDetector& detector, double error, std::size_t predicted, double alpha) {
  if (!detector.calibrated) throw Error(ErrorKind::UncalibratedDetector, "detector has no error statistics");
  if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be positive");
  return error < detector.threshold(alpha) ? Decision::accept(predicted) : Decision::unknown();
}

Decision decide(const ClassDetector& detector, std::span<const double> x, std::size_t predicted, double alpha) {
  if (!detector.calibrated) throw Error(ErrorKind::UncalibratedDetector, "detector has no error statistics");
  return decide_error(detector, recon_error(detector.basis, x), predicted, alpha);
}

Decision DetectorBank::decide(std::span<const double> x, std::size_t predicted, double alpha) const {
  if (predicted >= detectors.size()) throw Error(ErrorKind::ShapeMismatch, "no detector for predicted class");
  return acorn::decide(detectors[predicted], x, predicted, alpha);
}

DetectorBank fit_detector_bank(const Matrix& x, std::span<const std::size_t> labels, std::size_t classes,
                               double energy) {
  if (labels.size() != x.rows()) throw Error(ErrorKind::ShapeMismatch, "one label per row required");
  std::vector<std::vector<std::size_t>> rows(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw Error(ErrorKind::ShapeMismatch, "label out of range");
    rows[labels[i]].push_back(i);
  }
  DetectorBank bank;
  bank.energy = energy;
  for (std::size_t w = 0; w < classes; ++w) {
    if (rows[w].empty()) throw Error(ErrorKind::EmptyClass, "class " + std::to_string(w) + " has no training rows");
    Matrix xw(rows[w].size(), x.cols());
    for (std::size_t i = 0; i < rows[w].size(); ++i) {
      const auto src = x.row(rows[w][i]);
      std::copy(src.begin(), src.end(), xw.row(i).begin());
    }
    bank.detectors.push_back(calibrate(fit_detector(xw, energy, w), xw));
  }
  return bank;
}

NaiveDetector fit_naive_detector(const Matrix& x, double energy) {
  return {calibrate(fit_detector(x, energy, 0), x)};
}

Decision decide_naive(const NaiveDetector& naive, std::span<const double> x, std::size_t predicted, double alpha) {
  return decide(naive.detector, x, predicted, alpha);
}

Decision naive_rejection(std::span<const double> probabilities, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::InvalidArgument, "threshold must be in (0, 1)");
  if (probabilities.empty()) throw Error(ErrorKind::ShapeMismatch, "empty probability vector");
  const auto top = std::max_element(probabilities.begin(), probabilities.end());
  if (*top < threshold) return Decision::unknown();
  return Decision::accept(static_cast<std::size_t>(top - probabilities.begin()));
}

}  // namespace acorn

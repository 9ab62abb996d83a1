#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acorn/features.hpp"
#include "acorn/matrix.hpp"
#include "acorn/mlp.hpp"
#include "acorn/svd_detect.hpp"

namespace acorn {

// Class code used for "unknown" in truth vectors and confusion tables.
inline constexpr std::size_t kUnknownClass = std::numeric_limits<std::size_t>::max();

struct SplitSpec {
  std::vector<std::string> known;
  std::vector<std::string> unknown;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 0;
};

// Indices into the sample list, each ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test_known;
  std::vector<std::size_t> test_unknown;
};

// Per known class, a seeded shuffle picks round(fraction * n) samples
// (clamped to [1, n-1]) for training. Every sample of an unknown label goes
// to test_unknown; labels in neither list are ignored.
Split split(std::span<const std::string> sample_labels, const SplitSpec& spec);

// Per-sample quantities that do not depend on alpha or a threshold.
struct ScoredSample {
  std::size_t predicted = 0;
  double max_probability = 0.0;
  double error = 0.0;        // under the predicted class's detector
  double naive_error = 0.0;  // under the pooled detector, when one is given
};

// Standardize, predict, and measure reconstruction errors for every row of
// raw (unstandardized) features.
std::vector<ScoredSample> score_samples(const Matrix& raw, const Standardizer& standardizer,
                                        const MlpModel& model, const DetectorBank& bank,
                                        const NaiveDetector* naive = nullptr);

std::vector<Decision> acorn_decisions(std::span<const ScoredSample> scores, const DetectorBank& bank, double alpha);
std::vector<Decision> naive_svd_decisions(std::span<const ScoredSample> scores, const NaiveDetector& naive,
                                          double alpha);
std::vector<Decision> softmax_decisions(std::span<const ScoredSample> scores, double threshold);

struct OpenSetReport {
  double alpha = 0.0;  // or the threshold, for threshold-swept baselines
  std::optional<double> known_accuracy;
  std::optional<double> unknown_recall;
  std::optional<double> unknown_precision;
  std::optional<double> unknown_f1;
  std::size_t n_known_test = 0;
  std::size_t n_unknown_test = 0;
  // (classes + 1) x (classes + 1); the last row/column is the unknown class.
  std::vector<std::vector<std::size_t>> confusion;
  double inference_seconds = 0.0;
};

// truth[i] is a class index or kUnknownClass. A known sample counts as
// correct only when accepted with its true label. Unknown is the positive
// class for recall/precision/F1; those are empty when no unknown samples
// exist.
OpenSetReport summarize(std::span<const std::size_t> truth, std::span<const Decision> decisions,
                        std::size_t classes, double alpha);

std::string reports_to_csv(std::span<const OpenSetReport> reports);
std::string reports_to_json(std::span<const OpenSetReport> reports, std::span<const std::string> class_labels);

struct CurvePoint {
  std::string method;
  double parameter = 0.0;
  OpenSetReport report;
};
std::string curve_to_csv(std::span<const CurvePoint> points);

// Highest unknown recall among points whose known accuracy is at least
// accuracy_floor; nullopt when no point qualifies.
std::optional<CurvePoint> best_recall_at_accuracy(std::span<const CurvePoint> points, double accuracy_floor);

}  // namespace acorn

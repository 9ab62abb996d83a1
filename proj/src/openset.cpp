#include "acorn/openset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "acorn/error.hpp"
#include "acorn/rng.hpp"
#include "json.hpp"

namespace acorn {

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(format_number(*v)) : nlohmann::json(nullptr);
}

}  // namespace

Split split(std::span<const std::string> sample_labels, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train fraction must be in (0, 1)");
  }
  for (const auto& k : spec.known) {
    if (std::find(spec.unknown.begin(), spec.unknown.end(), k) != spec.unknown.end()) {
      throw Error(ErrorKind::LabelOverlap, "label '" + k + "' is both known and unknown");
    }
  }
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < sample_labels.size(); ++i) by_label[sample_labels[i]].push_back(i);

  Split out;
  Rng rng(spec.seed);
  for (const auto& label : spec.known) {
    auto it = by_label.find(label);
    if (it == by_label.end() || it->second.size() < 2) {
      throw Error(ErrorKind::EmptyClass, "known class '" + label + "' needs at least 2 subsequences");
    }
    auto indices = it->second;
    rng.shuffle(std::span<std::size_t>(indices));
    const auto n = indices.size();
    auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    out.train.insert(out.train.end(), indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_known.insert(out.test_known.end(), indices.begin() + static_cast<std::ptrdiff_t>(n_train),
                          indices.end());
  }
  for (const auto& label : spec.unknown) {
    if (auto it = by_label.find(label); it != by_label.end()) {
      out.test_unknown.insert(out.test_unknown.end(), it->second.begin(), it->second.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test_known.begin(), out.test_known.end());
  std::sort(out.test_unknown.begin(), out.test_unknown.end());
  return out;
}

std::vector<ScoredSample> score_samples(const Matrix& raw, const Standardizer& standardizer,
                                        const MlpModel& model, const DetectorBank& bank,
                                        const NaiveDetector* naive) {
  if (raw.cols() != model.input_dim() || raw.cols() != standardizer.dimension()) {
    throw Error(ErrorKind::LayoutMismatch, "feature width does not match the model");
  }
  if (bank.detectors.size() != model.classes()) {
    throw Error(ErrorKind::ShapeMismatch, "detector bank does not cover every class");
  }
  std::vector<ScoredSample> out(raw.rows());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto z = standardizer.apply(raw.row(i));
    const auto p = predict(model, z);
    auto& s = out[i];
    s.predicted = p.label;
    s.max_probability = p.probabilities[p.label];
    s.error = recon_error(bank.detectors[p.label].basis, z);
    if (naive != nullptr) s.naive_error = recon_error(naive->detector.basis, z);
  }
  return out;
}

std::vector<Decision> acorn_decisions(std::span<const ScoredSample> scores, const DetectorBank& bank, double alpha) {
  std::vector<Decision> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(decide_error(bank.detectors.at(s.predicted), s.error, s.predicted, alpha));
  return out;
}

std::vector<Decision> naive_svd_decisions(std::span<const ScoredSample> scores, const NaiveDetector& naive,
                                          double alpha) {
  std::vector<Decision> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(decide_error(naive.detector, s.naive_error, s.predicted, alpha));
  return out;
}

std::vector<Decision> softmax_decisions(std::span<const ScoredSample> scores, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::InvalidArgument, "threshold must be in (0, 1)");
  std::vector<Decision> out;
  out.reserve(scores.size());
  for (const auto& s : scores) {
    out.push_back(s.max_probability < threshold ? Decision::unknown() : Decision::accept(s.predicted));
  }
  return out;
}

OpenSetReport summarize(std::span<const std::size_t> truth, std::span<const Decision> decisions,
                        std::size_t classes, double alpha) {
  if (truth.size() != decisions.size()) throw Error(ErrorKind::ShapeMismatch, "one decision per sample required");
  OpenSetReport r;
  r.alpha = alpha;
  r.confusion.assign(classes + 1, std::vector<std::size_t>(classes + 1, 0));
  std::size_t correct_known = 0, tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool truly_unknown = truth[i] == kUnknownClass;
    if (!truly_unknown && truth[i] >= classes) throw Error(ErrorKind::ShapeMismatch, "truth label out of range");
    const auto& d = decisions[i];
    if (d.known && d.label >= classes) throw Error(ErrorKind::ShapeMismatch, "decision label out of range");
    const std::size_t row = truly_unknown ? classes : truth[i];
    const std::size_t col = d.known ? d.label : classes;
    ++r.confusion[row][col];
    if (truly_unknown) {
      ++r.n_unknown_test;
      if (d.known) ++fn;
      else ++tp;
    } else {
      ++r.n_known_test;
      if (d.known && d.label == truth[i]) ++correct_known;
      if (!d.known) ++fp;
    }
  }
  if (r.n_known_test > 0) {
    r.known_accuracy = 100.0 * static_cast<double>(correct_known) / static_cast<double>(r.n_known_test);
  }
  if (r.n_unknown_test > 0) {
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    r.unknown_recall = 100.0 * recall;
    r.unknown_precision = 100.0 * precision;
    r.unknown_f1 = 100.0 * f1;
  }
  return r;
}

std::string reports_to_csv(std::span<const OpenSetReport> reports) {
  std::string out =
      "alpha,known_acc,unk_recall,unk_precision,unk_f1,n_known_test,n_unknown_test,inference_seconds\n";
  for (const auto& r : reports) {
    out += format_number(r.alpha) + ',' + format_optional(r.known_accuracy) + ',' +
           format_optional(r.unknown_recall) + ',' + format_optional(r.unknown_precision) + ',' +
           format_optional(r.unknown_f1) + ',' + std::to_string(r.n_known_test) + ',' +
           std::to_string(r.n_unknown_test) + ',' + format_number(r.inference_seconds) + '\n';
  }
  return out;
}

std::string reports_to_json(std::span<const OpenSetReport> reports, std::span<const std::string> class_labels) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json e;
    e["alpha"] = format_number(r.alpha);
    e["known_acc"] = optional_json(r.known_accuracy);
    e["unk_recall"] = optional_json(r.unknown_recall);
    e["unk_precision"] = optional_json(r.unknown_precision);
    e["unk_f1"] = optional_json(r.unknown_f1);
    e["n_known_test"] = r.n_known_test;
    e["n_unknown_test"] = r.n_unknown_test;
    e["inference_seconds"] = format_number(r.inference_seconds);
    std::vector<std::string> labels(class_labels.begin(), class_labels.end());
    labels.push_back("UNKNOWN");
    e["confusion_labels"] = labels;
    e["confusion"] = r.confusion;
    j.push_back(e);
  }
  return j.dump(2) + "\n";
}

std::string curve_to_csv(std::span<const CurvePoint> points) {
  std::string out = "method,parameter,known_acc,unk_recall,unk_precision,unk_f1\n";
  for (const auto& p : points) {
    out += p.method + ',' + format_number(p.parameter) + ',' + format_optional(p.report.known_accuracy) + ',' +
           format_optional(p.report.unknown_recall) + ',' + format_optional(p.report.unknown_precision) + ',' +
           format_optional(p.report.unknown_f1) + '\n';
  }
  return out;
}

std::optional<CurvePoint> best_recall_at_accuracy(std::span<const CurvePoint> points, double accuracy_floor) {
  std::optional<CurvePoint> best;
  for (const auto& p : points) {
    if (!p.report.known_accuracy || !p.report.unknown_recall) continue;
    if (*p.report.known_accuracy < accuracy_floor) continue;
    if (!best || *p.report.unknown_recall > *best->report.unknown_recall) best = p;
  }
  return best;
}

}  // namespace acorn

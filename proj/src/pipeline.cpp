#include "acorn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "acorn/error.hpp"

namespace acorn {

std::vector<std::string> SubsequencePool::labels() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(s.label);
  return out;
}

void SubsequencePool::add(const WorkloadSequence& seq, std::size_t subseq_len) {
  reports.push_back(ingest_report(seq, subseq_len));
  auto parts = partition(seq, subseq_len);
  std::move(parts.begin(), parts.end(), std::back_inserter(items));
}

SubsequencePool load_subsequences(const std::vector<std::filesystem::path>& traces, const DramGeometry& geometry,
                                  std::size_t subseq_len) {
  SubsequencePool pool;
  for (const auto& path : traces) pool.add(read_trace_file(path, geometry), subseq_len);
  return pool;
}

SplitSpec make_split_spec(const std::vector<std::string>& known, const std::vector<std::string>& unknown,
                          const PipelineConfig& config) {
  return SplitSpec{known, unknown, config.train_fraction, config.seed};
}

NgramVocabulary build_training_vocab(const SubsequencePool& pool, const Split& split,
                                     const std::vector<std::string>& known, const PipelineConfig& config) {
  std::map<std::string, std::size_t> class_of;
  for (std::size_t w = 0; w < known.size(); ++w) class_of.emplace(known[w], w);
  std::vector<std::vector<CommandLine>> lines(known.size());
  for (auto i : split.train) {
    const auto it = class_of.find(pool.items[i].label);
    if (it == class_of.end()) continue;
    lines[it->second].push_back(command_line(pool.items[i]));
  }
  return build_vocab(lines, config.n_values, config.top_m);
}

FeatureSet featurize_pool(const SubsequencePool& pool, const std::vector<std::size_t>& indices,
                          const FeatureLayout& layout) {
  FeatureSet set;
  set.layout_hash = layout.hash();
  set.features = Matrix(indices.size(), layout.dimension());
  std::map<std::string, std::uint32_t> table;
  for (std::size_t row = 0; row < indices.size(); ++row) {
    const auto& s = pool.items.at(indices[row]);
    auto [it, inserted] = table.emplace(s.label, static_cast<std::uint32_t>(set.label_table.size()));
    if (inserted) set.label_table.push_back(s.label);
    set.labels.push_back(it->second);
    set.source_block.push_back(s.source_block);
    const auto x = featurize(s, layout);
    std::copy(x.begin(), x.end(), set.features.row(row).begin());
  }
  return set;
}

std::vector<std::size_t> class_indices(const FeatureSet& set, const std::vector<std::string>& classes) {
  std::vector<std::size_t> out;
  out.reserve(set.labels.size());
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    const auto& label = set.label_of(i);
    const auto it = std::find(classes.begin(), classes.end(), label);
    out.push_back(it == classes.end() ? kUnknownClass : static_cast<std::size_t>(it - classes.begin()));
  }
  return out;
}

Bundle train_bundle(const FeatureSet& train, const FeatureLayout& layout, const PipelineConfig& config,
                    std::vector<double>* epoch_loss) {
  if (train.layout_hash != layout.hash()) {
    throw Error(ErrorKind::LayoutMismatch, "training features do not match the vocabulary/geometry layout");
  }
  if (train.features.rows() < 2) throw Error(ErrorKind::TooFewSamples, "need at least 2 training rows");
  std::vector<std::string> classes;
  for (auto l : train.labels) {
    const auto& name = train.label_table[l];
    if (std::find(classes.begin(), classes.end(), name) == classes.end()) classes.push_back(name);
  }
  const auto y = class_indices(train, classes);

  Bundle b;
  b.layout = layout;
  b.subseq_len = config.subseq_len;
  b.train_config = config.train;
  b.standardizer = Standardizer::fit(train.features, config.standardize);
  const Matrix z = b.standardizer.apply(train.features);
  auto result = acorn::train(z, y, classes, config.train);
  if (epoch_loss != nullptr) *epoch_loss = result.epoch_loss;
  b.model = std::move(result.model);
  return b;
}

void fit_bundle_detectors(Bundle& bundle, const FeatureSet& train, double energy,
                          const std::vector<double>& alpha_grid) {
  if (!bundle.model) throw Error(ErrorKind::InvalidArgument, "bundle has no trained classifier");
  bundle.require_layout(train.layout_hash);
  const auto y = class_indices(train, bundle.model->labels);
  if (std::find(y.begin(), y.end(), kUnknownClass) != y.end()) {
    throw Error(ErrorKind::LabelOverlap, "training features contain a label the classifier does not know");
  }
  const Matrix z = bundle.standardizer.apply(train.features);
  bundle.detectors = fit_detector_bank(z, y, bundle.model->classes(), energy);
  bundle.detectors->alpha_grid = alpha_grid;
  bundle.naive = fit_naive_detector(z, energy);
}

std::vector<double> naive_alpha_sweep() {
  std::vector<double> out;
  for (int i = 1; i <= 200; ++i) out.push_back(0.05 * i);
  return out;
}

std::vector<double> softmax_threshold_sweep() {
  std::vector<double> out;
  for (int i = 1; i <= 99; ++i) out.push_back(0.01 * i);
  for (int k = 3; k <= 12; ++k) out.push_back(1.0 - std::pow(10.0, -k));
  return out;
}

Evaluation evaluate_bundle(const Bundle& bundle, const FeatureSet& test, const std::vector<double>& alpha_grid,
                           bool record_timing) {
  if (!bundle.model || !bundle.detectors) {
    throw Error(ErrorKind::UncalibratedDetector, "bundle lacks a classifier or detectors");
  }
  bundle.require_layout(test.layout_hash);
  const auto classes = bundle.model->classes();

  Evaluation ev;
  ev.truth = class_indices(test, bundle.model->labels);
  const auto start = std::chrono::steady_clock::now();
  ev.scores = score_samples(test.features, bundle.standardizer, *bundle.model, *bundle.detectors,
                            bundle.naive ? &*bundle.naive : nullptr);
  const auto stop = std::chrono::steady_clock::now();
  ev.scoring_seconds = record_timing ? std::chrono::duration<double>(stop - start).count() : 0.0;

  for (double alpha : alpha_grid) {
    auto report = summarize(ev.truth, acorn_decisions(ev.scores, *bundle.detectors, alpha), classes, alpha);
    report.inference_seconds = ev.scoring_seconds;
    ev.reports.push_back(report);
    ev.curve.push_back({"acorn", alpha, report});
  }
  if (bundle.naive) {
    for (double alpha : naive_alpha_sweep()) {
      ev.curve.push_back(
          {"naive_svd", alpha, summarize(ev.truth, naive_svd_decisions(ev.scores, *bundle.naive, alpha), classes, alpha)});
    }
  }
  for (double t : softmax_threshold_sweep()) {
    ev.curve.push_back({"max_softmax", t, summarize(ev.truth, softmax_decisions(ev.scores, t), classes, t)});
  }
  return ev;
}

std::vector<TracePrediction> predict_trace(const Bundle& bundle, const WorkloadSequence& seq, double alpha) {
  if (!bundle.model || !bundle.detectors) {
    throw Error(ErrorKind::UncalibratedDetector, "bundle lacks a classifier or detectors");
  }
  const auto parts = partition(seq, bundle.subseq_len);
  if (parts.empty()) {
    throw Error(ErrorKind::NoCompleteSubsequence,
                "no complete subsequence: trace has " + std::to_string(seq.length()) + " records, need " +
                    std::to_string(bundle.subseq_len));
  }
  std::vector<TracePrediction> out;
  for (const auto& s : parts) {
    const auto z = bundle.standardizer.apply(featurize(s, bundle.layout));
    const auto p = predict(*bundle.model, z);
    const auto& det = bundle.detectors->detectors.at(p.label);
    TracePrediction tp;
    tp.source_block = s.source_block;
    tp.error = recon_error(det.basis, z);
    tp.threshold = det.threshold(alpha);
    const auto d = decide_error(det, tp.error, p.label, alpha);
    tp.known = d.known;
    tp.label = d.known ? bundle.model->labels[d.label] : "UNKNOWN";
    out.push_back(tp);
  }
  return out;
}

BenchmarkConfig desk_benchmark_config(std::uint64_t seed) {
  BenchmarkConfig c;
  c.pipeline.subseq_len = 10000;
  c.pipeline.seed = seed;
  c.pipeline.train.seed = seed;
  c.pipeline.train.learning_rate = 1e-3;
  c.pipeline.train.batch_size = 32;
  c.pipeline.train.epochs = 20;
  c.pipeline.standardize = false;
  c.subsequences_per_class = 200;
  return c;
}

BenchmarkResult run_benchmark(const std::vector<WorkloadProfile>& profiles, const BenchmarkConfig& config) {
  const auto& pc = config.pipeline;
  BenchmarkResult r;
  SubsequencePool pool;
  for (const auto& p : profiles) {
    (p.unknown ? r.unknown : r.known).push_back(p.name);
    pool.add(generate_workload(p, config.subsequences_per_class * pc.subseq_len, pc.geometry), pc.subseq_len);
  }
  const auto labels = pool.labels();
  const auto parts = split(labels, make_split_spec(r.known, r.unknown, pc));

  FeatureLayout layout{build_training_vocab(pool, parts, r.known, pc), pc.geometry};
  r.train = featurize_pool(pool, parts.train, layout);
  std::vector<std::size_t> test_rows = parts.test_known;
  test_rows.insert(test_rows.end(), parts.test_unknown.begin(), parts.test_unknown.end());
  r.test = featurize_pool(pool, test_rows, layout);

  r.bundle = train_bundle(r.train, layout, pc, &r.epoch_loss);
  fit_bundle_detectors(r.bundle, r.train, pc.energy, pc.alpha_grid);
  r.evaluation = evaluate_bundle(r.bundle, r.test, pc.alpha_grid, config.record_timing);
  return r;
}

}  // namespace acorn

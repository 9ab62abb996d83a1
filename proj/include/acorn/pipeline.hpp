#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acorn/bundle.hpp"
#include "acorn/features.hpp"
#include "acorn/openset.hpp"
#include "acorn/synthgen.hpp"
#include "acorn/trace.hpp"

namespace acorn {

struct PipelineConfig {
  DramGeometry geometry;
  std::size_t subseq_len = 100000;
  std::uint64_t seed = 0;
  double train_fraction = 2.0 / 3.0;
  bool standardize = true;
  std::vector<std::size_t> n_values = kDefaultNgramSizes;
  std::size_t top_m = kDefaultTopM;
  TrainConfig train;
  double energy = kDefaultEnergy;
  std::vector<double> alpha_grid = kDefaultAlphaGrid;
};

// Subsequences of several workloads, in input order.
struct SubsequencePool {
  std::vector<Subsequence> items;
  std::vector<IngestReport> reports;  // one per workload

  std::vector<std::string> labels() const;
  void add(const WorkloadSequence& seq, std::size_t subseq_len);
};

SubsequencePool load_subsequences(const std::vector<std::filesystem::path>& traces, const DramGeometry& geometry,
                                  std::size_t subseq_len);

SplitSpec make_split_spec(const std::vector<std::string>& known, const std::vector<std::string>& unknown,
                          const PipelineConfig& config);

// Vocabulary from the training subsequences only, classes in `known` order.
NgramVocabulary build_training_vocab(const SubsequencePool& pool, const Split& split,
                                     const std::vector<std::string>& known, const PipelineConfig& config);

FeatureSet featurize_pool(const SubsequencePool& pool, const std::vector<std::size_t>& indices,
                          const FeatureLayout& layout);

// Maps each row's label to its class index among `classes`, or kUnknownClass.
std::vector<std::size_t> class_indices(const FeatureSet& set, const std::vector<std::string>& classes);

// Fits the standardizer on the training rows and trains the classifier.
// Class order is the order labels first appear in train.label_table.
Bundle train_bundle(const FeatureSet& train, const FeatureLayout& layout, const PipelineConfig& config,
                    std::vector<double>* epoch_loss = nullptr);

// Adds the per-class detector bank and the pooled naive detector.
void fit_bundle_detectors(Bundle& bundle, const FeatureSet& train, double energy,
                          const std::vector<double>& alpha_grid = kDefaultAlphaGrid);

struct Evaluation {
  std::vector<std::size_t> truth;
  std::vector<ScoredSample> scores;
  std::vector<OpenSetReport> reports;  // per alpha in the grid
  std::vector<CurvePoint> curve;       // ACORN grid, naive SVD and max-softmax sweeps
  double scoring_seconds = 0.0;
};

// Alpha grids used for the trade-off curve of the baselines.
std::vector<double> naive_alpha_sweep();
std::vector<double> softmax_threshold_sweep();

// inference_seconds is zero unless record_timing is set.
Evaluation evaluate_bundle(const Bundle& bundle, const FeatureSet& test, const std::vector<double>& alpha_grid,
                           bool record_timing = true);

struct TracePrediction {
  std::size_t source_block = 0;
  bool known = false;
  std::string label;  // "UNKNOWN" when rejected
  double error = 0.0;
  double threshold = 0.0;
};

// Throws NoCompleteSubsequence when the trace is shorter than subseq_len.
std::vector<TracePrediction> predict_trace(const Bundle& bundle, const WorkloadSequence& seq, double alpha);

struct BenchmarkConfig {
  PipelineConfig pipeline;
  std::size_t subsequences_per_class = 200;
  bool record_timing = true;
};

struct BenchmarkResult {
  std::vector<std::string> known;
  std::vector<std::string> unknown;
  Bundle bundle;
  FeatureSet train;
  FeatureSet test;
  std::vector<double> epoch_loss;
  Evaluation evaluation;
};

// In-memory run: generate, split, vocabulary, featurize, train, fit, evaluate.
BenchmarkResult run_benchmark(const std::vector<WorkloadProfile>& profiles, const BenchmarkConfig& config);

// Desk-scale defaults for benchmark-v1: subsequence length 10,000 and a
// classifier schedule long enough for a few hundred training samples.
BenchmarkConfig desk_benchmark_config(std::uint64_t seed = 7);

}  // namespace acorn

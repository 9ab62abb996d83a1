#include "acorn/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "acorn/error.hpp"
#include "acorn/pipeline.hpp"

namespace acorn {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string geometry;
  std::size_t subseq_len = 100000;
  std::uint64_t seed = 0;
  bool no_standardize = false;
  double alpha = 3.0;

  PipelineConfig pipeline() const {
    PipelineConfig c;
    c.geometry = geometry.empty() ? DramGeometry{} : DramGeometry::parse(geometry);
    c.subseq_len = subseq_len;
    c.seed = seed;
    c.train.seed = seed;
    c.standardize = !no_standardize;
    return c;
  }
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::istringstream conv(item);
    T v{};
    if (!(conv >> v) || !conv.eof()) {
      throw Error(ErrorKind::InvalidArgument, std::string("bad value '") + item + "' in " + what);
    }
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, std::string("empty list for ") + what);
  return out;
}

std::vector<std::string> labels_of(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(label_from_path(p));
  return out;
}

std::vector<fs::path> as_paths(const std::vector<std::string>& a, const std::vector<std::string>& b = {}) {
  std::vector<fs::path> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

void print_reports(std::ostream& out, const std::vector<OpenSetReport>& reports) {
  out << "alpha  known_acc  unk_recall  unk_precision  unk_f1\n";
  for (const auto& r : reports) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-5.2f  %9s  %10s  %13s  %6s\n", r.alpha, fmt(r.known_accuracy).c_str(),
                  fmt(r.unknown_recall).c_str(), fmt(r.unknown_precision).c_str(), fmt(r.unknown_f1).c_str());
    out << buf;
  }
}

void print_baselines(std::ostream& out, const Evaluation& ev) {
  if (ev.reports.empty() || !ev.reports.back().known_accuracy) return;
  const auto& ref = ev.reports.back();
  const double floor = *ref.known_accuracy - 1.0;
  out << "baselines at known accuracy >= " << fmt(floor) << " (alpha " << fmt(ref.alpha) << " reference):\n";
  for (const char* method : {"naive_svd", "max_softmax"}) {
    std::vector<CurvePoint> points;
    for (const auto& p : ev.curve)
      if (p.method == method) points.push_back(p);
    const auto best = best_recall_at_accuracy(points, floor);
    out << "  " << method << ": ";
    if (best) {
      out << "recall " << fmt(best->report.unknown_recall) << " at acc " << fmt(best->report.known_accuracy)
          << " (parameter " << best->parameter << ")\n";
    } else {
      out << "no operating point reaches that accuracy\n";
    }
  }
}

void write_evaluation(const Evaluation& ev, const std::vector<std::string>& classes, const std::string& csv,
                      const std::string& json, const std::string& curve) {
  if (!csv.empty()) write_text(csv, reports_to_csv(ev.reports));
  if (!json.empty()) write_text(json, reports_to_json(ev.reports, classes));
  if (!curve.empty()) write_text(curve, curve_to_csv(ev.curve));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-set recognition of DRAM workload traces"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--geometry", g.geometry, "DRAM geometry, e.g. ranks=2,bank_groups=4,banks=4,rows=131072,cols=1024,block_rows=16384,block_cols=8");
  app.add_option("--subseq-len", g.subseq_len, "subsequence length")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "seed for splits, initialization and shuffling");
  app.add_flag("--no-standardize", g.no_standardize, "feed raw counts to the classifier and detectors");
  app.add_option("--alpha", g.alpha, "threshold multiplier for predict")->check(CLI::PositiveNumber);

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  // gen
  auto* gen = sub("gen", "write synthetic trace CSVs from a preset or profile catalog");
  std::string preset, catalog, out_dir;
  std::size_t length = 0, per_class = 200;
  bool gzip = false;
  auto* preset_opt = gen->add_option("--preset", preset, "named preset (benchmark-v1)");
  gen->add_option("--catalog", catalog, "profile catalog JSON")->excludes(preset_opt);
  gen->add_option("--length", length, "records per workload (default subsequences * subseq-len)");
  gen->add_option("--subsequences", per_class, "complete subsequences per workload")->check(CLI::PositiveNumber);
  gen->add_option("--out-dir", out_dir, "output directory")->required();
  gen->add_flag("--gzip", gzip, "write .csv.gz");

  // vocab
  auto* vocab = sub("vocab", "build the n-gram vocabulary from the training split of known traces");
  std::vector<std::string> known, unknown;
  double fraction = 2.0 / 3.0;
  std::size_t top_m = kDefaultTopM;
  std::string n_values = "7,11,15", vocab_path, out_path;
  vocab->add_option("--known", known, "known workload traces")->required();
  vocab->add_option("--train-fraction", fraction, "fraction of each known workload used for training");
  vocab->add_option("--m", top_m, "top-m n-grams per class and n")->check(CLI::PositiveNumber);
  vocab->add_option("--n-values", n_values, "comma-separated n-gram sizes");
  vocab->add_option("-o,--output", out_path, "vocabulary file")->required();

  // ingest
  auto* ingest = sub("ingest", "parse, partition, split and featurize traces");
  ingest->add_option("--vocab", vocab_path, "vocabulary file")->required();
  ingest->add_option("--known", known, "known workload traces")->required();
  ingest->add_option("--unknown", unknown, "unknown workload traces");
  ingest->add_option("--train-fraction", fraction, "fraction of each known workload used for training");
  ingest->add_option("--out-dir", out_dir, "writes train.feat and test.feat here")->required();

  // train
  auto* train_cmd = sub("train", "fit the standardizer and the classifier; writes a bundle");
  std::string features_path, bundle_path;
  TrainConfig tc;
  train_cmd->add_option("--features", features_path, "training feature file")->required();
  train_cmd->add_option("--vocab", vocab_path, "vocabulary file")->required();
  train_cmd->add_option("--lr", tc.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tc.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", tc.epochs, "epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", tc.hidden, "hidden width")->check(CLI::PositiveNumber);
  train_cmd->add_option("-o,--output", out_path, "bundle file")->required();

  // fit-detectors
  auto* fit = sub("fit-detectors", "fit per-class and pooled SVD detectors into a bundle");
  double energy = kDefaultEnergy;
  fit->add_option("--bundle", bundle_path, "bundle with a trained classifier")->required();
  fit->add_option("--features", features_path, "training feature file")->required();
  fit->add_option("--energy", energy, "retained squared singular value fraction")->check(CLI::Range(0.0, 1.0));
  fit->add_option("-o,--output", out_path, "output bundle (default: overwrite --bundle)");

  // evaluate
  auto* evaluate = sub("evaluate", "open-set evaluation over an alpha grid");
  std::string alpha_grid = "1,1.5,2,2.5,3", report_csv, report_json, curve_csv;
  bool no_timing = false;
  evaluate->add_option("--bundle", bundle_path, "fitted bundle")->required();
  evaluate->add_option("--features", features_path, "test feature file")->required();
  evaluate->add_option("--alpha-grid", alpha_grid, "comma-separated alpha values");
  evaluate->add_option("--report-csv", report_csv, "per-alpha report CSV");
  evaluate->add_option("--report-json", report_json, "per-alpha report JSON");
  evaluate->add_option("--curve-csv", curve_csv, "trade-off curve CSV (ACORN grid and baselines)");
  evaluate->add_flag("--no-timing", no_timing, "write inference_seconds as 0 for reproducible reports");

  // predict
  auto* predict_cmd = sub("predict", "label each subsequence of a trace, or UNKNOWN");
  std::string trace_path;
  predict_cmd->add_option("--bundle", bundle_path, "fitted bundle")->required();
  predict_cmd->add_option("--trace", trace_path, "trace CSV")->required();

  // benchmark
  auto* bench = sub("benchmark", "run the synthetic benchmark end to end in memory");
  bench->add_option("--preset", preset, "named preset")->default_val("benchmark-v1");
  bench->add_option("--subsequences", per_class, "subsequences per workload")->check(CLI::PositiveNumber);
  bench->add_option("--out-dir", out_dir, "writes bundle.acorn, report.csv, report.json, curve.csv");
  bench->add_flag("--no-timing", no_timing, "write inference_seconds as 0");
  bool bench_standardize = false;
  bench->add_flag("--standardize", bench_standardize, "standardize features (off by default for the benchmark)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    const PipelineConfig pc = g.pipeline();

    if (gen->parsed()) {
      if (preset.empty() == catalog.empty()) throw Error(ErrorKind::InvalidArgument, "give exactly one of --preset or --catalog");
      const auto profiles = preset.empty() ? load_catalog(catalog) : preset_catalog(preset, pc.geometry);
      const std::size_t n = length > 0 ? length : per_class * pc.subseq_len;
      fs::create_directories(out_dir);
      save_catalog(fs::path(out_dir) / "catalog.json", profiles);
      for (const auto& p : profiles) {
        const auto path = fs::path(out_dir) / (p.name + (gzip ? ".csv.gz" : ".csv"));
        write_trace_file(path, generate_workload(p, n, pc.geometry));
        out << (p.unknown ? "unknown " : "known   ") << path.string() << "\n";
      }
      return 0;
    }

    if (vocab->parsed()) {
      PipelineConfig c = pc;
      c.train_fraction = fraction;
      c.top_m = top_m;
      c.n_values = parse_list<std::size_t>(n_values, "--n-values");
      const auto pool = load_subsequences(as_paths(known), c.geometry, c.subseq_len);
      const auto names = labels_of(known);
      const auto parts = split(pool.labels(), make_split_spec(names, {}, c));
      const auto v = build_training_vocab(pool, parts, names, c);
      v.save(out_path);
      for (std::size_t k = 0; k < v.n_values().size(); ++k) {
        out << "|A_" << v.n_values()[k] << "| = " << v.set_size(k) << "\n";
      }
      return 0;
    }

    if (ingest->parsed()) {
      PipelineConfig c = pc;
      c.train_fraction = fraction;
      const FeatureLayout layout{NgramVocabulary::load(vocab_path), c.geometry};
      const auto pool = load_subsequences(as_paths(known, unknown), c.geometry, c.subseq_len);
      const auto all = as_paths(known, unknown);
      for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& r = pool.reports[i];
        out << label_from_path(all[i]) << ": " << r.records << " records, " << r.subsequences
            << " subsequences, " << r.dropped_records << " dropped\n";
      }
      const auto parts = split(pool.labels(), make_split_spec(labels_of(known), labels_of(unknown), c));
      std::vector<std::size_t> test_rows = parts.test_known;
      test_rows.insert(test_rows.end(), parts.test_unknown.begin(), parts.test_unknown.end());
      fs::create_directories(out_dir);
      save_features(fs::path(out_dir) / "train.feat", featurize_pool(pool, parts.train, layout));
      save_features(fs::path(out_dir) / "test.feat", featurize_pool(pool, test_rows, layout));
      out << "train " << parts.train.size() << ", test known " << parts.test_known.size() << ", test unknown "
          << parts.test_unknown.size() << "\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      PipelineConfig c = pc;
      tc.seed = c.seed;
      c.train = tc;
      const FeatureLayout layout{NgramVocabulary::load(vocab_path), c.geometry};
      const auto train_set = load_features(features_path);
      std::vector<double> losses;
      const auto b = train_bundle(train_set, layout, c, &losses);
      save_bundle(out_path, b);
      for (std::size_t e = 0; e < losses.size(); ++e) out << "epoch " << e + 1 << " loss " << losses[e] << "\n";
      return 0;
    }

    if (fit->parsed()) {
      auto b = load_bundle(bundle_path);
      fit_bundle_detectors(b, load_features(features_path), energy);
      save_bundle(out_path.empty() ? bundle_path : out_path, b);
      for (const auto& d : b.detectors->detectors) {
        out << b.model->labels[d.class_index] << ": rank " << d.rank() << ", mu " << d.mean_error << ", sigma "
            << d.std_error << "\n";
      }
      out << "naive: rank " << b.naive->detector.rank() << "\n";
      return 0;
    }

    if (evaluate->parsed()) {
      const auto b = load_bundle(bundle_path);
      const auto grid = parse_list<double>(alpha_grid, "--alpha-grid");
      const auto ev = evaluate_bundle(b, load_features(features_path), grid, !no_timing);
      print_reports(out, ev.reports);
      print_baselines(out, ev);
      write_evaluation(ev, b.model->labels, report_csv, report_json, curve_csv);
      return 0;
    }

    if (predict_cmd->parsed()) {
      const auto b = load_bundle(bundle_path);
      const auto seq = read_trace_file(trace_path, b.layout.geometry);
      for (const auto& p : predict_trace(b, seq, g.alpha)) {
        out << p.source_block << ',' << p.label << ',' << p.error << ',' << p.threshold << "\n";
      }
      return 0;
    }

    if (bench->parsed()) {
      auto config = desk_benchmark_config(g.seed);
      config.pipeline.geometry = pc.geometry;
      config.pipeline.standardize = bench_standardize && pc.standardize;
      if (app.get_option("--subseq-len")->count() > 0) config.pipeline.subseq_len = g.subseq_len;
      config.subsequences_per_class = per_class;
      config.record_timing = !no_timing;
      const auto r = run_benchmark(preset_catalog(preset, config.pipeline.geometry), config);
      out << "train " << r.train.features.rows() << " rows, test " << r.test.features.rows() << " rows, F = "
          << r.bundle.layout.dimension() << "\n";
      print_reports(out, r.evaluation.reports);
      print_baselines(out, r.evaluation);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        save_bundle(fs::path(out_dir) / "bundle.acorn", r.bundle);
        write_evaluation(r.evaluation, r.bundle.model->labels, (fs::path(out_dir) / "report.csv").string(),
                         (fs::path(out_dir) / "report.json").string(), (fs::path(out_dir) / "curve.csv").string());
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::InvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace acorn

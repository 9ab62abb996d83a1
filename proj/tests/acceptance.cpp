// Acceptance checks. One PASS/FAIL/SKIP line per criterion; exit status is
// non-zero when any gating criterion (1-8) fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include "acorn/bundle.hpp"
#include "acorn/features.hpp"
#include "acorn/mlp.hpp"
#include "acorn/pipeline.hpp"
#include "acorn/svd_detect.hpp"
#include "acorn/synthgen.hpp"
#include "oracles.hpp"

using namespace acorn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  enum { Pass, Fail, Skip } status = Pass;
  std::string detail;
};

Outcome fail(std::string why) { return {Outcome::Fail, std::move(why)}; }

char buf[512];

template <typename... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

Outcome ngram_oracle() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::size_t lines = 0;
  for (int i = 0; i < 100; ++i) {
    const auto line = oracle::random_line(rng, rng.below(2001), 1 + rng.below(5));
    ++lines;
    for (std::size_t n : {2, 3, 7, 11, 15}) {
      const auto got = count_ngrams(line, n);
      const auto want = oracle::brute_ngrams(line, n);
      if (got.size() != want.size()) return fail(fmt("line %d n=%zu: %zu distinct vs %zu", i, n, got.size(), want.size()));
      for (const auto& [gram, count] : want) {
        const auto it = got.find(encode_ngram(gram));
        if (it == got.end() || it->second != count) return fail(fmt("line %d n=%zu: count mismatch", i, n));
      }
    }
  }
  const double s = seconds_since(t0);
  if (s >= 10.0) return fail(fmt("%.2f s exceeds 10 s", s));
  return {Outcome::Pass, fmt("%zu lines x 5 n-values exact, %.2f s", lines, s)};
}

WorkloadProfile random_profile(Rng& rng, std::size_t i) {
  WorkloadProfile p;
  p.name = "r" + std::to_string(i);
  p.motif.push_back({Command::ACT, 1, 1});
  const auto steps = 1 + rng.below(3);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto lo = static_cast<std::uint32_t>(1 + rng.below(4));
    p.motif.push_back({rng.bernoulli(0.5) ? Command::RDA : Command::WRA, lo, lo + static_cast<std::uint32_t>(rng.below(3))});
  }
  p.motif.push_back({rng.bernoulli(0.8) ? Command::PRE : Command::PREA, 1, 1});
  p.motif_noise = rng.uniform(0, 0.5);
  p.spatial_mode = static_cast<SpatialMode>(rng.below(4));
  p.stride = static_cast<std::uint32_t>(1 + rng.below(50));
  p.hot_blocks = {static_cast<std::uint32_t>(rng.below(1024)), static_cast<std::uint32_t>(rng.below(1024))};
  if (rng.bernoulli(0.5)) {
    p.bank_affinity.resize(32);
    for (auto& w : p.bank_affinity) w = rng.uniform(0, 2);
  }
  p.rng_seed = rng.next_u64();
  return p;
}

Outcome feature_mass() {
  Rng rng(99);
  const DramGeometry g;
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t ls = 200 + rng.below(3000);
    WorkloadSequence seq;
    if (i % 10 == 9) {
      // Unconstrained records, so orphans and double activations occur.
      for (std::size_t k = 0; k < ls; ++k) {
        TraceRecord r{static_cast<Command>(rng.below(5)), static_cast<std::uint16_t>(rng.below(2)),
                      static_cast<std::uint16_t>(rng.below(4)), static_cast<std::uint16_t>(rng.below(4)), 0};
        if (r.cmd == Command::ACT) r.address = static_cast<std::uint32_t>(rng.below(g.rows_per_bank));
        if (is_access(r.cmd)) r.address = static_cast<std::uint32_t>(rng.below(g.cols_per_bank));
        seq.records.push_back(r);
      }
    } else {
      seq = generate_workload(random_profile(rng, i), ls + rng.below(ls), g);
    }
    const auto subs = partition(seq, ls);
    if (subs.empty()) return fail(fmt("sample %zu produced no subsequence", i));
    const auto& sub = subs[rng.below(subs.size())];
    double banks = 0;
    for (double v : bank_vector(sub.records, g)) banks += v;
    const auto addr = address_vector(sub.records, g);
    double blocks = 0;
    for (double v : addr.blocks) blocks += v;
    std::size_t accesses = 0;
    for (const auto& r : sub.records) accesses += is_access(r.cmd);
    if (banks != static_cast<double>(ls)) return fail(fmt("sample %zu: bank mass %.0f != %zu", i, banks, ls));
    if (blocks + static_cast<double>(addr.orphans) != static_cast<double>(accesses)) {
      return fail(fmt("sample %zu: %.0f + %zu orphans != %zu accesses", i, blocks, addr.orphans, accesses));
    }
  }
  return {Outcome::Pass, "1000 subsequences, both identities exact"};
}

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

Outcome svd_correctness() {
  const auto t0 = Clock::now();
  Rng rng(7);
  double worst_orth = 0, worst_proj = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t rows = 2 + rng.below(99), cols = 2 + rng.below(49);
    Matrix x = oracle::random_matrix(rng, rows, cols);
    if (i % 5 == 4) {
      const std::size_t k = 1 + rng.below(4);
      x = oracle::multiply(oracle::random_matrix(rng, rows, k), oracle::random_matrix(rng, k, cols));
    }
    const double energy = i % 3 == 0 ? kDefaultEnergy : rng.uniform(0.5, 0.99);
    const auto det = fit_detector(x, energy);
    const auto ref = oracle::one_sided_jacobi(x);
    std::vector<double> squared;
    const double top = ref.singular[0] * ref.singular[0];
    for (double s : ref.singular) squared.push_back(s * s < kEigenFloor * top ? 0.0 : s * s);
    const auto r = oracle::scan_energy_rank(squared, energy);
    if (det.rank() != r) return fail(fmt("matrix %d (%zux%zu): rank %zu, exhaustive scan %zu", i, rows, cols, det.rank(), r));
    worst_orth = std::max(worst_orth, orthonormality_defect(det.basis));
    worst_proj = std::max(worst_proj, oracle::projector_distance(oracle::projector(det.basis, r), oracle::projector(ref.v, r)));
  }
  const double s = seconds_since(t0);
  if (worst_orth > 1e-8) return fail(fmt("orthonormality defect %.3g", worst_orth));
  if (worst_proj > 1e-6) return fail(fmt("projector distance %.3g", worst_proj));
  if (s >= 30.0) return fail(fmt("%.2f s exceeds 30 s", s));
  return {Outcome::Pass, fmt("50 matrices, max |VtV-I| %.2g, max projector gap %.2g, %.2f s", worst_orth, worst_proj, s)};
}

Outcome recon_identities() {
  Rng rng(5);
  double worst_span = 0, worst_orth = 0;
  std::size_t probes = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t f = 5 + rng.below(40);
    const auto det = fit_detector(oracle::random_matrix(rng, 2 + rng.below(f - 2), f), 0.95);
    const auto& v = det.basis;
    for (std::size_t c = 0; c < v.cols(); ++c) {
      std::vector<double> x(f, 0.0);
      for (std::size_t k = 0; k < v.cols(); ++k) {
        const double w = rng.uniform(-5, 5);
        for (std::size_t i = 0; i < f; ++i) x[i] += w * v(i, k);
      }
      worst_span = std::max(worst_span, recon_error(v, x));
    }
    if (v.cols() < f) {
      for (int k = 0; k < 10; ++k) {
        std::vector<double> x(f);
        for (auto& e : x) e = rng.uniform(-5, 5);
        for (std::size_t c = 0; c < v.cols(); ++c) {  // project out twice
          for (int pass = 0; pass < 2; ++pass) {
            double d = 0;
            for (std::size_t i = 0; i < f; ++i) d += v(i, c) * x[i];
            for (std::size_t i = 0; i < f; ++i) x[i] -= d * v(i, c);
          }
        }
        worst_orth = std::max(worst_orth, std::abs(recon_error(v, x) - oracle::norm(x)));
      }
    }
    for (int k = 0; k < 50; ++k) {
      std::vector<double> x(f);
      for (auto& e : x) e = rng.uniform(-100, 100);
      ++probes;
      if (recon_error(v, x) > oracle::norm(x) + 1e-9) return fail("contraction violated");
    }
  }
  if (worst_span >= 1e-10) return fail(fmt("in-span error %.3g", worst_span));
  if (worst_orth >= 1e-10) return fail(fmt("orthogonal error gap %.3g", worst_orth));
  return {Outcome::Pass, fmt("in-span max %.2g, orthogonal gap max %.2g, %zu contraction probes", worst_span, worst_orth, probes)};
}

Outcome gradient_check() {
  Rng rng(31);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t f = 2 + rng.below(6), h = 2 + rng.below(6), w = 2 + rng.below(4), n = 1 + rng.below(8);
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < w; ++c) labels.push_back(std::to_string(c));
    auto model = MlpModel::glorot(f, h, labels, rng.next_u64());
    for (auto& b : model.params.b1) b = rng.uniform(-0.5, 0.5);
    for (auto& b : model.params.b2) b = rng.uniform(-0.5, 0.5);
    const auto x = oracle::random_matrix(rng, n, f);
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < n; ++i) y.push_back(rng.below(w));
    const auto g = loss_and_gradient(model, x, y).gradient;
    auto probe = [&](std::span<double> p, std::span<const double> a) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i], step = 1e-4;
        p[i] = keep + step;
        const double up = loss_and_gradient(model, x, y).loss;
        p[i] = keep - step;
        const double down = loss_and_gradient(model, x, y).loss;
        p[i] = keep;
        const double num = (up - down) / (2 * step);
        worst = std::max(worst, std::abs(num - a[i]) / std::max({std::abs(num), std::abs(a[i]), 1e-6}));
      }
    };
    probe(model.params.w1.data(), g.w1.data());
    probe(model.params.b1, g.b1);
    probe(model.params.w2.data(), g.w2.data());
    probe(model.params.b2, g.b2);
  }
  if (worst >= 1e-3) return fail(fmt("max relative error %.3g", worst));
  return {Outcome::Pass, fmt("20 instances, max relative error %.2g", worst)};
}

Outcome alpha_monotonicity(const BenchmarkResult& run) {
  const auto& bank = *run.bundle.detectors;
  std::vector<Decision> prev;
  std::optional<double> acc, rec;
  std::string trail;
  for (double a : kDefaultAlphaGrid) {
    const auto d = acorn_decisions(run.evaluation.scores, bank, a);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (prev[i].known && !d[i].known) return fail(fmt("sample %zu flips Known->Unknown at alpha %.1f", i, a));
    }
    const auto r = summarize(run.evaluation.truth, d, bank.detectors.size(), a);
    if (acc && *r.known_accuracy < *acc) return fail(fmt("accuracy drops at alpha %.1f", a));
    if (rec && *r.unknown_recall > *rec) return fail(fmt("recall rises at alpha %.1f", a));
    acc = r.known_accuracy;
    rec = r.unknown_recall;
    prev = d;
    trail += fmt("%s%.1f:%.1f/%.1f", trail.empty() ? "" : " ", a, *acc, *rec);
  }
  return {Outcome::Pass, "alpha:acc/recall " + trail};
}

Outcome end_to_end(const BenchmarkResult& run, const BenchmarkConfig& cfg, double seconds) {
  if (cfg.subsequences_per_class < 200 || cfg.pipeline.subseq_len != 10000) return fail("benchmark under-sized");
  if (run.known.size() != 6 || run.unknown.size() != 2) return fail("preset is not 6 known + 2 unknown");
  const auto& ev = run.evaluation;
  const OpenSetReport* at3 = nullptr;
  for (const auto& r : ev.reports)
    if (r.alpha == 3.0) at3 = &r;
  if (at3 == nullptr) return fail("no alpha = 3 report");
  const double acc = *at3->known_accuracy, f1 = *at3->unknown_f1, recall = *at3->unknown_recall;
  std::string detail = fmt("alpha 3: acc %.2f, F1 %.2f, recall %.2f", acc, f1, recall);
  bool ok = acc >= 90.0 && f1 >= 80.0;
  for (const char* method : {"naive_svd", "max_softmax"}) {
    std::vector<CurvePoint> pts;
    for (const auto& p : ev.curve)
      if (p.method == method) pts.push_back(p);
    const auto best = best_recall_at_accuracy(pts, acc - 1.0);
    if (!best) {
      detail += fmt("; %s never reaches acc %.2f", method, acc - 1.0);
      continue;
    }
    const double br = *best->report.unknown_recall;
    detail += fmt("; %s best recall %.2f at acc %.2f", method, br, *best->report.known_accuracy);
    ok = ok && recall > br;
  }
  detail += fmt("; %.1f s", seconds);
  ok = ok && seconds < 600.0;
  return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

Outcome determinism(const BenchmarkResult& first, const BenchmarkConfig& cfg) {
  const auto second = run_benchmark(preset_catalog("benchmark-v1", cfg.pipeline.geometry), cfg);
  const auto b1 = encode_bundle(first.bundle), b2 = encode_bundle(second.bundle);
  if (b1 != b2) return fail("bundles differ between identical runs");
  const std::vector<std::string>& labels = first.bundle.model->labels;
  if (reports_to_csv(first.evaluation.reports) != reports_to_csv(second.evaluation.reports) ||
      reports_to_json(first.evaluation.reports, labels) != reports_to_json(second.evaluation.reports, labels) ||
      curve_to_csv(first.evaluation.curve) != curve_to_csv(second.evaluation.curve)) {
    return fail("reports differ between identical runs");
  }
  const auto dir = fs::temp_directory_path() / "acorn_acceptance";
  fs::create_directories(dir);
  save_bundle(dir / "bundle.acorn", first.bundle);
  save_features(dir / "test.feat", first.test);
  const auto loaded = load_bundle(dir / "bundle.acorn");
  const auto test = load_features(dir / "test.feat");
  const auto again = evaluate_bundle(loaded, test, kDefaultAlphaGrid, false);
  const auto& s1 = first.evaluation.scores;
  const auto& s2 = again.scores;
  if (s1.size() != s2.size()) return fail("sample count changed after reload");
  std::size_t decisions = 0;
  for (double a : kDefaultAlphaGrid) {
    const auto d1 = acorn_decisions(s1, *first.bundle.detectors, a), d2 = acorn_decisions(s2, *loaded.detectors, a);
    const auto n1 = naive_svd_decisions(s1, *first.bundle.naive, a), n2 = naive_svd_decisions(s2, *loaded.naive, a);
    if (d1 != d2 || n1 != n2) return fail(fmt("decisions differ after reload at alpha %.1f", a));
    decisions += d1.size() + n1.size();
  }
  for (std::size_t i = 0; i < s1.size(); ++i) {
    if (s1[i].error != s2[i].error || s1[i].max_probability != s2[i].max_probability) {
      return fail(fmt("scores differ after reload at sample %zu", i));
    }
  }
  fs::remove_all(dir);
  return {Outcome::Pass, fmt("bundle %zu bytes identical across runs; %zu decisions preserved by save/load", b1.size(), decisions)};
}

std::vector<fs::path> traces_in(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.ends_with(".csv") || name.ends_with(".csv.gz")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome external_dataset() {
  const char* root = std::getenv("ACORN_MEMTEST86_DIR");
  if (root == nullptr) return {Outcome::Skip, "dataset not present (set ACORN_MEMTEST86_DIR)"};
  const auto known = traces_in(fs::path(root) / "known"), unknown = traces_in(fs::path(root) / "unknown");
  if (known.empty()) return {Outcome::Skip, "expected known/ and unknown/ directories of trace CSVs"};
  PipelineConfig c;
  c.seed = 7;
  auto all = known;
  all.insert(all.end(), unknown.begin(), unknown.end());
  const auto pool = load_subsequences(all, c.geometry, c.subseq_len);
  std::vector<std::string> kn, un;
  for (const auto& p : known) kn.push_back(label_from_path(p));
  for (const auto& p : unknown) un.push_back(label_from_path(p));
  const auto parts = split(pool.labels(), make_split_spec(kn, un, c));
  const FeatureLayout layout{build_training_vocab(pool, parts, kn, c), c.geometry};
  const auto train = featurize_pool(pool, parts.train, layout);
  auto test_rows = parts.test_known;
  test_rows.insert(test_rows.end(), parts.test_unknown.begin(), parts.test_unknown.end());
  const auto test = featurize_pool(pool, test_rows, layout);
  auto bundle = train_bundle(train, layout, c);
  fit_bundle_detectors(bundle, train, c.energy);
  const auto ev = evaluate_bundle(bundle, test, kDefaultAlphaGrid);
  std::string detail;
  for (const auto& r : ev.reports) {
    detail += fmt("alpha %.1f: acc %.2f recall %.2f precision %.2f F1 %.2f; ", r.alpha, r.known_accuracy.value_or(NAN),
                  r.unknown_recall.value_or(NAN), r.unknown_precision.value_or(NAN), r.unknown_f1.value_or(NAN));
  }
  return {Outcome::Pass, detail};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, bool gating, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Fail ? "FAIL" : "SKIP";
    if (o.status == Outcome::Fail && gating) ++failures;
    std::printf("%s criterion %d%s: %s (%s)\n", tag, id, gating ? "" : " [non-gating]", name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "n-gram oracle equivalence", true, ngram_oracle);
  report(2, "feature mass conservation", true, feature_mass);
  report(3, "SVD correctness", true, svd_correctness);
  report(4, "reconstruction-error identities", true, recon_identities);
  report(5, "MLP gradient check", true, gradient_check);

  auto cfg = desk_benchmark_config(7);
  cfg.record_timing = false;
  std::optional<BenchmarkResult> run;
  double seconds = 0;
  std::string setup_error;
  try {
    const auto t0 = Clock::now();
    run = run_benchmark(preset_catalog("benchmark-v1", cfg.pipeline.geometry), cfg);
    seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto with_run = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!run) return fail("benchmark did not run: " + setup_error);
      return fn();
    };
  };
  report(6, "alpha monotonicity", true, with_run([&] { return alpha_monotonicity(*run); }));
  report(7, "end-to-end desk-scale benchmark", true, with_run([&] { return end_to_end(*run, cfg, seconds); }));
  report(8, "determinism and persistence", true, with_run([&] { return determinism(*run, cfg); }));
  report(9, "external dataset run", false, external_dataset);

  std::printf("%s: %d gating criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}

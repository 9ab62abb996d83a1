#pragma once

#include <filesystem>
#include <string>

#include "acorn/pipeline.hpp"

namespace fixture {

// Small but complete benchmark run, shared by several test files.
inline acorn::BenchmarkConfig small_config(std::uint64_t seed = 7) {
  auto c = acorn::desk_benchmark_config(seed);
  c.pipeline.subseq_len = 2000;
  c.subsequences_per_class = 24;
  c.record_timing = false;
  return c;
}

inline const acorn::BenchmarkResult& small_run() {
  static const auto r = acorn::run_benchmark(acorn::preset_catalog("benchmark-v1"), small_config());
  return r;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("acorn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture

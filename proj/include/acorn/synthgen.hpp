#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "acorn/trace.hpp"

namespace acorn {

// One step of a command motif. Steps repeat a uniformly drawn number of times
// in [min_repeat, max_repeat] per emission.
struct MotifStep {
  Command cmd = Command::ACT;
  std::uint32_t min_repeat = 1;
  std::uint32_t max_repeat = 1;

  bool operator==(const MotifStep&) const = default;
};

enum class SpatialMode { SequentialSweep, Strided, HotBlock, UniformRandom };

std::string_view spatial_mode_name(SpatialMode mode);
SpatialMode parse_spatial_mode(std::string_view name);

// A synthetic workload. Each emission picks one bank and plays the motif on
// it; the motif must leave that bank precharged.
struct WorkloadProfile {
  std::string name;
  std::vector<MotifStep> motif;
  double motif_noise = 0.0;
  SpatialMode spatial_mode = SpatialMode::SequentialSweep;
  std::uint32_t stride = 1;                 // Strided
  std::vector<std::uint32_t> hot_blocks{};  // HotBlock: block indices (row-block major)
  double heat = 0.9;                        // HotBlock: probability of landing in a hot block
  std::vector<double> bank_affinity{};      // per linear bank index; empty means uniform
  std::uint64_t rng_seed = 0;
  bool unknown = false;                     // role in a benchmark catalog

  // Blend: when non-empty the trace alternates between these component
  // profiles in runs of about phase_length records (uniform in [L/2, 3L/2]).
  // Motif, spatial and bank fields of the blend itself are then unused.
  std::vector<WorkloadProfile> phases{};
  std::uint32_t phase_length = 0;

  bool operator==(const WorkloadProfile&) const = default;
};

// Throws InvalidProfile on an illegal motif, bad weights or parameters.
void validate_profile(const WorkloadProfile& profile, const DramGeometry& geometry);

// Deterministic in (profile, length, geometry); the result always passes
// check_protocol.
WorkloadSequence generate_workload(const WorkloadProfile& profile, std::size_t length,
                                   const DramGeometry& geometry = {});

struct ProtocolViolation {
  std::size_t index = 0;  // record position
  std::string reason;
};

struct ProtocolReport {
  std::vector<ProtocolViolation> violations;
  bool ok() const { return violations.empty(); }
};

// ACT on a bank with an open row, or RDA/WRA on a bank without one, is a
// violation. PRE closes the bank; PREA closes every bank of its rank.
ProtocolReport check_protocol(const WorkloadSequence& seq, const DramGeometry& geometry = {});

// Named presets. "benchmark-v1" holds six known and two unknown profiles.
std::vector<WorkloadProfile> preset_catalog(std::string_view name, const DramGeometry& geometry = {});

// Catalog file: JSON object {"profiles": [...]}, one object per profile.
std::vector<WorkloadProfile> load_catalog(const std::filesystem::path& path);
void save_catalog(const std::filesystem::path& path, const std::vector<WorkloadProfile>& profiles);
std::string catalog_to_json(const std::vector<WorkloadProfile>& profiles);
std::vector<WorkloadProfile> catalog_from_json(std::string_view text);

}  // namespace acorn

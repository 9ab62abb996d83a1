#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acorn/features.hpp"
#include "acorn/matrix.hpp"
#include "acorn/mlp.hpp"
#include "acorn/svd_detect.hpp"

namespace acorn {

// Container layout shared by bundles and feature files:
//   8-byte magic | u32 version | u64 manifest length | JSON manifest |
//   little-endian f64 arrays (shapes and offsets in the manifest) |
//   u32 CRC-32 of every preceding byte.
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::uint32_t kFeatureFileVersion = 1;

// Raw feature rows with their labels, tagged with the layout they were
// computed under.
struct FeatureSet {
  std::uint64_t layout_hash = 0;
  std::vector<std::string> label_table;
  std::vector<std::uint32_t> labels;       // index into label_table, one per row
  std::vector<std::uint64_t> source_block;  // subsequence index within its trace
  Matrix features;

  const std::string& label_of(std::size_t row) const { return label_table[labels[row]]; }
  bool operator==(const FeatureSet&) const = default;
};

std::vector<std::uint8_t> encode_features(const FeatureSet& set);
FeatureSet decode_features(std::span<const std::uint8_t> bytes);
void save_features(const std::filesystem::path& path, const FeatureSet& set);
FeatureSet load_features(const std::filesystem::path& path);

// Everything needed to turn a trace into an open-set decision.
struct Bundle {
  FeatureLayout layout;
  Standardizer standardizer;
  std::size_t subseq_len = 100000;
  TrainConfig train_config;
  std::optional<MlpModel> model;
  std::optional<DetectorBank> detectors;
  std::optional<NaiveDetector> naive;

  std::uint64_t layout_hash() const { return layout.hash(); }
  // Throws LayoutMismatch when features were computed under another layout.
  void require_layout(std::uint64_t feature_hash) const;
};

std::vector<std::uint8_t> encode_bundle(const Bundle& bundle);
Bundle decode_bundle(std::span<const std::uint8_t> bytes);
void save_bundle(const std::filesystem::path& path, const Bundle& bundle);
Bundle load_bundle(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::string hash_to_hex(std::uint64_t hash);

}  // namespace acorn

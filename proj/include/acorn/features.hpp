#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "acorn/matrix.hpp"
#include "acorn/trace.hpp"

namespace acorn {

// An n-gram of commands packed as a base-5 number, first command most
// significant. Numeric order equals lexicographic order on command encodings.
using NgramCode = std::uint64_t;
inline constexpr std::size_t kMaxNgram = 27;  // 5^27 < 2^63

NgramCode encode_ngram(std::span<const Command> gram);
std::vector<Command> decode_ngram(NgramCode code, std::size_t n);

using CommandLine = std::vector<Command>;
CommandLine command_line(const Subsequence& subseq);

using NgramCounts = std::unordered_map<NgramCode, std::uint64_t>;

// Sliding window of width n, stride 1.
NgramCounts count_ngrams(std::span<const Command> line, std::size_t n);

// Frequent n-gram sets, one per n, in persisted layout order.
class NgramVocabulary {
 public:
  NgramVocabulary() = default;
  NgramVocabulary(std::vector<std::size_t> n_values, std::size_t top_m,
                  std::vector<std::vector<NgramCode>> grams);

  const std::vector<std::size_t>& n_values() const { return n_values_; }
  std::size_t top_m() const { return top_m_; }
  const std::vector<NgramCode>& grams(std::size_t which) const { return grams_[which]; }
  std::size_t set_size(std::size_t which) const { return grams_[which].size(); }
  // Total CMD vector length, sum of |A_n|.
  std::size_t cmd_length() const;

  std::optional<std::size_t> slot(std::size_t which, NgramCode code) const;

  std::string to_json() const;
  static NgramVocabulary from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static NgramVocabulary load(const std::filesystem::path& path);

  bool operator==(const NgramVocabulary& other) const {
    return n_values_ == other.n_values_ && top_m_ == other.top_m_ && grams_ == other.grams_;
  }

 private:
  std::vector<std::size_t> n_values_;
  std::size_t top_m_ = 0;
  std::vector<std::vector<NgramCode>> grams_;
  std::vector<std::unordered_map<NgramCode, std::size_t>> index_;
};

inline const std::vector<std::size_t> kDefaultNgramSizes = {7, 11, 15};
inline constexpr std::size_t kDefaultTopM = 25;

// Per class: pool counts over the class's training lines, keep the m most
// frequent (count descending, code ascending), then union the classes in
// class order. Throws EmptyClass when a class has no lines.
NgramVocabulary build_vocab(const std::vector<std::vector<CommandLine>>& lines_by_class,
                            const std::vector<std::size_t>& n_values = kDefaultNgramSizes,
                            std::size_t top_m = kDefaultTopM);

// Concatenated c_n vectors in vocabulary order.
std::vector<double> cmd_vector(std::span<const Command> line, const NgramVocabulary& vocab);

std::vector<double> bank_vector(std::span<const TraceRecord> records, const DramGeometry& geometry);

struct AddressCounts {
  std::vector<double> blocks;
  std::size_t orphans = 0;
};

// Reads and writes resolved through the bank's active row, counted per
// block and summed over banks. A read/write with no active row is an orphan.
AddressCounts address_vector(std::span<const TraceRecord> records, const DramGeometry& geometry);

// Fixes the feature layout [c_n... | bank counts | block counts].
struct FeatureLayout {
  NgramVocabulary vocab;
  DramGeometry geometry;

  std::size_t cmd_length() const { return vocab.cmd_length(); }
  std::size_t dimension() const {
    return vocab.cmd_length() + geometry.bank_count() + geometry.block_count();
  }
  // FNV-1a over the canonical vocab + geometry description.
  std::uint64_t hash() const;
};

std::vector<double> featurize(std::span<const TraceRecord> records, const FeatureLayout& layout);
inline std::vector<double> featurize(const Subsequence& s, const FeatureLayout& layout) {
  return featurize(s.records, layout);
}

// Per-dimension z-scoring fitted on training rows. Dimensions with zero
// variance are only mean-centred. When disabled, apply() is the identity.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> stddev, bool enabled);

  static Standardizer fit(const Matrix& rows, bool enabled = true);
  static Standardizer identity(std::size_t dimension);

  bool enabled() const { return enabled_; }
  std::size_t dimension() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return stddev_; }

  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> inverse(std::span<const double> x) const;
  Matrix apply(const Matrix& rows) const;

  bool operator==(const Standardizer&) const = default;

 private:
  std::vector<double> mean_;
  std::vector<double> stddev_;
  bool enabled_ = false;
};

}  // namespace acorn

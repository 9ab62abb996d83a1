#include "acorn/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "acorn/error.hpp"
#include "json.hpp"

namespace acorn {

namespace {

using nlohmann::json;

NgramCode power_of_five(std::size_t n) {
  NgramCode p = 1;
  for (std::size_t i = 0; i < n; ++i) p *= kCommandCount;
  return p;
}

void check_n(std::size_t n) {
  if (n < 1 || n > kMaxNgram) {
    throw Error(ErrorKind::InvalidArgument, "n-gram size must be in [1, " + std::to_string(kMaxNgram) + "]");
  }
}

// Calls visit(code) for every window of width n.
template <typename Visit>
void for_each_window(std::span<const Command> line, std::size_t n, Visit&& visit) {
  if (line.size() < n) return;
  const NgramCode modulus = power_of_five(n);
  NgramCode code = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    code = (code * kCommandCount + static_cast<NgramCode>(line[i])) % modulus;
    if (i + 1 >= n) visit(code);
  }
}

std::string gram_to_string(NgramCode code, std::size_t n) {
  std::string out;
  for (auto c : decode_ngram(code, n)) {
    if (!out.empty()) out += ' ';
    out += command_name(c);
  }
  return out;
}

NgramCode gram_from_string(std::string_view text, std::size_t n) {
  std::istringstream in{std::string(text)};
  std::vector<Command> cmds;
  std::string token;
  while (in >> token) {
    const auto c = parse_command(token);
    if (!c) throw Error(ErrorKind::InvalidArgument, "vocabulary: unknown command '" + token + "'");
    cmds.push_back(*c);
  }
  if (cmds.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "vocabulary: n-gram '" + std::string(text) +
                                                "' does not have length " + std::to_string(n));
  }
  return encode_ngram(cmds);
}

}  // namespace

NgramCode encode_ngram(std::span<const Command> gram) {
  check_n(gram.size());
  NgramCode code = 0;
  for (auto c : gram) code = code * kCommandCount + static_cast<NgramCode>(c);
  return code;
}

std::vector<Command> decode_ngram(NgramCode code, std::size_t n) {
  check_n(n);
  std::vector<Command> out(n);
  for (std::size_t i = n; i-- > 0;) {
    out[i] = static_cast<Command>(code % kCommandCount);
    code /= kCommandCount;
  }
  return out;
}

CommandLine command_line(const Subsequence& subseq) {
  CommandLine line;
  line.reserve(subseq.records.size());
  for (const auto& r : subseq.records) line.push_back(r.cmd);
  return line;
}

NgramCounts count_ngrams(std::span<const Command> line, std::size_t n) {
  check_n(n);
  NgramCounts counts;
  for_each_window(line, n, [&](NgramCode code) { ++counts[code]; });
  return counts;
}

NgramVocabulary::NgramVocabulary(std::vector<std::size_t> n_values, std::size_t top_m,
                                 std::vector<std::vector<NgramCode>> grams)
    : n_values_(std::move(n_values)), top_m_(top_m), grams_(std::move(grams)) {
  if (n_values_.size() != grams_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "vocabulary needs one n-gram set per n");
  }
  index_.resize(grams_.size());
  for (std::size_t k = 0; k < grams_.size(); ++k) {
    check_n(n_values_[k]);
    const NgramCode limit = power_of_five(n_values_[k]);
    for (std::size_t j = 0; j < grams_[k].size(); ++j) {
      if (grams_[k][j] >= limit) throw Error(ErrorKind::InvalidArgument, "n-gram code out of range");
      if (!index_[k].emplace(grams_[k][j], j).second) {
        throw Error(ErrorKind::InvalidArgument, "duplicate n-gram in vocabulary");
      }
    }
  }
}

std::size_t NgramVocabulary::cmd_length() const {
  std::size_t total = 0;
  for (const auto& g : grams_) total += g.size();
  return total;
}

std::optional<std::size_t> NgramVocabulary::slot(std::size_t which, NgramCode code) const {
  const auto it = index_[which].find(code);
  if (it == index_[which].end()) return std::nullopt;
  return it->second;
}

std::string NgramVocabulary::to_json() const {
  json j;
  j["format"] = "acorn-vocab";
  j["version"] = 1;
  j["top_m"] = top_m_;
  j["sets"] = json::array();
  for (std::size_t k = 0; k < grams_.size(); ++k) {
    json set;
    set["n"] = n_values_[k];
    set["grams"] = json::array();
    for (auto code : grams_[k]) set["grams"].push_back(gram_to_string(code, n_values_[k]));
    j["sets"].push_back(set);
  }
  return j.dump(2) + "\n";
}

NgramVocabulary NgramVocabulary::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "acorn-vocab") throw Error(ErrorKind::InvalidArgument, "not a vocabulary file");
    if (j.at("version") != 1) throw Error(ErrorKind::VersionMismatch, "unsupported vocabulary version");
    std::vector<std::size_t> ns;
    std::vector<std::vector<NgramCode>> grams;
    for (const auto& set : j.at("sets")) {
      const auto n = set.at("n").get<std::size_t>();
      check_n(n);
      ns.push_back(n);
      auto& codes = grams.emplace_back();
      for (const auto& g : set.at("grams")) codes.push_back(gram_from_string(g.get<std::string>(), n));
    }
    return NgramVocabulary(std::move(ns), j.at("top_m").get<std::size_t>(), std::move(grams));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("vocabulary: ") + e.what());
  }
}

void NgramVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << to_json();
}

NgramVocabulary NgramVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

NgramVocabulary build_vocab(const std::vector<std::vector<CommandLine>>& lines_by_class,
                            const std::vector<std::size_t>& n_values, std::size_t top_m) {
  for (std::size_t w = 0; w < lines_by_class.size(); ++w) {
    if (lines_by_class[w].empty()) {
      throw Error(ErrorKind::EmptyClass, "class " + std::to_string(w) + " has no training subsequences");
    }
  }
  std::vector<std::vector<NgramCode>> sets;
  for (const auto n : n_values) {
    check_n(n);
    std::vector<NgramCode> chosen;
    std::unordered_set<NgramCode> seen;
    for (const auto& lines : lines_by_class) {
      NgramCounts pooled;
      for (const auto& line : lines) {
        for_each_window(std::span<const Command>(line), n, [&](NgramCode code) { ++pooled[code]; });
      }
      std::vector<std::pair<NgramCode, std::uint64_t>> ranked(pooled.begin(), pooled.end());
      const std::size_t keep = std::min(top_m, ranked.size());
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                        [](const auto& a, const auto& b) {
                          return a.second != b.second ? a.second > b.second : a.first < b.first;
                        });
      for (std::size_t i = 0; i < keep; ++i) {
        if (seen.insert(ranked[i].first).second) chosen.push_back(ranked[i].first);
      }
    }
    sets.push_back(std::move(chosen));
  }
  return NgramVocabulary(n_values, top_m, std::move(sets));
}

std::vector<double> cmd_vector(std::span<const Command> line, const NgramVocabulary& vocab) {
  std::vector<double> out(vocab.cmd_length(), 0.0);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < vocab.n_values().size(); ++k) {
    for_each_window(line, vocab.n_values()[k], [&](NgramCode code) {
      if (const auto j = vocab.slot(k, code)) out[offset + *j] += 1.0;
    });
    offset += vocab.set_size(k);
  }
  return out;
}

std::vector<double> bank_vector(std::span<const TraceRecord> records, const DramGeometry& geometry) {
  std::vector<double> out(geometry.bank_count(), 0.0);
  for (const auto& r : records) out[bank_linear_index(r, geometry)] += 1.0;
  return out;
}

AddressCounts address_vector(std::span<const TraceRecord> records, const DramGeometry& geometry) {
  constexpr std::int64_t kClosed = -1;
  AddressCounts out;
  out.blocks.assign(geometry.block_count(), 0.0);
  std::vector<std::int64_t> active(geometry.bank_count(), kClosed);
  const std::size_t per_rank = std::size_t{geometry.bank_groups_per_rank} * geometry.banks_per_group;
  const std::size_t col_blocks = geometry.col_blocks();

  for (const auto& r : records) {
    const auto bank = bank_linear_index(r, geometry);
    switch (r.cmd) {
      case Command::ACT:
        active[bank] = r.address;
        break;
      case Command::PRE:
        active[bank] = kClosed;
        break;
      case Command::PREA: {
        const std::size_t first = std::size_t{r.rank} * per_rank;
        std::fill(active.begin() + static_cast<std::ptrdiff_t>(first),
                  active.begin() + static_cast<std::ptrdiff_t>(first + per_rank), kClosed);
        break;
      }
      case Command::RDA:
      case Command::WRA: {
        if (active[bank] == kClosed) {
          ++out.orphans;
          break;
        }
        const auto row = static_cast<std::size_t>(active[bank]);
        const std::size_t block = (row / geometry.block_rows) * col_blocks + r.address / geometry.block_cols;
        out.blocks[block] += 1.0;
        break;
      }
    }
  }
  return out;
}

std::uint64_t FeatureLayout::hash() const {
  std::ostringstream canon;
  canon << "acorn-layout-v1|m=" << vocab.top_m();
  for (std::size_t k = 0; k < vocab.n_values().size(); ++k) {
    canon << "|n=" << vocab.n_values()[k] << ':';
    for (auto code : vocab.grams(k)) canon << code << ',';
  }
  canon << '|' << geometry.to_string();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon.str()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<double> featurize(std::span<const TraceRecord> records, const FeatureLayout& layout) {
  CommandLine line;
  line.reserve(records.size());
  for (const auto& r : records) line.push_back(r.cmd);

  std::vector<double> x = cmd_vector(line, layout.vocab);
  const auto banks = bank_vector(records, layout.geometry);
  const auto address = address_vector(records, layout.geometry);
  x.reserve(layout.dimension());
  x.insert(x.end(), banks.begin(), banks.end());
  x.insert(x.end(), address.blocks.begin(), address.blocks.end());
  return x;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> stddev, bool enabled)
    : mean_(std::move(mean)), stddev_(std::move(stddev)), enabled_(enabled) {
  if (mean_.size() != stddev_.size()) throw Error(ErrorKind::ShapeMismatch, "standardizer mean/std sizes differ");
}

Standardizer Standardizer::fit(const Matrix& rows, bool enabled) {
  if (!enabled) return identity(rows.cols());
  if (rows.rows() < 2) throw Error(ErrorKind::TooFewSamples, "standardizer needs at least 2 samples");
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  std::vector<double> mean(d, 0.0);
  std::vector<double> stddev(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = rows.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = rows.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = r[j] - mean[j];
      stddev[j] += diff * diff;
    }
  }
  for (auto& s : stddev) s = std::sqrt(s / static_cast<double>(n));
  return Standardizer(std::move(mean), std::move(stddev), true);
}

Standardizer Standardizer::identity(std::size_t dimension) {
  return Standardizer(std::vector<double>(dimension, 0.0), std::vector<double>(dimension, 1.0), false);
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw Error(ErrorKind::ShapeMismatch, "standardizer dimension mismatch");
  std::vector<double> out(x.begin(), x.end());
  if (!enabled_) return out;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] -= mean_[j];
    if (stddev_[j] > 0.0) out[j] /= stddev_[j];
  }
  return out;
}

std::vector<double> Standardizer::inverse(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw Error(ErrorKind::ShapeMismatch, "standardizer dimension mismatch");
  std::vector<double> out(x.begin(), x.end());
  if (!enabled_) return out;
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (stddev_[j] > 0.0) out[j] *= stddev_[j];
    out[j] += mean_[j];
  }
  return out;
}

Matrix Standardizer::apply(const Matrix& rows) const {
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto z = apply(rows.row(i));
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace acorn

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace acorn {

// The five controller commands carried by a workload trace. The integer
// encoding is part of the on-disk formats and of n-gram codes.
enum class Command : std::uint8_t { ACT = 0, RDA = 1, WRA = 2, PRE = 3, PREA = 4 };

inline constexpr std::size_t kCommandCount = 5;
inline constexpr std::array<Command, kCommandCount> kAllCommands = {
    Command::ACT, Command::RDA, Command::WRA, Command::PRE, Command::PREA};

std::string_view command_name(Command cmd);
std::optional<Command> parse_command(std::string_view name);

inline bool is_access(Command cmd) { return cmd == Command::RDA || cmd == Command::WRA; }

// Rank -> bank group -> bank hierarchy, plus the per-bank cell array and the
// block tiling used for address counting.
struct DramGeometry {
  std::uint32_t ranks = 2;
  std::uint32_t bank_groups_per_rank = 4;
  std::uint32_t banks_per_group = 4;
  std::uint32_t rows_per_bank = 1u << 17;
  std::uint32_t cols_per_bank = 1u << 10;
  std::uint32_t block_rows = 1u << 14;
  std::uint32_t block_cols = 8;

  // Throws InvalidArgument when a count is zero or a block size does not
  // divide the bank dimension.
  void validate() const;

  std::size_t bank_count() const {
    return std::size_t{ranks} * bank_groups_per_rank * banks_per_group;
  }
  std::size_t row_blocks() const { return rows_per_bank / block_rows; }
  std::size_t col_blocks() const { return cols_per_bank / block_cols; }
  std::size_t block_count() const { return row_blocks() * col_blocks(); }

  // Canonical "key=value,..." form; parse() accepts any subset of keys.
  std::string to_string() const;
  static DramGeometry parse(std::string_view spec);

  bool operator==(const DramGeometry&) const = default;
};

struct TraceRecord {
  Command cmd = Command::PRE;
  std::uint16_t rank = 0;
  std::uint16_t bank_group = 0;
  std::uint16_t bank = 0;
  // Row for ACT, column for RDA/WRA, 0 for PRE/PREA.
  std::uint32_t address = 0;

  bool operator==(const TraceRecord&) const = default;
};

struct WorkloadSequence {
  std::string label;
  std::vector<TraceRecord> records;

  std::size_t length() const { return records.size(); }
};

struct Subsequence {
  std::string label;
  std::size_t source_block = 0;
  std::vector<TraceRecord> records;
};

// Rank-major, then bank group, then bank.
std::size_t bank_linear_index(std::uint32_t rank, std::uint32_t bank_group, std::uint32_t bank,
                              const DramGeometry& geometry);
inline std::size_t bank_linear_index(const TraceRecord& r, const DramGeometry& geometry) {
  return bank_linear_index(r.rank, r.bank_group, r.bank, geometry);
}

// Throws OutOfRange when any field exceeds the geometry.
void validate_record(const TraceRecord& record, const DramGeometry& geometry);

// One "CMD,rank,bank_group,bank,address" record per line. Blank lines are
// skipped; errors carry the 1-based line number.
WorkloadSequence parse_trace(std::istream& in, const DramGeometry& geometry, std::string label);
WorkloadSequence parse_trace(std::string_view text, const DramGeometry& geometry, std::string label);
void serialize_trace(std::ostream& out, const WorkloadSequence& seq);

// File variants; a ".gz" suffix selects gzip compression.
WorkloadSequence read_trace_file(const std::filesystem::path& path, const DramGeometry& geometry,
                                 std::optional<std::string> label = std::nullopt);
void write_trace_file(const std::filesystem::path& path, const WorkloadSequence& seq);

// File stem with ".csv" / ".csv.gz" removed.
std::string label_from_path(const std::filesystem::path& path);

// Non-overlapping blocks of length subseq_len; the tail shorter than
// subseq_len is dropped.
std::vector<Subsequence> partition(const WorkloadSequence& seq, std::size_t subseq_len);

struct IngestReport {
  std::size_t records = 0;
  std::size_t subsequences = 0;
  std::size_t dropped_records = 0;
};
IngestReport ingest_report(const WorkloadSequence& seq, std::size_t subseq_len);

}  // namespace acorn

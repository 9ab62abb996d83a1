#include "acorn/trace.hpp"

#include <zlib.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "acorn/error.hpp"

namespace acorn {

namespace {

constexpr std::array<std::string_view, kCommandCount> kCommandNames = {"ACT", "RDA", "WRA", "PRE",
                                                                       "PREA"};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

template <typename T>
bool parse_uint(std::string_view field, T& out) {
  if (field.empty()) return false;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

TraceRecord parse_line(std::string_view line, std::size_t line_no, const DramGeometry& geometry) {
  std::array<std::string_view, 5> fields;
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    if (count == fields.size()) {
      throw ParseError(ErrorKind::MalformedLine, line_no, "expected 5 fields, got more");
    }
    fields[count++] = field;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (count != fields.size()) {
    throw ParseError(ErrorKind::MalformedLine, line_no,
                     "expected 5 fields, got " + std::to_string(count));
  }

  const auto cmd = parse_command(fields[0]);
  if (!cmd) {
    throw ParseError(ErrorKind::MalformedLine, line_no,
                     "unknown command '" + std::string(fields[0]) + "'");
  }
  std::array<std::uint32_t, 4> values{};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!parse_uint(fields[i + 1], values[i])) {
      throw ParseError(ErrorKind::MalformedLine, line_no,
                       "unparseable integer '" + std::string(fields[i + 1]) + "'");
    }
  }
  if (values[0] >= geometry.ranks || values[1] >= geometry.bank_groups_per_rank ||
      values[2] >= geometry.banks_per_group) {
    throw ParseError(ErrorKind::OutOfRange, line_no, "bank coordinates exceed geometry");
  }
  if (*cmd == Command::ACT && values[3] >= geometry.rows_per_bank) {
    throw ParseError(ErrorKind::OutOfRange, line_no, "row exceeds rows_per_bank");
  }
  if (is_access(*cmd) && values[3] >= geometry.cols_per_bank) {
    throw ParseError(ErrorKind::OutOfRange, line_no, "column exceeds cols_per_bank");
  }
  return TraceRecord{*cmd, static_cast<std::uint16_t>(values[0]),
                     static_cast<std::uint16_t>(values[1]), static_cast<std::uint16_t>(values[2]),
                     values[3]};
}

std::string read_gzip(const std::filesystem::path& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string out;
  std::array<char, 1 << 16> buffer;
  int n;
  while ((n = gzread(file, buffer.data(), static_cast<unsigned>(buffer.size()))) > 0) {
    out.append(buffer.data(), static_cast<std::size_t>(n));
  }
  const bool failed = n < 0;
  gzclose(file);
  if (failed) throw Error(ErrorKind::Io, "gzip stream error in " + path.string());
  return out;
}

}  // namespace

std::string_view command_name(Command cmd) { return kCommandNames[static_cast<std::size_t>(cmd)]; }

std::optional<Command> parse_command(std::string_view name) {
  for (std::size_t i = 0; i < kCommandNames.size(); ++i) {
    if (kCommandNames[i] == name) return static_cast<Command>(i);
  }
  return std::nullopt;
}

void DramGeometry::validate() const {
  if (ranks == 0 || bank_groups_per_rank == 0 || banks_per_group == 0 || rows_per_bank == 0 ||
      cols_per_bank == 0 || block_rows == 0 || block_cols == 0) {
    throw Error(ErrorKind::InvalidArgument, "geometry counts must be >= 1");
  }
  if (ranks > 0xFFFF || bank_groups_per_rank > 0xFFFF || banks_per_group > 0xFFFF) {
    throw Error(ErrorKind::InvalidArgument, "bank hierarchy counts must fit in 16 bits");
  }
  if (rows_per_bank % block_rows != 0) {
    throw Error(ErrorKind::InvalidArgument, "block_rows must divide rows_per_bank");
  }
  if (cols_per_bank % block_cols != 0) {
    throw Error(ErrorKind::InvalidArgument, "block_cols must divide cols_per_bank");
  }
}

std::string DramGeometry::to_string() const {
  std::ostringstream os;
  os << "ranks=" << ranks << ",bank_groups=" << bank_groups_per_rank
     << ",banks=" << banks_per_group << ",rows=" << rows_per_bank << ",cols=" << cols_per_bank
     << ",block_rows=" << block_rows << ",block_cols=" << block_cols;
  return os.str();
}

DramGeometry DramGeometry::parse(std::string_view spec) {
  DramGeometry g;
  std::size_t start = 0;
  while (start < spec.size()) {
    auto comma = spec.find(',', start);
    if (comma == std::string_view::npos) comma = spec.size();
    const auto item = spec.substr(start, comma - start);
    start = comma + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::InvalidArgument, "geometry item '" + std::string(item) + "' lacks '='");
    }
    const auto key = item.substr(0, eq);
    std::uint32_t value = 0;
    if (!parse_uint(item.substr(eq + 1), value)) {
      throw Error(ErrorKind::InvalidArgument, "bad geometry value in '" + std::string(item) + "'");
    }
    if (key == "ranks") g.ranks = value;
    else if (key == "bank_groups") g.bank_groups_per_rank = value;
    else if (key == "banks") g.banks_per_group = value;
    else if (key == "rows") g.rows_per_bank = value;
    else if (key == "cols") g.cols_per_bank = value;
    else if (key == "block_rows") g.block_rows = value;
    else if (key == "block_cols") g.block_cols = value;
    else throw Error(ErrorKind::InvalidArgument, "unknown geometry key '" + std::string(key) + "'");
  }
  g.validate();
  return g;
}

std::size_t bank_linear_index(std::uint32_t rank, std::uint32_t bank_group, std::uint32_t bank,
                              const DramGeometry& geometry) {
  if (rank >= geometry.ranks || bank_group >= geometry.bank_groups_per_rank ||
      bank >= geometry.banks_per_group) {
    throw Error(ErrorKind::OutOfRange, "bank coordinates exceed geometry");
  }
  return (std::size_t{rank} * geometry.bank_groups_per_rank + bank_group) *
             geometry.banks_per_group +
         bank;
}

void validate_record(const TraceRecord& r, const DramGeometry& geometry) {
  bank_linear_index(r, geometry);
  if (r.cmd == Command::ACT && r.address >= geometry.rows_per_bank) {
    throw Error(ErrorKind::OutOfRange, "row exceeds rows_per_bank");
  }
  if (is_access(r.cmd) && r.address >= geometry.cols_per_bank) {
    throw Error(ErrorKind::OutOfRange, "column exceeds cols_per_bank");
  }
}

WorkloadSequence parse_trace(std::string_view text, const DramGeometry& geometry,
                             std::string label) {
  WorkloadSequence seq;
  seq.label = std::move(label);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    seq.records.push_back(parse_line(line, line_no, geometry));
  }
  return seq;
}

WorkloadSequence parse_trace(std::istream& in, const DramGeometry& geometry, std::string label) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_trace(std::string_view(buffer.str()), geometry, std::move(label));
}

void serialize_trace(std::ostream& out, const WorkloadSequence& seq) {
  std::string line;
  for (const auto& r : seq.records) {
    line.clear();
    line += command_name(r.cmd);
    line += ',';
    line += std::to_string(r.rank);
    line += ',';
    line += std::to_string(r.bank_group);
    line += ',';
    line += std::to_string(r.bank);
    line += ',';
    line += std::to_string(r.address);
    line += '\n';
    out << line;
  }
}

std::string label_from_path(const std::filesystem::path& path) {
  std::string name = path.filename().string();
  for (std::string_view suffix : {".gz", ".csv"}) {
    if (ends_with(name, suffix)) name.resize(name.size() - suffix.size());
  }
  return name;
}

WorkloadSequence read_trace_file(const std::filesystem::path& path, const DramGeometry& geometry,
                                 std::optional<std::string> label) {
  std::string text;
  if (ends_with(path.string(), ".gz")) {
    text = read_gzip(path);
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    text = std::move(buffer).str();
  }
  return parse_trace(std::string_view(text), geometry, label ? *label : label_from_path(path));
}

void write_trace_file(const std::filesystem::path& path, const WorkloadSequence& seq) {
  std::ostringstream os;
  serialize_trace(os, seq);
  const std::string text = std::move(os).str();
  if (ends_with(path.string(), ".gz")) {
    gzFile file = gzopen(path.c_str(), "wb");
    if (file == nullptr) throw Error(ErrorKind::Io, "cannot write " + path.string());
    const int written = text.empty() ? 0 : gzwrite(file, text.data(), static_cast<unsigned>(text.size()));
    gzclose(file);
    if (!text.empty() && written <= 0) throw Error(ErrorKind::Io, "gzip write failed: " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<Subsequence> partition(const WorkloadSequence& seq, std::size_t subseq_len) {
  if (subseq_len == 0) throw Error(ErrorKind::InvalidArgument, "subsequence length must be >= 1");
  const std::size_t blocks = seq.length() / subseq_len;
  std::vector<Subsequence> out;
  out.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto first = seq.records.begin() + static_cast<std::ptrdiff_t>(b * subseq_len);
    out.push_back(Subsequence{seq.label, b, {first, first + static_cast<std::ptrdiff_t>(subseq_len)}});
  }
  return out;
}

IngestReport ingest_report(const WorkloadSequence& seq, std::size_t subseq_len) {
  if (subseq_len == 0) throw Error(ErrorKind::InvalidArgument, "subsequence length must be >= 1");
  return {seq.length(), seq.length() / subseq_len, seq.length() % subseq_len};
}

}  // namespace acorn

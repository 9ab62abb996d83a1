#include "acorn/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "acorn/error.hpp"
#include "acorn/rng.hpp"
#include "json.hpp"

namespace acorn {

namespace {

using nlohmann::json;

// Fractional part of the golden ratio. Bank choice walks its multiples.
constexpr double kGoldenFraction = 0.61803398874989484820;

// Seed offsets for the spatial and bank streams.
constexpr std::uint64_t kSpatialStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kBankStream = 0xD1B54A32D192ED03ull;

struct BankState {
  bool open = false;
};

// Plays the expanded motif against a single bank that starts precharged.
// Returns an empty string when legal, otherwise the reason.
std::string simulate_single_bank(const std::vector<Command>& cmds) {
  bool open = false;
  for (const auto cmd : cmds) {
    switch (cmd) {
      case Command::ACT:
        if (open) return "ACT on a bank with an active row";
        open = true;
        break;
      case Command::RDA:
      case Command::WRA:
        if (!open) return std::string(command_name(cmd)) + " with no active row";
        break;
      case Command::PRE:
      case Command::PREA:
        open = false;
        break;
    }
  }
  if (open) return "motif leaves the bank with an active row";
  return {};
}

std::vector<Command> expand_motif(const std::vector<MotifStep>& motif, Rng& rng) {
  std::vector<Command> out;
  for (const auto& step : motif) {
    const std::uint32_t span = step.max_repeat - step.min_repeat + 1;
    const std::uint32_t reps =
        step.min_repeat + (span > 1 ? static_cast<std::uint32_t>(rng.below(span)) : 0u);
    out.insert(out.end(), reps, step.cmd);
  }
  return out;
}

// Perturbations that stay inside the legal motif space: duplicate, drop or
// flip one read/write, or swap a closing PRE for PREA (and back).
void perturb(std::vector<Command>& cmds, Rng& rng) {
  std::vector<std::size_t> accesses;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    if (is_access(cmds[i])) accesses.push_back(i);
  }
  const bool can_close_swap =
      !cmds.empty() && (cmds.back() == Command::PRE || cmds.back() == Command::PREA);

  std::vector<int> options;
  if (!accesses.empty()) {
    options.push_back(0);
    options.push_back(2);
  }
  if (accesses.size() >= 2) options.push_back(1);
  if (can_close_swap) options.push_back(3);
  if (options.empty()) return;

  const int choice = options[rng.below(options.size())];
  switch (choice) {
    case 0: {
      const auto at = accesses[rng.below(accesses.size())];
      cmds.insert(cmds.begin() + static_cast<std::ptrdiff_t>(at), cmds[at]);
      break;
    }
    case 1: {
      const auto at = accesses[rng.below(accesses.size())];
      cmds.erase(cmds.begin() + static_cast<std::ptrdiff_t>(at));
      break;
    }
    case 2: {
      const auto at = accesses[rng.below(accesses.size())];
      cmds[at] = cmds[at] == Command::RDA ? Command::WRA : Command::RDA;
      break;
    }
    default:
      cmds.back() = cmds.back() == Command::PRE ? Command::PREA : Command::PRE;
      break;
  }
}

class AddressStream {
 public:
  AddressStream(const WorkloadProfile& p, const DramGeometry& g)
      : profile_(p), geometry_(g), rng_(p.rng_seed ^ kSpatialStream) {
    row_cursor_ = static_cast<std::uint32_t>(rng_.below(g.rows_per_bank));
  }

  std::uint32_t open_row() {
    const auto& g = geometry_;
    switch (profile_.spatial_mode) {
      case SpatialMode::SequentialSweep:
      case SpatialMode::Strided:
        return row_cursor_;
      case SpatialMode::HotBlock: {
        in_hot_ = rng_.bernoulli(profile_.heat);
        const std::size_t block = in_hot_ ? profile_.hot_blocks[rng_.below(profile_.hot_blocks.size())]
                                          : rng_.below(g.block_count());
        hot_col_block_ = static_cast<std::uint32_t>(block % g.col_blocks());
        const auto row_block = static_cast<std::uint32_t>(block / g.col_blocks());
        return row_block * g.block_rows + static_cast<std::uint32_t>(rng_.below(g.block_rows));
      }
      case SpatialMode::UniformRandom:
        return static_cast<std::uint32_t>(rng_.below(g.rows_per_bank));
    }
    return 0;
  }

  std::uint32_t next_column() {
    const auto& g = geometry_;
    switch (profile_.spatial_mode) {
      case SpatialMode::SequentialSweep: {
        const auto c = col_cursor_;
        col_cursor_ = (col_cursor_ + 1) % g.cols_per_bank;
        return c;
      }
      case SpatialMode::Strided: {
        const auto c = col_cursor_;
        col_cursor_ = static_cast<std::uint32_t>((std::uint64_t{col_cursor_} + profile_.stride) %
                                                 g.cols_per_bank);
        return c;
      }
      case SpatialMode::HotBlock:
        if (in_hot_) {
          return hot_col_block_ * g.block_cols + static_cast<std::uint32_t>(rng_.below(g.block_cols));
        }
        return static_cast<std::uint32_t>(rng_.below(g.cols_per_bank));
      case SpatialMode::UniformRandom:
        return static_cast<std::uint32_t>(rng_.below(g.cols_per_bank));
    }
    return 0;
  }

  void end_emission() {
    const auto step = profile_.spatial_mode == SpatialMode::Strided ? profile_.stride : 1u;
    row_cursor_ =
        static_cast<std::uint32_t>((std::uint64_t{row_cursor_} + step) % geometry_.rows_per_bank);
  }

 private:
  const WorkloadProfile& profile_;
  const DramGeometry& geometry_;
  Rng rng_;
  std::uint32_t row_cursor_ = 0;
  std::uint32_t col_cursor_ = 0;
  bool in_hot_ = false;
  std::uint32_t hot_col_block_ = 0;
};

class BankPicker {
 public:
  BankPicker(const WorkloadProfile& p, const DramGeometry& g) {
    const std::size_t banks = g.bank_count();
    cumulative_.resize(banks);
    double total = 0.0;
    for (std::size_t b = 0; b < banks; ++b) {
      total += p.bank_affinity.empty() ? 1.0 : p.bank_affinity[b];
      cumulative_[b] = total;
    }
    for (auto& c : cumulative_) c /= total;
    Rng rng(p.rng_seed ^ kBankStream);
    position_ = rng.uniform();
  }

  std::size_t next() {
    position_ += kGoldenFraction;
    if (position_ >= 1.0) position_ -= 1.0;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), position_);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
  double position_ = 0.0;
};

std::string motif_to_string(const std::vector<MotifStep>& motif) {
  std::string out;
  for (const auto& s : motif) {
    if (!out.empty()) out += ' ';
    out += command_name(s.cmd);
    if (s.min_repeat != 1 || s.max_repeat != 1) {
      out += '*' + std::to_string(s.min_repeat);
      if (s.max_repeat != s.min_repeat) out += ".." + std::to_string(s.max_repeat);
    }
  }
  return out;
}

std::uint32_t parse_count(std::string_view text, std::string_view token) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidProfile, "bad repeat count in motif token '" + std::string(token) + "'");
  }
  return v;
}

// "ACT RDA*4 WRA*2..6 PRE"
std::vector<MotifStep> motif_from_string(std::string_view text) {
  std::vector<MotifStep> motif;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) {
    std::string_view t = token;
    const auto star = t.find('*');
    const auto cmd = parse_command(t.substr(0, star));
    if (!cmd) throw Error(ErrorKind::InvalidProfile, "unknown command in motif token '" + token + "'");
    MotifStep step{*cmd, 1, 1};
    if (star != std::string_view::npos) {
      const auto counts = t.substr(star + 1);
      const auto dots = counts.find("..");
      step.min_repeat = parse_count(counts.substr(0, dots), t);
      step.max_repeat =
          dots == std::string_view::npos ? step.min_repeat : parse_count(counts.substr(dots + 2), t);
    }
    motif.push_back(step);
  }
  return motif;
}

json profile_to_json(const WorkloadProfile& p) {
  json j;
  j["name"] = p.name;
  j["role"] = p.unknown ? "unknown" : "known";
  if (!p.phases.empty()) {
    j["phase_length"] = p.phase_length;
    j["phases"] = json::array();
    for (const auto& c : p.phases) {
      auto cj = profile_to_json(c);
      cj.erase("role");
      j["phases"].push_back(cj);
    }
    j["seed"] = p.rng_seed;
    return j;
  }
  j["motif"] = motif_to_string(p.motif);
  j["motif_noise"] = p.motif_noise;
  json spatial;
  spatial["mode"] = spatial_mode_name(p.spatial_mode);
  if (p.spatial_mode == SpatialMode::Strided) spatial["stride"] = p.stride;
  if (p.spatial_mode == SpatialMode::HotBlock) {
    spatial["blocks"] = p.hot_blocks;
    spatial["heat"] = p.heat;
  }
  j["spatial"] = spatial;
  if (!p.bank_affinity.empty()) j["bank_affinity"] = p.bank_affinity;
  j["seed"] = p.rng_seed;
  return j;
}

WorkloadProfile profile_from_json(const json& j) {
  try {
    WorkloadProfile p;
    p.name = j.at("name").get<std::string>();
    p.unknown = j.value("role", std::string("known")) == "unknown";
    p.rng_seed = j.value("seed", std::uint64_t{0});
    if (j.contains("phases")) {
      for (const auto& c : j.at("phases")) p.phases.push_back(profile_from_json(c));
      p.phase_length = j.at("phase_length").get<std::uint32_t>();
      return p;
    }
    p.motif = motif_from_string(j.at("motif").get<std::string>());
    p.motif_noise = j.value("motif_noise", 0.0);
    const auto& spatial = j.at("spatial");
    p.spatial_mode = parse_spatial_mode(spatial.at("mode").get<std::string>());
    p.stride = spatial.value("stride", 1u);
    p.hot_blocks = spatial.value("blocks", std::vector<std::uint32_t>{});
    p.heat = spatial.value("heat", 0.9);
    p.bank_affinity = j.value("bank_affinity", std::vector<double>{});
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidProfile, std::string("catalog entry: ") + e.what());
  }
}

// Plays one simple (non-blend) profile, one emission at a time.
class Emitter {
 public:
  Emitter(const WorkloadProfile& p, const DramGeometry& g)
      : profile_(p), geometry_(g), command_rng_(p.rng_seed), addresses_(p, g), banks_(p, g) {}

  void emit(WorkloadSequence& seq, std::size_t length) {
    auto cmds = expand_motif(profile_.motif, command_rng_);
    if (profile_.motif_noise > 0.0 && command_rng_.bernoulli(profile_.motif_noise)) {
      perturb(cmds, command_rng_);
    }
    const std::size_t bank = banks_.next();
    const std::uint32_t per_rank = geometry_.bank_groups_per_rank * geometry_.banks_per_group;
    TraceRecord base;
    base.rank = static_cast<std::uint16_t>(bank / per_rank);
    base.bank_group = static_cast<std::uint16_t>((bank % per_rank) / geometry_.banks_per_group);
    base.bank = static_cast<std::uint16_t>(bank % geometry_.banks_per_group);

    for (const auto cmd : cmds) {
      if (seq.records.size() == length) break;
      TraceRecord r = base;
      r.cmd = cmd;
      if (cmd == Command::ACT) r.address = addresses_.open_row();
      else if (is_access(cmd)) r.address = addresses_.next_column();
      seq.records.push_back(r);
    }
    addresses_.end_emission();
  }

 private:
  const WorkloadProfile& profile_;
  const DramGeometry& geometry_;
  Rng command_rng_;
  AddressStream addresses_;
  BankPicker banks_;
};

std::vector<double> affinity(const DramGeometry& g, auto weight_of) {
  std::vector<double> w(g.bank_count());
  for (std::uint32_t r = 0; r < g.ranks; ++r)
    for (std::uint32_t bg = 0; bg < g.bank_groups_per_rank; ++bg)
      for (std::uint32_t b = 0; b < g.banks_per_group; ++b)
        w[bank_linear_index(r, bg, b, g)] = weight_of(r, bg, b);
  return w;
}

}  // namespace

std::string_view spatial_mode_name(SpatialMode mode) {
  switch (mode) {
    case SpatialMode::SequentialSweep: return "sequential_sweep";
    case SpatialMode::Strided: return "strided";
    case SpatialMode::HotBlock: return "hot_block";
    case SpatialMode::UniformRandom: return "uniform_random";
  }
  return "";
}

SpatialMode parse_spatial_mode(std::string_view name) {
  for (auto m : {SpatialMode::SequentialSweep, SpatialMode::Strided, SpatialMode::HotBlock,
                 SpatialMode::UniformRandom}) {
    if (spatial_mode_name(m) == name) return m;
  }
  throw Error(ErrorKind::InvalidProfile, "unknown spatial mode '" + std::string(name) + "'");
}

void validate_profile(const WorkloadProfile& p, const DramGeometry& g) {
  g.validate();
  if (!p.phases.empty()) {
    if (p.phases.size() < 2) throw Error(ErrorKind::InvalidProfile, p.name + ": a blend needs at least two phases");
    if (p.phase_length == 0) throw Error(ErrorKind::InvalidProfile, p.name + ": phase_length must be >= 1");
    for (const auto& c : p.phases) {
      if (!c.phases.empty()) throw Error(ErrorKind::InvalidProfile, p.name + ": blends cannot nest");
      validate_profile(c, g);
    }
    return;
  }
  if (p.motif.empty()) throw Error(ErrorKind::InvalidProfile, p.name + ": empty motif");
  std::vector<Command> once;
  for (const auto& step : p.motif) {
    if (step.min_repeat < 1 || step.max_repeat < step.min_repeat) {
      throw Error(ErrorKind::InvalidProfile, p.name + ": repeat range must satisfy 1 <= min <= max");
    }
    if (step.cmd == Command::ACT && step.max_repeat > 1) {
      throw Error(ErrorKind::InvalidProfile, p.name + ": ACT cannot repeat on one bank");
    }
    once.push_back(step.cmd);
  }
  if (const auto reason = simulate_single_bank(once); !reason.empty()) {
    throw Error(ErrorKind::InvalidProfile, p.name + ": illegal motif: " + reason);
  }
  if (!(p.motif_noise >= 0.0 && p.motif_noise <= 1.0)) {
    throw Error(ErrorKind::InvalidProfile, p.name + ": motif_noise must be in [0, 1]");
  }
  if (!p.bank_affinity.empty()) {
    if (p.bank_affinity.size() != g.bank_count()) {
      throw Error(ErrorKind::InvalidProfile, p.name + ": bank_affinity length must equal bank count");
    }
    double total = 0.0;
    for (double w : p.bank_affinity) {
      if (!(w >= 0.0)) throw Error(ErrorKind::InvalidProfile, p.name + ": negative bank weight");
      total += w;
    }
    if (total <= 0.0) throw Error(ErrorKind::InvalidProfile, p.name + ": bank weights all zero");
  }
  if (p.spatial_mode == SpatialMode::Strided && p.stride == 0) {
    throw Error(ErrorKind::InvalidProfile, p.name + ": stride must be >= 1");
  }
  if (p.spatial_mode == SpatialMode::HotBlock) {
    if (p.hot_blocks.empty()) throw Error(ErrorKind::InvalidProfile, p.name + ": no hot blocks");
    for (auto b : p.hot_blocks) {
      if (b >= g.block_count()) throw Error(ErrorKind::InvalidProfile, p.name + ": hot block out of range");
    }
    if (!(p.heat >= 0.0 && p.heat <= 1.0)) {
      throw Error(ErrorKind::InvalidProfile, p.name + ": heat must be in [0, 1]");
    }
  }
}

WorkloadSequence generate_workload(const WorkloadProfile& profile, std::size_t length,
                                   const DramGeometry& geometry) {
  if (length == 0) throw Error(ErrorKind::InvalidArgument, "length must be >= 1");
  validate_profile(profile, geometry);

  WorkloadSequence seq;
  seq.label = profile.name;
  seq.records.reserve(length);

  if (profile.phases.empty()) {
    Emitter emitter(profile, geometry);
    while (seq.records.size() < length) emitter.emit(seq, length);
    return seq;
  }

  std::vector<std::unique_ptr<Emitter>> emitters;
  for (const auto& c : profile.phases) emitters.push_back(std::make_unique<Emitter>(c, geometry));
  Rng phase_rng(profile.rng_seed);
  const std::size_t k = emitters.size();
  const auto run_length = [&] { return profile.phase_length / 2 + phase_rng.below(profile.phase_length + 1); };
  std::size_t current = phase_rng.below(k);
  std::size_t phase_end = run_length();
  while (seq.records.size() < length) {
    emitters[current]->emit(seq, length);
    if (seq.records.size() >= phase_end) {
      current = (current + 1 + phase_rng.below(k - 1)) % k;
      phase_end = seq.records.size() + run_length();
    }
  }
  return seq;
}

ProtocolReport check_protocol(const WorkloadSequence& seq, const DramGeometry& geometry) {
  ProtocolReport report;
  std::vector<BankState> banks(geometry.bank_count());
  const std::size_t per_rank = std::size_t{geometry.bank_groups_per_rank} * geometry.banks_per_group;
  for (std::size_t i = 0; i < seq.records.size(); ++i) {
    const auto& r = seq.records[i];
    const auto bank = bank_linear_index(r, geometry);
    switch (r.cmd) {
      case Command::ACT:
        if (banks[bank].open) report.violations.push_back({i, "ACT on a bank with an active row"});
        banks[bank].open = true;
        break;
      case Command::RDA:
      case Command::WRA:
        if (!banks[bank].open) {
          report.violations.push_back({i, std::string(command_name(r.cmd)) + " with no active row"});
        }
        break;
      case Command::PRE:
        banks[bank].open = false;
        break;
      case Command::PREA: {
        const std::size_t first = std::size_t{r.rank} * per_rank;
        for (std::size_t b = first; b < first + per_rank; ++b) banks[b].open = false;
        break;
      }
    }
  }
  return report;
}

std::vector<WorkloadProfile> preset_catalog(std::string_view name, const DramGeometry& g) {
  if (name != "benchmark-v1") {
    throw Error(ErrorKind::InvalidArgument, "unknown preset '" + std::string(name) + "'");
  }
  const auto step = [](Command c, std::uint32_t lo = 1, std::uint32_t hi = 0) {
    return MotifStep{c, lo, hi == 0 ? lo : hi};
  };
  const auto block = [&](std::uint32_t row_block, std::uint32_t col_block) {
    return static_cast<std::uint32_t>(row_block * g.col_blocks() + col_block);
  };
  using C = Command;
  std::vector<WorkloadProfile> out;

  out.push_back({.name = "stream_read",
                 .motif = {step(C::ACT), step(C::RDA, 8), step(C::PRE)},
                 .motif_noise = 0.05,
                 .spatial_mode = SpatialMode::SequentialSweep,
                 .rng_seed = 101});
  out.push_back({.name = "stream_write",
                 .motif = {step(C::ACT), step(C::WRA, 8), step(C::PRE)},
                 .motif_noise = 0.05,
                 .spatial_mode = SpatialMode::SequentialSweep,
                 .bank_affinity = affinity(g, [](auto r, auto, auto) { return r == 0 ? 3.0 : 1.0; }),
                 .rng_seed = 102});
  out.push_back({.name = "hot_lookup",
                 .motif = {step(C::ACT), step(C::RDA, 1, 3), step(C::PRE)},
                 .motif_noise = 0.10,
                 .spatial_mode = SpatialMode::HotBlock,
                 .hot_blocks = {block(1, 5), block(1, 6), block(3, 40)},
                 .heat = 0.9,
                 .bank_affinity = affinity(g, [](auto, auto bg, auto) { return bg < 2 ? 2.0 : 1.0; }),
                 .rng_seed = 103});
  out.push_back({.name = "strided_copy",
                 .motif = {step(C::ACT), step(C::RDA, 2), step(C::WRA, 2), step(C::PRE)},
                 .motif_noise = 0.05,
                 .spatial_mode = SpatialMode::Strided,
                 .stride = 24,
                 .bank_affinity = affinity(g, [](auto r, auto, auto b) { return r == 1 && b % 2 == 0 ? 4.0 : 1.0; }),
                 .rng_seed = 104});
  out.push_back({.name = "page_flush",
                 .motif = {step(C::ACT), step(C::WRA, 4, 6), step(C::PREA)},
                 .motif_noise = 0.05,
                 .spatial_mode = SpatialMode::SequentialSweep,
                 .bank_affinity = affinity(g, [](auto, auto bg, auto) { return bg == 3 ? 0.5 : 1.0; }),
                 .rng_seed = 105});
  out.push_back({.name = "random_rmw",
                 .motif = {step(C::ACT), step(C::RDA), step(C::WRA), step(C::PRE)},
                 .motif_noise = 0.10,
                 .spatial_mode = SpatialMode::HotBlock,
                 .hot_blocks = {block(6, 100), block(6, 101), block(6, 102), block(6, 103)},
                 .heat = 0.7,
                 .rng_seed = 106});

  const auto blend = [&](std::string name, std::size_t a, std::size_t b, std::uint64_t seed) {
    WorkloadProfile p{.name = std::move(name), .motif = {}, .rng_seed = seed, .unknown = true};
    p.phases = {out[a], out[b]};
    p.phases[0].rng_seed = seed + 1;
    p.phases[1].rng_seed = seed + 2;
    p.phase_length = 2000;
    return p;
  };
  out.push_back(blend("read_write_mix", 0, 1, 201));
  out.push_back(blend("lookup_rmw_mix", 2, 5, 211));
  return out;
}

std::string catalog_to_json(const std::vector<WorkloadProfile>& profiles) {
  json j;
  j["profiles"] = json::array();
  for (const auto& p : profiles) j["profiles"].push_back(profile_to_json(p));
  return j.dump(2) + "\n";
}

std::vector<WorkloadProfile> catalog_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidProfile, std::string("catalog is not valid JSON: ") + e.what());
  }
  if (!j.contains("profiles") || !j["profiles"].is_array()) {
    throw Error(ErrorKind::InvalidProfile, "catalog lacks a \"profiles\" array");
  }
  std::vector<WorkloadProfile> out;
  for (const auto& entry : j["profiles"]) out.push_back(profile_from_json(entry));
  return out;
}

std::vector<WorkloadProfile> load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return catalog_from_json(buffer.str());
}

void save_catalog(const std::filesystem::path& path, const std::vector<WorkloadProfile>& profiles) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << catalog_to_json(profiles);
}

}  // namespace acorn

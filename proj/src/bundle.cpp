#include "acorn/bundle.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "acorn/error.hpp"
#include "json.hpp"

namespace acorn {

namespace {

using nlohmann::json;

constexpr char kBundleMagic[8] = {'A', 'C', 'O', 'R', 'N', 'B', 'N', 'D'};
constexpr char kFeatureMagic[8] = {'A', 'C', 'O', 'R', 'N', 'F', 'E', 'A'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8;
constexpr std::size_t kTrailerSize = 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
  return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ArchiveWriter {
 public:
  json manifest;

  void add(const std::string& name, std::vector<std::size_t> shape, std::span<const double> values,
           const char* order = "row_major") {
    json entry;
    entry["name"] = name;
    entry["shape"] = shape;
    entry["order"] = order;
    entry["offset"] = payload_.size();
    manifest["arrays"].push_back(entry);
    for (double v : values) put_u64(payload_, std::bit_cast<std::uint64_t>(v));
  }

  std::vector<std::uint8_t> finish(const char (&magic)[8], std::uint32_t version) {
    const std::string text = manifest.dump();
    std::vector<std::uint8_t> out(magic, magic + 8);
    put_u32(out, version);
    put_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), payload_.begin(), payload_.end());
    put_u32(out, crc32_of(out));
    return out;
  }

 private:
  std::vector<std::uint8_t> payload_;
};

class ArchiveReader {
 public:
  ArchiveReader(std::span<const std::uint8_t> bytes, const char (&magic)[8], std::uint32_t version,
                const char* what) {
    if (bytes.size() < kHeaderSize + kTrailerSize || std::memcmp(bytes.data(), magic, 8) != 0) {
      throw Error(ErrorKind::CorruptBundle, std::string(what) + ": bad magic or truncated header");
    }
    const auto found = get_u32(bytes.data() + 8);
    if (found != version) {
      throw Error(ErrorKind::VersionMismatch, std::string(what) + ": version " + std::to_string(found) +
                                                  ", expected " + std::to_string(version));
    }
    const auto body = bytes.first(bytes.size() - kTrailerSize);
    if (crc32_of(body) != get_u32(bytes.data() + body.size())) {
      throw Error(ErrorKind::CorruptBundle, std::string(what) + ": checksum mismatch (truncated or damaged)");
    }
    const auto manifest_len = get_u64(bytes.data() + 12);
    if (manifest_len > body.size() - kHeaderSize) {
      throw Error(ErrorKind::CorruptBundle, std::string(what) + ": manifest overruns file");
    }
    try {
      manifest = json::parse(body.begin() + kHeaderSize,
                             body.begin() + static_cast<std::ptrdiff_t>(kHeaderSize + manifest_len));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::CorruptBundle, std::string(what) + ": manifest is not valid JSON");
    }
    payload_ = body.subspan(kHeaderSize + manifest_len);
    what_ = what;
  }

  json manifest;

  // Values and shape of a named array; row-major unless stored column-major,
  // in which case values are returned in stored order.
  std::pair<std::vector<double>, std::vector<std::size_t>> array(const std::string& name) const {
    try {
      for (const auto& entry : manifest.at("arrays")) {
        if (entry.at("name") != name) continue;
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        std::size_t count = 1;
        for (auto s : shape) count *= s;
        const auto offset = entry.at("offset").get<std::size_t>();
        if (offset > payload_.size() || count > (payload_.size() - offset) / 8) {
          throw Error(ErrorKind::CorruptBundle, what_ + ": array '" + name + "' overruns payload");
        }
        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i) {
          values[i] = std::bit_cast<double>(get_u64(payload_.data() + offset + 8 * i));
        }
        return {std::move(values), shape};
      }
    } catch (const json::exception&) {
      throw Error(ErrorKind::CorruptBundle, what_ + ": malformed array table");
    }
    throw Error(ErrorKind::CorruptBundle, what_ + ": missing array '" + name + "'");
  }

  std::vector<double> vector(const std::string& name, std::size_t expected) const {
    auto [values, shape] = array(name);
    if (values.size() != expected) throw Error(ErrorKind::CorruptBundle, what_ + ": array '" + name + "' has wrong size");
    return values;
  }

  Matrix matrix(const std::string& name) const {
    auto [values, shape] = array(name);
    if (shape.size() != 2) throw Error(ErrorKind::CorruptBundle, what_ + ": array '" + name + "' is not 2-D");
    Matrix m(shape[0], shape[1]);
    std::copy(values.begin(), values.end(), m.data().begin());
    return m;
  }

  Matrix column_major_matrix(const std::string& name) const {
    auto [values, shape] = array(name);
    if (shape.size() != 2) throw Error(ErrorKind::CorruptBundle, what_ + ": array '" + name + "' is not 2-D");
    Matrix m(shape[0], shape[1]);
    for (std::size_t c = 0; c < shape[1]; ++c)
      for (std::size_t r = 0; r < shape[0]; ++r) m(r, c) = values[c * shape[0] + r];
    return m;
  }

 private:
  std::span<const std::uint8_t> payload_;
  std::string what_;
};

std::vector<double> column_major(const Matrix& m) {
  std::vector<double> out;
  out.reserve(m.rows() * m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c)
    for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(m(r, c));
  return out;
}

void add_detector(ArchiveWriter& w, const std::string& prefix, const ClassDetector& d) {
  w.add(prefix + ".basis", {d.basis.rows(), d.basis.cols()}, column_major(d.basis), "column_major");
  const double calibration[2] = {d.mean_error, d.std_error};
  w.add(prefix + ".calibration", {2}, calibration);
}

ClassDetector read_detector(const ArchiveReader& r, const std::string& prefix, std::size_t class_index,
                            bool calibrated) {
  ClassDetector d;
  d.class_index = class_index;
  d.basis = r.column_major_matrix(prefix + ".basis");
  const auto cal = r.vector(prefix + ".calibration", 2);
  d.mean_error = cal[0];
  d.std_error = cal[1];
  d.calibrated = calibrated;
  return d;
}

json train_config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
          {"beta1", c.beta1},                 {"beta2", c.beta2},           {"epsilon", c.epsilon},
          {"seed", c.seed},                   {"shuffle", c.shuffle},       {"hidden", c.hidden}};
}

TrainConfig train_config_from(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.shuffle = j.at("shuffle").get<bool>();
  c.hidden = j.at("hidden").get<std::size_t>();
  return c;
}

std::uint64_t hex_to_hash(const std::string& s) {
  std::uint64_t v = 0;
  if (s.size() != 16) throw Error(ErrorKind::CorruptBundle, "bad layout hash");
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw Error(ErrorKind::CorruptBundle, "bad layout hash");
  }
  return v;
}

}  // namespace

std::string hash_to_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<std::uint8_t> encode_features(const FeatureSet& set) {
  if (set.labels.size() != set.features.rows() || set.source_block.size() != set.features.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "one label and source block per feature row required");
  }
  ArchiveWriter w;
  w.manifest["format"] = "acorn-features";
  w.manifest["dtype"] = "f64le";
  w.manifest["rows"] = set.features.rows();
  w.manifest["cols"] = set.features.cols();
  w.manifest["layout_hash"] = hash_to_hex(set.layout_hash);
  w.manifest["label_table"] = set.label_table;
  w.manifest["labels"] = set.labels;
  w.manifest["source_block"] = set.source_block;
  w.manifest["arrays"] = json::array();
  w.add("features", {set.features.rows(), set.features.cols()}, set.features.data());
  return w.finish(kFeatureMagic, kFeatureFileVersion);
}

FeatureSet decode_features(std::span<const std::uint8_t> bytes) {
  ArchiveReader r(bytes, kFeatureMagic, kFeatureFileVersion, "feature file");
  try {
    FeatureSet set;
    set.layout_hash = hex_to_hash(r.manifest.at("layout_hash").get<std::string>());
    set.label_table = r.manifest.at("label_table").get<std::vector<std::string>>();
    set.labels = r.manifest.at("labels").get<std::vector<std::uint32_t>>();
    set.source_block = r.manifest.at("source_block").get<std::vector<std::uint64_t>>();
    set.features = r.matrix("features");
    if (set.labels.size() != set.features.rows() || set.source_block.size() != set.features.rows()) {
      throw Error(ErrorKind::CorruptBundle, "feature file: label count differs from row count");
    }
    for (auto l : set.labels) {
      if (l >= set.label_table.size()) throw Error(ErrorKind::CorruptBundle, "feature file: label index out of range");
    }
    return set;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptBundle, std::string("feature file: ") + e.what());
  }
}

void save_features(const std::filesystem::path& path, const FeatureSet& set) {
  write_file_bytes(path, encode_features(set));
}

FeatureSet load_features(const std::filesystem::path& path) { return decode_features(read_file_bytes(path)); }

void Bundle::require_layout(std::uint64_t feature_hash) const {
  if (feature_hash != layout_hash()) {
    throw Error(ErrorKind::LayoutMismatch, "features were computed under layout " + hash_to_hex(feature_hash) +
                                               ", bundle expects " + hash_to_hex(layout_hash()));
  }
}

std::vector<std::uint8_t> encode_bundle(const Bundle& b) {
  ArchiveWriter w;
  auto& m = w.manifest;
  m["format"] = "acorn-bundle";
  m["layout_hash"] = hash_to_hex(b.layout_hash());
  m["geometry"] = b.layout.geometry.to_string();
  m["vocab"] = json::parse(b.layout.vocab.to_json());
  m["feature_dim"] = b.layout.dimension();
  m["subseq_len"] = b.subseq_len;
  m["standardize"] = b.standardizer.enabled();
  m["train_config"] = train_config_json(b.train_config);
  m["arrays"] = json::array();

  w.add("standardizer.mean", {b.standardizer.dimension()}, b.standardizer.mean());
  w.add("standardizer.std", {b.standardizer.dimension()}, b.standardizer.stddev());
  if (b.model) {
    const auto& p = b.model->params;
    m["mlp"] = {{"labels", b.model->labels}, {"hidden", b.model->hidden()}, {"classes", b.model->classes()}};
    w.add("mlp.w1", {p.w1.rows(), p.w1.cols()}, p.w1.data());
    w.add("mlp.b1", {p.b1.size()}, p.b1);
    w.add("mlp.w2", {p.w2.rows(), p.w2.cols()}, p.w2.data());
    w.add("mlp.b2", {p.b2.size()}, p.b2);
  }
  if (b.detectors) {
    json classes = json::array();
    for (const auto& d : b.detectors->detectors) {
      classes.push_back({{"class", d.class_index}, {"rank", d.rank()}, {"calibrated", d.calibrated}});
      add_detector(w, "detector." + std::to_string(d.class_index), d);
    }
    m["detectors"] = {{"energy", b.detectors->energy}, {"alpha_grid", b.detectors->alpha_grid}, {"classes", classes}};
  }
  if (b.naive) {
    m["naive"] = {{"rank", b.naive->detector.rank()}, {"calibrated", b.naive->detector.calibrated}};
    add_detector(w, "naive", b.naive->detector);
  }
  return w.finish(kBundleMagic, kBundleVersion);
}

Bundle decode_bundle(std::span<const std::uint8_t> bytes) {
  ArchiveReader r(bytes, kBundleMagic, kBundleVersion, "bundle");
  const auto& m = r.manifest;
  try {
    Bundle b;
    b.layout.geometry = DramGeometry::parse(m.at("geometry").get<std::string>());
    b.layout.vocab = NgramVocabulary::from_json(m.at("vocab").dump());
    if (hash_to_hex(b.layout_hash()) != m.at("layout_hash").get<std::string>()) {
      throw Error(ErrorKind::CorruptBundle, "bundle: stored layout hash disagrees with its vocabulary/geometry");
    }
    const std::size_t dim = b.layout.dimension();
    b.subseq_len = m.at("subseq_len").get<std::size_t>();
    b.train_config = train_config_from(m.at("train_config"));
    b.standardizer = Standardizer(r.vector("standardizer.mean", dim), r.vector("standardizer.std", dim),
                                  m.at("standardize").get<bool>());
    if (m.contains("mlp")) {
      MlpModel model;
      model.labels = m["mlp"].at("labels").get<std::vector<std::string>>();
      model.params.w1 = r.matrix("mlp.w1");
      const std::size_t hidden = model.params.w1.cols();
      model.params.b1 = r.vector("mlp.b1", hidden);
      model.params.w2 = r.matrix("mlp.w2");
      model.params.b2 = r.vector("mlp.b2", model.labels.size());
      if (model.params.w1.rows() != dim || model.params.w2.rows() != hidden ||
          model.params.w2.cols() != model.labels.size()) {
        throw Error(ErrorKind::CorruptBundle, "bundle: classifier shapes are inconsistent");
      }
      b.model = std::move(model);
    }
    if (m.contains("detectors")) {
      DetectorBank bank;
      bank.energy = m["detectors"].at("energy").get<double>();
      bank.alpha_grid = m["detectors"].at("alpha_grid").get<std::vector<double>>();
      for (const auto& c : m["detectors"].at("classes")) {
        const auto w = c.at("class").get<std::size_t>();
        auto d = read_detector(r, "detector." + std::to_string(w), w, c.at("calibrated").get<bool>());
        if (d.dimension() != dim) throw Error(ErrorKind::CorruptBundle, "bundle: detector dimension mismatch");
        bank.detectors.push_back(std::move(d));
      }
      b.detectors = std::move(bank);
    }
    if (m.contains("naive")) {
      auto d = read_detector(r, "naive", 0, m["naive"].at("calibrated").get<bool>());
      if (d.dimension() != dim) throw Error(ErrorKind::CorruptBundle, "bundle: naive detector dimension mismatch");
      b.naive = NaiveDetector{std::move(d)};
    }
    return b;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptBundle, std::string("bundle manifest: ") + e.what());
  }
}

void save_bundle(const std::filesystem::path& path, const Bundle& bundle) {
  write_file_bytes(path, encode_bundle(bundle));
}

Bundle load_bundle(const std::filesystem::path& path) { return decode_bundle(read_file_bytes(path)); }

}  // namespace acorn

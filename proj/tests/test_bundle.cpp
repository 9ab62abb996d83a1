#include "acorn/bundle.hpp"
#include "acorn/error.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace acorn;

namespace {

ErrorKind decode_kind(std::span<const std::uint8_t> bytes) {
  try {
    decode_bundle(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("bundle round-trip preserves every decision") {
  const auto& run = fixture::small_run();
  const auto bytes = encode_bundle(run.bundle);
  const auto back = decode_bundle(bytes);
  CHECK(encode_bundle(back) == bytes);
  CHECK(back.layout.vocab == run.bundle.layout.vocab);
  CHECK(back.layout.geometry == run.bundle.layout.geometry);
  CHECK(back.standardizer == run.bundle.standardizer);
  CHECK(*back.model == *run.bundle.model);
  CHECK(*back.detectors == *run.bundle.detectors);
  CHECK(*back.naive == *run.bundle.naive);
  const auto a = evaluate_bundle(run.bundle, run.test, kDefaultAlphaGrid, false);
  const auto b = evaluate_bundle(back, run.test, kDefaultAlphaGrid, false);
  CHECK(reports_to_csv(a.reports) == reports_to_csv(b.reports));
  CHECK(curve_to_csv(a.curve) == curve_to_csv(b.curve));
}

TEST_CASE("damaged bundles are refused") {
  const auto bytes = encode_bundle(fixture::small_run().bundle);
  CHECK(decode_kind(std::span(bytes).first(bytes.size() / 2)) == ErrorKind::CorruptBundle);
  CHECK(decode_kind(std::span(bytes).first(5)) == ErrorKind::CorruptBundle);
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  CHECK(decode_kind(flipped) == ErrorKind::CorruptBundle);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(decode_kind(magic) == ErrorKind::CorruptBundle);
  auto version = bytes;
  version[8] = 99;
  CHECK(decode_kind(version) == ErrorKind::VersionMismatch);
}

TEST_CASE("feature files round-trip and carry the layout hash") {
  const auto& run = fixture::small_run();
  const auto dir = fixture::scratch("features");
  save_features(dir / "t.feat", run.test);
  const auto back = load_features(dir / "t.feat");
  CHECK(back == run.test);
  CHECK(back.layout_hash == run.bundle.layout_hash());
}

TEST_CASE("features from another layout are refused") {
  auto run = fixture::small_run();
  auto other = run.test;
  other.layout_hash ^= 1;
  try {
    evaluate_bundle(run.bundle, other, kDefaultAlphaGrid, false);
    FAIL("expected LayoutMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LayoutMismatch);
  }
}

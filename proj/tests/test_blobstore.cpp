// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <limits>

#include "feedforge/blobstore.hpp"
#include "feedforge/features.hpp"
#include "feedforge/rng.hpp"
#include "support/temp_dir.hpp"

using namespace feedforge;
using fftest::TempDir;

TEST_CASE("put addresses content by its SHA-256", "[blobstore]") {
  TempDir dir;
  BlobStore store(dir.path());
  BlobRef ref = store.put(std::string_view("abc"));
  CHECK(ref.address ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(ref.size == 3);
  CHECK(store.contains(ref.address));
  // sharded layout aa/bb/<full>
  CHECK(std::filesystem::exists(dir.path() / "ba" / "78" / ref.address));
}

TEST_CASE("re-putting identical bytes is a no-op", "[blobstore]") {
  TempDir dir;
  BlobStore store(dir.path());
  BlobRef first = store.put(std::string_view("same-bytes"));
  BlobRef second = store.put(std::string_view("same-bytes"));
  CHECK(first == second);
  size_t files = 0;
  for (auto it = std::filesystem::recursive_directory_iterator(dir.path());
       it != std::filesystem::recursive_directory_iterator(); ++it)
    if (it->is_regular_file()) ++files;
  CHECK(files == 1);
}

TEST_CASE("empty puts are rejected", "[blobstore]") {
  TempDir dir;
  BlobStore store(dir.path());
  CHECK_THROWS_AS(store.put(std::string_view("")), Error);
}

TEST_CASE("get verifies and round-trips", "[blobstore]") {
  TempDir dir;
  BlobStore store(dir.path());

  SECTION("unknown refs are NotFound") {
    try {
      store.get(std::string(64, '0'));
      FAIL("expected NotFound");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::not_found);
    }
  }

  SECTION("get after put returns the original bytes") {
    BlobRef ref = store.put(std::string_view("payload"));
    Bytes got = store.get(ref);
    CHECK(std::string(got.begin(), got.end()) == "payload");
  }

  SECTION("10k random blobs round-trip") {
    Rng rng(5150);
    size_t matched = 0;
    for (int i = 0; i < 10'000; ++i) {
      Bytes blob(1 + rng.below(300));
      for (auto& b : blob) b = static_cast<uint8_t>(rng.below(256));
      BlobRef ref = store.put(std::span<const uint8_t>(blob));
      if (store.get(ref) == blob) ++matched;
    }
    CHECK(matched == 10'000);
  }

  SECTION("a flipped byte on disk raises IntegrityError") {
    BlobRef ref = store.put(std::string_view("fragile"));
    auto path = store.path_for(ref.address);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    char c;
    f.read(&c, 1);
    f.seekp(0);
    c = static_cast<char>(c ^ 0x01);
    f.write(&c, 1);
    f.close();
    try {
      store.get(ref);
      FAIL("expected IntegrityError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::integrity_error);
    }
  }
}

TEST_CASE("feature vectors encode to the FFFV layout", "[features]") {
  FeatureVector fv;
  fv.observable_id = std::string(62, '0') + "ab";
  fv.format_version = 1;
  fv.values = {1.0f, 0.5f};
  Bytes bytes = encode_features(fv);
  REQUIRE(bytes.size() == 4 + 2 + 4 + 32 + 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FFFV");
  CHECK(bytes[4] == 1);  // version u16 LE
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);  // dims u32 LE
  CHECK(bytes[7] == 0);
  // digest bytes: 30 zero bytes then 0xab
  CHECK(bytes[10 + 30] == 0x00);
  CHECK(bytes[10 + 31] == 0xab);
  // 1.0f = 00 00 80 3f, 0.5f = 00 00 00 3f little-endian
  CHECK(bytes[42] == 0x00);
  CHECK(bytes[43] == 0x00);
  CHECK(bytes[44] == 0x80);
  CHECK(bytes[45] == 0x3f);
  CHECK(bytes[46] == 0x00);
  CHECK(bytes[47] == 0x00);
  CHECK(bytes[48] == 0x00);
  CHECK(bytes[49] == 0x3f);
}

TEST_CASE("feature codec rejects invalid vectors", "[features]") {
  FeatureVector fv;
  fv.observable_id = std::string(64, 'a');

  SECTION("zero dims") {
    try {
      encode_features(fv);
      FAIL("expected EncodeError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::encode_error);
    }
  }
  SECTION("NaN and infinity") {
    fv.values = {0.0f, std::numeric_limits<float>::quiet_NaN()};
    CHECK_THROWS_AS(encode_features(fv), Error);
    fv.values = {std::numeric_limits<float>::infinity()};
    CHECK_THROWS_AS(encode_features(fv), Error);
  }
  SECTION("bad observable id") {
    fv.observable_id = "nope";
    fv.values = {1.0f};
    CHECK_THROWS_AS(encode_features(fv), Error);
  }
}

TEST_CASE("feature decode errors carry offsets", "[features]") {
  FeatureVector fv;
  fv.observable_id = std::string(64, 'b');
  fv.values = {1.0f, 2.0f, 3.0f};
  Bytes good = encode_features(fv);

  SECTION("bad magic at offset 0") {
    Bytes bad = good;
    bad[0] = 'X';
    try {
      decode_features(bad);
      FAIL("expected DecodeError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::decode_error);
      CHECK(e.offset() == 0);
    }
  }
  SECTION("truncated payload") {
    Bytes bad(good.begin(), good.end() - 5);
    try {
      decode_features(bad);
      FAIL("expected DecodeError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::decode_error);
      CHECK(e.has_offset());
    }
  }
  SECTION("trailing garbage") {
    Bytes bad = good;
    bad.push_back(0x00);
    CHECK_THROWS_AS(decode_features(bad), Error);
  }
}

TEST_CASE("encode/decode is the identity on random vectors", "[features][property]") {
  Rng rng(86);
  for (int i = 0; i < 200; ++i) {
    FeatureVector fv;
    Bytes id_bytes(32);
    for (auto& b : id_bytes) b = static_cast<uint8_t>(rng.below(256));
    fv.observable_id = hex_encode(id_bytes);
    size_t dims = 1 + rng.below(64);
    for (size_t d = 0; d < dims; ++d)
      fv.values.push_back(static_cast<float>(rng.next_unit() * 200.0 - 100.0));
    FeatureVector back = decode_features(encode_features(fv));
    REQUIRE(back.observable_id == fv.observable_id);
    REQUIRE(back.format_version == fv.format_version);
    REQUIRE(back.values.size() == fv.values.size());
    for (size_t d = 0; d < dims; ++d)
      REQUIRE(back.values[d] == fv.values[d]);
  }
}

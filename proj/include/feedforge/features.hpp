// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"

namespace feedforge {

/// Feature-store payload: a fixed-width float32 vector keyed to an
/// observable.
struct FeatureVector {
  std::string observable_id;  // 64-char lowercase hex
  uint16_t format_version = 1;
  std::vector<float> values;

  uint32_t dims() const { return static_cast<uint32_t>(values.size()); }
};

// FFFV layout, little-endian:
//   magic "FFFV" | u16 format_version | u32 dims |
//   32-byte observable digest | dims x float32
inline constexpr size_t kFeatureHeaderSize = 4 + 2 + 4 + 32;

inline Bytes encode_features(const FeatureVector& fv) {
  if (fv.values.empty())
    raise(Errc::encode_error, "feature vector needs dims >= 1");
  if (!is_hex_digest(fv.observable_id))
    raise(Errc::encode_error, "observable_id is not a sha256 hex digest");
  for (float v : fv.values)
    if (!std::isfinite(v))
      raise(Errc::encode_error, "feature values must be finite");
  Bytes out;
  out.reserve(kFeatureHeaderSize + 4 * fv.values.size());
  out.insert(out.end(), {'F', 'F', 'F', 'V'});
  put_u16(out, fv.format_version);
  put_u32(out, fv.dims());
  Bytes digest = hex_decode(fv.observable_id);
  out.insert(out.end(), digest.begin(), digest.end());
  for (float v : fv.values) put_f32(out, v);
  return out;
}

inline FeatureVector decode_features(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != "FFFV") raise(Errc::decode_error, "bad feature magic", 0);
  FeatureVector fv;
  fv.format_version = r.u16();
  uint32_t dims = r.u32();
  if (dims == 0) raise(Errc::decode_error, "dims must be >= 1", 6);
  fv.observable_id = hex_encode(r.take(32));
  fv.values.reserve(dims);
  for (uint32_t i = 0; i < dims; ++i) {
    size_t at = r.offset();
    float v = r.f32();
    if (!std::isfinite(v))
      raise(Errc::decode_error, "non-finite feature value", at);
    fv.values.push_back(v);
  }
  if (!r.done())
    raise(Errc::decode_error, "trailing bytes after feature payload", r.offset());
  return fv;
}

}  // namespace feedforge

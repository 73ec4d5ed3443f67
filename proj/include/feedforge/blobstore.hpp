// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"

namespace feedforge {

struct BlobRef {
  std::string address;  // 64-char lowercase hex, SHA-256 of content
  uint64_t size = 0;

  bool operator==(const BlobRef&) const = default;
};

/// Content-addressed local store for feature vectors and binary blobs.
/// Paths shard two levels by hash prefix (aa/bb/<full>); writes go through
/// temp-then-rename so a crash never leaves a partial blob visible, and
/// putting identical bytes twice is a no-op.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "tmp");
  }

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path path_for(std::string_view address) const {
    if (!is_hex_digest(address))
      raise(Errc::invalid_argument, "bad blob address '" + std::string(address) + "'");
    return root_ / address.substr(0, 2) / address.substr(2, 2) /
           std::string(address);
  }

  BlobRef put(std::span<const uint8_t> bytes) {
    if (bytes.empty())
      raise(Errc::invalid_argument, "empty blobs are not storable");
    BlobRef ref{sha256_hex(bytes), bytes.size()};
    std::filesystem::path dest = path_for(ref.address);
    if (std::filesystem::exists(dest)) return ref;  // idempotent by content
    std::filesystem::create_directories(dest.parent_path());
    std::filesystem::path tmp =
        root_ / "tmp" /
        (ref.address + "." + std::to_string(tmp_counter_.fetch_add(1)));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out.is_open()) raise(Errc::io_error, "cannot write " + tmp.string());
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
      if (!out.good()) {
        out.close();
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        raise(Errc::io_error, "short write to " + tmp.string());
      }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, dest, ec);
    if (ec) {
      // A racing writer of the same content may have won; that's fine.
      std::filesystem::remove(tmp);
      if (!std::filesystem::exists(dest))
        raise(Errc::io_error, "cannot publish blob " + ref.address);
    }
    return ref;
  }

  BlobRef put(std::string_view bytes) { return put(as_bytes(bytes)); }

  bool contains(std::string_view address) const {
    return std::filesystem::exists(path_for(address));
  }

  uint64_t size_of(std::string_view address) const {
    std::filesystem::path p = path_for(address);
    if (!std::filesystem::exists(p))
      raise(Errc::not_found, "no blob " + std::string(address));
    return std::filesystem::file_size(p);
  }

  /// Read and verify: the returned bytes always hash to the address.
  Bytes get(std::string_view address) const {
    std::filesystem::path p = path_for(address);
    std::ifstream in(p, std::ios::binary);
    if (!in.is_open())
      raise(Errc::not_found, "no blob " + std::string(address));
    Bytes bytes((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
    if (sha256_hex(bytes) != address)
      raise(Errc::integrity_error,
            "blob " + std::string(address) + " fails its checksum");
    return bytes;
  }

  Bytes get(const BlobRef& ref) const {
    Bytes bytes = get(std::string_view(ref.address));
    if (bytes.size() != ref.size)
      raise(Errc::integrity_error, "blob " + ref.address + " size mismatch");
    return bytes;
  }

 private:
  std::filesystem::path root_;
  std::atomic<uint64_t> tmp_counter_{0};
};

}  // namespace feedforge

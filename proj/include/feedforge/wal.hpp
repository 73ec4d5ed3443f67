// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"

namespace feedforge::wal {

// Record layout, little-endian:
//   [u32 payload_len][u8 opcode][payload][u32 crc32(len_bytes + opcode + payload)]
inline constexpr uint8_t kOpEnqueue = 1;
inline constexpr uint8_t kOpDelete = 2;
inline constexpr uint8_t kOpDlqMove = 3;
inline constexpr uint8_t kOpReceive = 4;

inline constexpr size_t kFrameOverhead = 4 + 1 + 4;
// Payload sanity cap: 1 MiB queue body plus enqueue header.
inline constexpr size_t kMaxPayload = (1u << 20) + 64;

struct Record {
  uint8_t opcode = 0;
  Bytes payload;
  uint64_t offset = 0;  // byte offset of the record start in the file
};

inline Bytes encode_record(uint8_t opcode, std::span<const uint8_t> payload) {
  Bytes out;
  out.reserve(kFrameOverhead + payload.size());
  put_u32(out, static_cast<uint32_t>(payload.size()));
  out.push_back(opcode);
  out.insert(out.end(), payload.begin(), payload.end());
  uint32_t crc = crc32_of(std::span<const uint8_t>(out.data(), out.size()));
  put_u32(out, crc);
  return out;
}

struct ScanResult {
  std::vector<Record> records;
  uint64_t valid_bytes = 0;  // length of the intact prefix
};

/// Read every intact record. A torn tail (truncated final record, or a
/// final record failing its checksum) is dropped; a bad record with data
/// after it means real corruption and raises CorruptLog with the offset.
inline ScanResult scan_file(const std::filesystem::path& path) {
  ScanResult result;
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) return result;  // absent file == empty log
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const uint8_t*>(raw.data());
  const size_t size = raw.size();
  size_t pos = 0;
  while (pos < size) {
    if (size - pos < kFrameOverhead) break;  // torn tail
    uint32_t len = static_cast<uint32_t>(data[pos]) |
                   (static_cast<uint32_t>(data[pos + 1]) << 8) |
                   (static_cast<uint32_t>(data[pos + 2]) << 16) |
                   (static_cast<uint32_t>(data[pos + 3]) << 24);
    size_t needed = kFrameOverhead + len;
    if (len > kMaxPayload) {
      if (size - pos < needed) break;  // implausible torn length field
      raise(Errc::corrupt_log, "record length out of range", pos);
    }
    if (size - pos < needed) break;  // torn tail
    uint32_t stored = static_cast<uint32_t>(data[pos + needed - 4]) |
                      (static_cast<uint32_t>(data[pos + needed - 3]) << 8) |
                      (static_cast<uint32_t>(data[pos + needed - 2]) << 16) |
                      (static_cast<uint32_t>(data[pos + needed - 1]) << 24);
    uint32_t actual = crc32_of({data + pos, 5 + len});
    if (stored != actual) {
      if (pos + needed == size) break;  // torn final record
      raise(Errc::corrupt_log, "record checksum mismatch", pos);
    }
    Record rec;
    rec.opcode = data[pos + 4];
    rec.payload.assign(data + pos + 5, data + pos + 5 + len);
    rec.offset = pos;
    result.records.push_back(std::move(rec));
    pos += needed;
  }
  result.valid_bytes = pos;
  return result;
}

/// Append-only writer. A failed or short write is rolled back by
/// truncating to the previous logical size, so no partial record is ever
/// left behind an apparently successful append.
class Writer {
 public:
  Writer() = default;

  Writer(const std::filesystem::path& path, uint64_t logical_size,
         bool fsync_on_append) {
    open(path, logical_size, fsync_on_append);
  }

  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  Writer(Writer&& other) noexcept { *this = std::move(other); }
  Writer& operator=(Writer&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = other.fd_;
      size_ = other.size_;
      fsync_ = other.fsync_;
      other.fd_ = -1;
    }
    return *this;
  }

  ~Writer() { close(); }

  void open(const std::filesystem::path& path, uint64_t logical_size,
            bool fsync_on_append) {
    close();
    fsync_ = fsync_on_append;
    if (path.has_parent_path())
      std::filesystem::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0)
      raise(Errc::io_error, "cannot open WAL " + path.string() + ": " +
                                std::strerror(errno));
    // Drop any torn tail so new appends start at the intact prefix.
    if (::ftruncate(fd_, static_cast<off_t>(logical_size)) != 0) {
      int err = errno;
      close();
      raise(Errc::io_error, std::string("WAL truncate failed: ") + std::strerror(err));
    }
    if (::lseek(fd_, 0, SEEK_END) < 0) {
      close();
      raise(Errc::io_error, "WAL seek failed");
    }
    size_ = logical_size;
  }

  bool is_open() const { return fd_ >= 0; }
  uint64_t size() const { return size_; }

  uint64_t append(uint8_t opcode, std::span<const uint8_t> payload) {
    if (fd_ < 0) raise(Errc::io_error, "WAL is not open");
    Bytes frame = encode_record(opcode, payload);
    size_t written = 0;
    while (written < frame.size()) {
      ssize_t n = ::write(fd_, frame.data() + written, frame.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        int err = errno;
        [[maybe_unused]] int rc = ::ftruncate(fd_, static_cast<off_t>(size_));
        [[maybe_unused]] off_t at = ::lseek(fd_, 0, SEEK_END);
        raise(Errc::io_error, std::string("WAL append failed: ") + std::strerror(err));
      }
      written += static_cast<size_t>(n);
    }
    if (fsync_) ::fdatasync(fd_);
    uint64_t at = size_;
    size_ += frame.size();
    return at;
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  uint64_t size_ = 0;
  bool fsync_ = false;
};

}  // namespace feedforge::wal

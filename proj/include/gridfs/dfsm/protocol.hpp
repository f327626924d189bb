#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gridfs/bytes.hpp"
#include "gridfs/error.hpp"
#include "gridfs/wire/fieldmap.hpp"

namespace gridfs::dfsm {

enum class Op : std::uint8_t {
  Read = 1,
  Write = 2,
  Flush = 3,
  Lock = 4,
  Unlock = 5,
  Seek = 6,
  Close = 7,
  SetLength = 8,
  Stat = 9,
};

const char* op_name(Op op) noexcept;

enum class SeekOrigin : std::uint8_t { Begin = 0, CurrentHint = 1, End = 2 };

struct FileStat {
  std::uint64_t size{0};
  bool exists{false};
  bool operator==(const FileStat&) const = default;
};

struct DfsRequest {
  std::uint64_t request_id{0};
  Op op{Op::Stat};
  std::string path;
  std::uint64_t offset{0};
  std::uint64_t length{0};
  Bytes data;
  SeekOrigin seek_origin{SeekOrigin::Begin};
  std::uint64_t lock_id{0};

  wire::FieldMap to_fields() const;
  static DfsRequest from_fields(const wire::FieldMap& m);
};

struct DfsResponse {
  std::uint64_t request_id{0};
  Errc status{Errc::Ok};
  std::string message;
  Bytes data;
  std::uint64_t length{0};
  std::uint64_t lock_id{0};
  FileStat stat;

  wire::FieldMap to_fields() const;
  static DfsResponse from_fields(const wire::FieldMap& m);
};

// Client-side seek arithmetic over a stat snapshot; the server keeps no
// positions. delta must be <= 0 for End. Throws NegativeOffset.
std::uint64_t resolve_seek(SeekOrigin origin, std::int64_t delta, const FileStat& stat,
                           std::uint64_t current_position = 0);

}  // namespace gridfs::dfsm

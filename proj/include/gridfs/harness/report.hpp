#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridfs/wire/fieldmap.hpp"

namespace gridfs::harness {

// One line of a report: a scenario cell averaged over its repeats. Every
// field is always present; only seconds and mbps vary between runs.
struct Record {
  std::string scenario;
  std::vector<std::pair<std::string, std::string>> params;
  std::uint64_t bytes{0};  // per run
  double seconds{0};       // mean over runs, microsecond resolution
  double mbps{0};          // bytes * 8 / (1e6 * seconds), 0.001 resolution
  bool pass{false};
  std::uint32_t runs{0};
  std::vector<std::uint64_t> stream_bytes;  // last run
  std::string detail;                       // first failure, if any

  std::string param(std::string_view key) const;
  wire::FieldMap to_fields() const;
  static Record from_fields(const wire::FieldMap& m);
  bool operator==(const Record&) const = default;
};

namespace record_tag {
inline constexpr wire::FieldMap::Tag kScenario = 1;
inline constexpr wire::FieldMap::Tag kParams = 2;
inline constexpr wire::FieldMap::Tag kBytes = 3;
inline constexpr wire::FieldMap::Tag kMicros = 4;
inline constexpr wire::FieldMap::Tag kMilliMbps = 5;
inline constexpr wire::FieldMap::Tag kPass = 6;
inline constexpr wire::FieldMap::Tag kRuns = 7;
inline constexpr wire::FieldMap::Tag kStreamBytes = 8;
inline constexpr wire::FieldMap::Tag kDetail = 9;
}  // namespace record_tag

// Hex of the encoded FieldMap, no newline.
std::string encode_record_line(const Record& r);
Record decode_record_line(std::string_view line);

void write_records(const std::filesystem::path& file, const std::vector<Record>& records);
std::vector<Record> read_records(const std::filesystem::path& file);
std::string render_text(const std::vector<Record>& records);

}  // namespace gridfs::harness

#include "gridfs/harness/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

#include "gridfs/error.hpp"

namespace fs = std::filesystem;

namespace gridfs::harness {

using wire::FieldMap;
namespace rt = record_tag;

std::string Record::param(std::string_view key) const {
  for (const auto& [k, v] : params) {
    if (k == key) return v;
  }
  return {};
}

FieldMap Record::to_fields() const {
  std::vector<FieldMap> ps;
  for (const auto& [k, v] : params) ps.push_back(FieldMap{}.set_str(1, k).set_str(2, v));
  std::vector<FieldMap> sb;
  for (auto b : stream_bytes) sb.push_back(FieldMap{}.set_u64(1, b));
  FieldMap m;
  m.set_str(rt::kScenario, scenario)
      .set(rt::kParams, wire::encode_list(ps))
      .set_u64(rt::kBytes, bytes)
      .set_u64(rt::kMicros, static_cast<std::uint64_t>(std::llround(seconds * 1e6)))
      .set_u64(rt::kMilliMbps, static_cast<std::uint64_t>(std::llround(mbps * 1e3)))
      .set_u64(rt::kPass, pass ? 1 : 0)
      .set_u64(rt::kRuns, runs)
      .set(rt::kStreamBytes, wire::encode_list(sb))
      .set_str(rt::kDetail, detail);
  return m;
}

Record Record::from_fields(const FieldMap& m) {
  Record r;
  r.scenario = m.require_str(rt::kScenario);
  for (const auto& p : wire::decode_list(m.require(rt::kParams))) {
    r.params.emplace_back(p.require_str(1), p.require_str(2));
  }
  r.bytes = m.require_u64(rt::kBytes);
  r.seconds = static_cast<double>(m.require_u64(rt::kMicros)) / 1e6;
  r.mbps = static_cast<double>(m.require_u64(rt::kMilliMbps)) / 1e3;
  r.pass = m.require_u64(rt::kPass) != 0;
  r.runs = static_cast<std::uint32_t>(m.require_u64(rt::kRuns));
  for (const auto& s : wire::decode_list(m.require(rt::kStreamBytes))) {
    r.stream_bytes.push_back(s.require_u64(1));
  }
  r.detail = m.require_str(rt::kDetail);
  return r;
}

std::string encode_record_line(const Record& r) { return to_hex(r.to_fields().encode()); }

Record decode_record_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  try {
    return Record::from_fields(FieldMap::decode(from_hex(line)));
  } catch (const Error& e) {
    throw Error(Errc::MalformedDocument, "bad report line: " + e.detail());
  }
}

void write_records(const fs::path& file, const std::vector<Record>& records) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + file.string());
  for (const auto& r : records) out << encode_record_line(r) << "\n";
}

std::vector<Record> read_records(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::NoSuchFile, file.string());
  std::vector<Record> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(decode_record_line(line));
  }
  return out;
}

std::string render_text(const std::vector<Record>& records) {
  std::string out = fmt::format("{:<10} {:<34} {:>12} {:>10} {:>10} {:>4}  {}\n", "scenario",
                                "params", "bytes", "seconds", "Mbps", "runs", "result");
  for (const auto& r : records) {
    std::string ps;
    for (const auto& [k, v] : r.params) ps += (ps.empty() ? "" : " ") + k + "=" + v;
    out += fmt::format("{:<10} {:<34} {:>12} {:>10.4f} {:>10.3f} {:>4}  {}{}\n", r.scenario, ps,
                       r.bytes, r.seconds, r.mbps, r.runs, r.pass ? "pass" : "FAIL",
                       r.detail.empty() ? "" : " (" + r.detail + ")");
  }
  return out;
}

}  // namespace gridfs::harness

#include "gridfs/ftsm/report.hpp"

#include <fmt/format.h>

namespace gridfs::ftsm {

ThroughputReport throughput_report(std::uint64_t bytes, double seconds,
                                   std::vector<std::uint64_t> stream_bytes) {
  ThroughputReport r;
  r.bytes = bytes;
  r.seconds = seconds;
  r.mbps = (bytes == 0 || seconds <= 0) ? 0.0 : static_cast<double>(bytes) * 8.0 / (1e6 * seconds);
  r.stream_bytes = std::move(stream_bytes);
  return r;
}

std::string ThroughputReport::to_string() const {
  std::string s = fmt::format("bytes={} seconds={:.3f} mbps={:.2f}", bytes, seconds, mbps);
  for (std::size_t i = 0; i < stream_bytes.size(); ++i) {
    s += fmt::format(" stream{}={}", i, stream_bytes[i]);
  }
  return s;
}

}  // namespace gridfs::ftsm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gridfs::ftsm {

struct ThroughputReport {
  std::uint64_t bytes{0};
  double seconds{0};
  double mbps{0};  // bytes * 8 / (1e6 * seconds)
  std::vector<std::uint64_t> stream_bytes;

  std::string to_string() const;
};

ThroughputReport throughput_report(std::uint64_t bytes, double seconds,
                                   std::vector<std::uint64_t> stream_bytes = {});

}  // namespace gridfs::ftsm

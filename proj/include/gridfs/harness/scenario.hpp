#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gridfs/harness/cluster.hpp"
#include "gridfs/harness/report.hpp"
#include "gridfs/wire/session.hpp"

namespace gridfs::harness {

struct ScenarioOptions {
  unsigned repeats{3};
  // transfer
  std::vector<std::uint8_t> stream_counts{1, 2, 4, 8};
  std::uint64_t transfer_bytes{16ull << 20};
  wire::SecurityMode security{wire::SecurityMode::NonSecure};
  std::uint32_t buffer_size{262144};
  // crypt
  std::vector<std::size_t> worker_counts{1, 2, 3};
  std::vector<std::string> ciphers{"aes128"};
  std::uint64_t crypt_bytes{8ull << 20};
  std::uint64_t block_size{1ull << 20};
  // pi
  std::uint64_t pi_digits{1024};
  // resume
  std::uint64_t resume_bytes{32ull << 20};
};

inline constexpr std::string_view kScenarioIds[] = {"transfer", "crypt", "pi", "resume"};

// Runs "transfer", "crypt", "pi", "resume" or "all". Failures are recorded,
// not thrown; see require_pass.
std::vector<Record> run_scenario(Cluster& cluster, std::string_view id,
                                 const ScenarioOptions& options);

// Throws ScenarioFailed naming the first failing record.
void require_pass(const std::vector<Record>& records);

}  // namespace gridfs::harness

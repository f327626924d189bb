#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridfs/cryptengine/block.hpp"
#include "gridfs/net/client.hpp"
#include "gridfs/taskexec/builtins.hpp"

namespace gridfs::cryptengine {

// One block's work order. Only encryption runs on workers; decryption
// happens in reassemble.
struct CryptTask {
  CipherParams params;
  std::string source_node;  // host:port serving the plaintext over DFSM
  std::string source_path;
  std::string dest_node;  // host:port receiving the block file
  std::string dest_path;
  std::uint64_t offset{0};
  std::uint64_t length{0};
  std::uint64_t part_num{0};
  net::Credentials creds;  // delegated by the submitter
  wire::SecurityMode security{wire::SecurityMode::NonSecure};
  std::uint32_t buffer_size{wire::kDefaultBufferSize};

  wire::FieldMap to_fields() const;
  static CryptTask from_fields(const wire::FieldMap& m);
};

struct CryptTaskResult {
  std::uint64_t part_num{0};
  std::uint64_t cipher_length{0};
  crypto::Md5Digest md5{};

  wire::FieldMap to_fields() const;
  static CryptTaskResult from_fields(const wire::FieldMap& m);
};

// Streams the range from the source through the cipher into the destination
// block file, header written last. Buffers stay at the negotiated size.
CryptTaskResult run_crypt_task(const CryptTask& task);

// Runs one work order on a node over a CRYPT session.
CryptTaskResult run_remote_crypt(const net::Endpoint& worker, const net::Credentials& creds,
                                 const net::ClientOptions& copts, const CryptTask& task);

inline constexpr std::string_view kCryptBuiltin = "crypt_block";
void register_builtins(taskexec::BuiltinRegistry& registry);

// Largest buffer footprint a single crypt task reached since the last reset.
namespace gauge {
void reset();
std::size_t peak();
}  // namespace gauge

struct DistributeOptions {
  net::Endpoint distributor;
  std::string source;  // sandbox path on the distributor
  std::vector<net::Endpoint> workers;
  std::optional<net::Endpoint> collector;
  CipherParams params;
  std::uint64_t block_size{kDefaultBlockSize};
  std::string store_dir{"blocks"};
  net::Credentials creds;
  net::ClientOptions client;
};

struct DistributeReport {
  PlacementMap map;
  std::string manifest_path;
  std::vector<std::string> failed_workers;
};

// Round-robin over workers, one taskexec set per worker. Blocks of failed
// workers move to the survivors; NoWorkers once none are left. The manifest
// is written beside the source on the distributor.
DistributeReport distribute(const DistributeOptions& opts);

PlacementMap read_manifest(const net::Endpoint& distributor, const std::string& path,
                           const net::Credentials& creds, const net::ClientOptions& copts = {});

// Pulls every block, verifies and decrypts it, and renames the finished file
// into place. Throws MissingBlock or IntegrityMismatch naming the part; no
// output is left behind on failure.
void reassemble(const PlacementMap& map, const CipherParams& params,
                const std::filesystem::path& destination, const net::Credentials& creds,
                const net::ClientOptions& copts = {});

}  // namespace gridfs::cryptengine

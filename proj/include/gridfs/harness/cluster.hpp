#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "gridfs/harness/topology.hpp"
#include "gridfs/net/client.hpp"

namespace gridfs::harness {

struct ClusterOptions {
  std::filesystem::path gridfs_bin;  // the `gridfs` executable
  std::filesystem::path scratch;     // empty: a fresh directory under the temp dir
  std::string log_level{"warn"};
  std::uint32_t buffer_cap{262144};
  std::chrono::milliseconds startup_timeout{std::chrono::seconds(15)};
  bool keep_scratch{false};
};

// K `gridfs serve` child processes on loopback. Each node has its own
// storage and work roots; all share one accounts directory and credential
// file holding the built-in administrator.
class Cluster {
 public:
  // Throws SpawnFailed.
  static Cluster spawn(const TopologyPlan& plan, ClusterOptions options);

  Cluster(Cluster&&) noexcept;
  Cluster& operator=(Cluster&&) noexcept;
  ~Cluster();

  std::size_t size() const { return nodes_.size(); }
  const TopologyPlan& plan() const { return plan_; }
  net::Endpoint endpoint(std::size_t i) const;
  std::vector<net::Endpoint> endpoints(const std::vector<std::size_t>& indices) const;
  const net::Credentials& credentials() const { return creds_; }
  // The administrator's sandbox on node i.
  std::filesystem::path sandbox(std::size_t i) const;
  const std::filesystem::path& scratch() const { return scratch_; }

  // Sends `sig` and waits for the process to exit.
  void stop_node(std::size_t i, int sig);
  // Starts node i again on its previous port.
  void restart_node(std::size_t i);
  bool running(std::size_t i) const;
  void teardown();

 private:
  struct Node {
    std::filesystem::path dir;
    std::filesystem::path config;
    std::uint16_t port{0};
    pid_t pid{-1};
  };
  Cluster() = default;
  void launch(Node& n, std::uint16_t port);

  TopologyPlan plan_;
  ClusterOptions options_;
  std::filesystem::path scratch_;
  bool owns_scratch_{false};
  net::Credentials creds_;
  std::vector<Node> nodes_;
};

}  // namespace gridfs::harness

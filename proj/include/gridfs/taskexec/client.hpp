#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridfs/dfsm/client.hpp"
#include "gridfs/net/client.hpp"
#include "gridfs/taskexec/manager.hpp"
#include "gridfs/taskexec/spec.hpp"

namespace gridfs::taskexec {

struct SetHandle {
  std::string set_id;
  std::vector<TaskSpec> tasks;
};

// One authenticated TASK session; submit and collect reuse it.
class TaskClient {
 public:
  TaskClient(net::Endpoint endpoint, net::Credentials creds, net::ClientOptions options = {},
             dfsm::RetryPolicy retry = {});

  // Digests dependencies locally, submits, stages them over FTSM and starts
  // the set. Throws PermissionDenied (nothing staged) or StagingFailed (the
  // server keeps no trace of the set).
  SetHandle submit(std::vector<TaskSpec> tasks);
  SetSnapshot status(const SetHandle& handle);
  // Waits for every task, fetches the result array, pulls outputs of OK
  // tasks into out_dir (skipped when empty) and releases the set. Lost
  // connections are re-established within the retry policy.
  std::vector<TaskResult> collect(const SetHandle& handle, const std::filesystem::path& out_dir = {},
                                  std::chrono::milliseconds poll = std::chrono::milliseconds(20));

  net::Session& session() { return *session_; }
  int reconnects() const { return reconnects_; }

 private:
  void reconnect();
  wire::FieldMap status_request(const std::string& set_id, std::uint64_t action);

  net::Endpoint endpoint_;
  net::Credentials creds_;
  net::ClientOptions options_;
  dfsm::RetryPolicy retry_;
  std::optional<net::Session> session_;
  int reconnects_{0};
};

std::vector<TaskResult> run_tasks(const net::Endpoint& ep, const net::Credentials& creds,
                                  const net::ClientOptions& opts, std::vector<TaskSpec> tasks,
                                  const std::filesystem::path& out_dir = {});

// Splits positions 1..digits over the nodes, runs pi_hex_digits on each and
// concatenates the pieces in order.
std::string distributed_pi(const std::vector<net::Endpoint>& nodes, const net::Credentials& creds,
                           const net::ClientOptions& opts, std::uint64_t digits);

}  // namespace gridfs::taskexec

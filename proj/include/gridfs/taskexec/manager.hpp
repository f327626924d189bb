#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gridfs/audit.hpp"
#include "gridfs/net/channel.hpp"
#include "gridfs/perms/accounts.hpp"
#include "gridfs/secchan/crypto.hpp"
#include "gridfs/taskexec/builtins.hpp"
#include "gridfs/taskexec/spec.hpp"

namespace gridfs::taskexec {

enum class SetState : std::uint8_t { Staging = 1, Running = 2, Done = 3, Collected = 4 };
const char* set_state_name(SetState s) noexcept;

struct SetSnapshot {
  SetState state{SetState::Staging};
  std::vector<TaskStatus> statuses;
};

struct TaskManagerOptions {
  std::filesystem::path work_root;
  unsigned workers{0};  // 0: logical CPU count
  std::chrono::milliseconds retention{std::chrono::minutes(10)};
};

// Server-side task sets. Each set owns <work_root>/<set_id>; tasks of a set
// only see their own directory. Unknown, foreign, collected and expired ids
// all answer SetExpired.
class TaskManager {
 public:
  TaskManager(TaskManagerOptions options, const BuiltinRegistry& registry,
              AuditSink* audit = nullptr);
  ~TaskManager();
  TaskManager(const TaskManager&) = delete;
  TaskManager& operator=(const TaskManager&) = delete;

  // EXECUTION is checked before anything touches the disk.
  std::string create_set(const perms::Account& account, std::vector<TaskSpec> tasks,
                         std::map<std::string, crypto::Md5Digest> dependency_md5);
  // Destination of a declared dependency while the set is staging.
  std::filesystem::path staging_path(const std::string& set_id, const std::string& name,
                                     const std::string& owner);
  // A produced output of a finished set.
  std::filesystem::path output_path(const std::string& set_id, const std::string& name,
                                    const std::string& owner);
  // Verifies staged MD5s and launches the tasks. On mismatch the set is
  // removed and StagingFailed thrown.
  void start(const std::string& set_id, const std::string& owner);
  void abort(const std::string& set_id, const std::string& owner);
  SetSnapshot status(const std::string& set_id, const std::string& owner);
  // Busy until every task is terminal.
  std::vector<TaskResult> results(const std::string& set_id, const std::string& owner);
  // Removes the work directory; the id answers SetExpired from then on.
  void release(const std::string& set_id, const std::string& owner);

  void sweep();
  std::size_t live_sets() const;
  std::filesystem::path work_root() const { return options_.work_root; }

  // Test hook, called when a task begins executing.
  std::function<void(const std::string& set_id, std::uint32_t index)> on_task_start;

 private:
  struct Set;
  std::shared_ptr<Set> lookup(const std::string& set_id, const std::string& owner);
  void run_set(const std::shared_ptr<Set>& set);
  TaskResult run_task(Set& set, std::uint32_t index);
  void remove_set(const std::shared_ptr<Set>& set);

  TaskManagerOptions options_;
  const BuiltinRegistry& registry_;
  AuditSink* audit_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Set>> sets_;
};

namespace task_action {
inline constexpr std::uint64_t kStart = 1;
inline constexpr std::uint64_t kPoll = 2;
inline constexpr std::uint64_t kRelease = 3;
inline constexpr std::uint64_t kAbort = 4;
}  // namespace task_action

// TASK_* frame handling for one connection.
class TaskService {
 public:
  explicit TaskService(TaskManager& manager) : manager_(manager) {}

  struct Session {
    std::vector<std::string> sets;  // created on this connection
  };

  void handle(net::Channel& channel, Session& session, const perms::Account& account,
              wire::FrameType type, const wire::FieldMap& fields);
  // Sets still staging when their connection ends are dropped.
  void end_session(Session& session, const std::string& owner);

 private:
  TaskManager& manager_;
};

}  // namespace gridfs::taskexec

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridfs/perms/guard.hpp"
#include "gridfs/wire/fieldmap.hpp"

namespace gridfs::taskexec {

enum class TaskKind : std::uint8_t { Builtin = 1, Process = 2 };

enum class TaskStatus : std::uint8_t { Pending = 0, Running, Ok, Failed, Denied, Timeout };
const char* task_status_name(TaskStatus s) noexcept;
inline bool is_terminal(TaskStatus s) { return s >= TaskStatus::Ok; }

struct Dependency {
  std::string name;    // file name inside the set's work directory
  std::string source;  // client-side path, never sent to the server
  bool operator==(const Dependency&) const = default;
};

struct TaskSpec {
  TaskKind kind{TaskKind::Builtin};
  std::string function;  // builtin
  wire::FieldMap params;
  std::string command;  // process
  std::vector<std::string> args;
  perms::TaskCapabilities caps;
  std::vector<Dependency> dependencies;
  std::vector<std::string> outputs;
  std::uint32_t timeout_ms{0};  // 0: no limit

  static TaskSpec builtin(std::string function, wire::FieldMap params);
  static TaskSpec process(std::string command, std::vector<std::string> args);

  wire::FieldMap to_fields() const;
  static TaskSpec from_fields(const wire::FieldMap& m);
  bool operator==(const TaskSpec&) const = default;
};

struct TaskResult {
  std::uint32_t index{0};
  TaskStatus status{TaskStatus::Pending};
  std::int64_t exit_code{0};
  wire::FieldMap result;  // builtin output
  std::string out;
  std::string err;
  std::vector<std::string> outputs;  // produced output files
  std::string message;

  wire::FieldMap to_fields() const;
  static TaskResult from_fields(const wire::FieldMap& m);
  bool operator==(const TaskResult&) const = default;
};

Bytes encode_tasks(const std::vector<TaskSpec>& tasks);
std::vector<TaskSpec> decode_tasks(ByteView bytes);
Bytes encode_results(const std::vector<TaskResult>& results);
std::vector<TaskResult> decode_results(ByteView bytes);

// Throws InvalidArgument when two tasks of a set declare the same dependency
// name or a name is not a plain relative path.
void validate_task_set(const std::vector<TaskSpec>& tasks);

}  // namespace gridfs::taskexec

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gridfs/perms/accounts.hpp"

namespace gridfs::perms {

enum class ActionKind { FileIo, Execution, Socket, Unmanaged, Registry, Sql };

const char* action_kind_name(ActionKind k) noexcept;

struct GuardedAction {
  ActionKind kind{ActionKind::FileIo};
  std::filesystem::path path;  // FILE_IO only; absolute, already resolved
};

struct Decision {
  bool allowed{true};
  std::string reason;  // flag name or "sandbox" on deny
  explicit operator bool() const { return allowed; }
};

// Capabilities a task spec declares up front. UNMANAGED / REGISTRY / SQL only
// gate tasks that declare them.
struct TaskCapabilities {
  bool network{false};
  bool unmanaged{false};
  bool registry{false};
  bool sql{false};
  bool operator==(const TaskCapabilities&) const = default;
};

// Administrator: always allow. Others:
//   FILE_IO    FileIOPermission and path inside sandbox_root
//   EXECUTION  Execution
//   SOCKET     SocketPermission
//   UNMANAGED / REGISTRY / SQL  the matching flag
Decision check(const Account& account, const GuardedAction& action);

// EXECUTION plus one action per declared capability, in that order.
std::vector<GuardedAction> task_actions(const TaskCapabilities& caps);

// First deny wins.
Decision check_all(const Account& account, const std::vector<GuardedAction>& actions);

// Lexical containment after normalization; symlinks are resolved for the
// existing prefix of `path`.
bool within_root(const std::filesystem::path& root, const std::filesystem::path& path);

}  // namespace gridfs::perms

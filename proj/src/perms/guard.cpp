#include "gridfs/perms/guard.hpp"

namespace gridfs::perms {

namespace fs = std::filesystem;

const char* action_kind_name(ActionKind k) noexcept {
  switch (k) {
    case ActionKind::FileIo: return "FILE_IO";
    case ActionKind::Execution: return "EXECUTION";
    case ActionKind::Socket: return "SOCKET";
    case ActionKind::Unmanaged: return "UNMANAGED";
    case ActionKind::Registry: return "REGISTRY";
    case ActionKind::Sql: return "SQL";
  }
  return "?";
}

bool within_root(const fs::path& root, const fs::path& path) {
  std::error_code ec;
  fs::path r = fs::weakly_canonical(root, ec);
  if (ec) r = root.lexically_normal();
  fs::path p = fs::weakly_canonical(path, ec);
  if (ec) p = path.lexically_normal();
  auto rel = p.lexically_relative(r);
  if (rel.empty()) return false;
  auto first = *rel.begin();
  return first != ".." && !rel.is_absolute();
}

Decision check(const Account& account, const GuardedAction& action) {
  if (account.is_admin()) return {};
  auto need = [&](Flag f) -> Decision {
    if (account.perms.allows(f)) return {};
    return Decision{false, std::string(flag_name(f))};
  };
  switch (action.kind) {
    case ActionKind::FileIo: {
      if (auto d = need(Flag::FileIOPermission); !d) return d;
      if (!within_root(account.sandbox_root, action.path)) return Decision{false, "sandbox"};
      return {};
    }
    case ActionKind::Execution: return need(Flag::Execution);
    case ActionKind::Socket: return need(Flag::SocketPermission);
    case ActionKind::Unmanaged: return need(Flag::UnmanagedCode);
    case ActionKind::Registry: return need(Flag::RegistryPermission);
    case ActionKind::Sql: return need(Flag::SqlClientPermission);
  }
  return Decision{false, "unknown action"};
}

std::vector<GuardedAction> task_actions(const TaskCapabilities& caps) {
  std::vector<GuardedAction> out{{ActionKind::Execution, {}}};
  if (caps.network) out.push_back({ActionKind::Socket, {}});
  if (caps.unmanaged) out.push_back({ActionKind::Unmanaged, {}});
  if (caps.registry) out.push_back({ActionKind::Registry, {}});
  if (caps.sql) out.push_back({ActionKind::Sql, {}});
  return out;
}

Decision check_all(const Account& account, const std::vector<GuardedAction>& actions) {
  for (const auto& a : actions) {
    if (auto d = check(account, a); !d) return d;
  }
  return {};
}

}  // namespace gridfs::perms

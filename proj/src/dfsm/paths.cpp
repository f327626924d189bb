#include "gridfs/dfsm/paths.hpp"

#include "gridfs/error.hpp"

namespace gridfs::dfsm {

namespace fs = std::filesystem;

fs::path resolve_sandbox_path(const fs::path& root, std::string_view relative) {
  if (relative.empty()) throw Error(Errc::PermissionDenied, "empty path");
  if (relative.find('\0') != std::string_view::npos) {
    throw Error(Errc::PermissionDenied, "path contains NUL");
  }
  fs::path rel(relative);
  if (rel.is_absolute() || rel.has_root_name() || rel.has_root_directory()) {
    throw Error(Errc::PermissionDenied, "absolute path outside sandbox");
  }
  for (const auto& part : rel) {
    if (part == "..") throw Error(Errc::PermissionDenied, "path escapes sandbox");
  }
  auto out = (root / rel).lexically_normal();
  if (out == root.lexically_normal()) throw Error(Errc::PermissionDenied, "path names the sandbox root");
  return out;
}

}  // namespace gridfs::dfsm

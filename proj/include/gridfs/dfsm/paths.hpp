#pragma once

#include <filesystem>
#include <string_view>

namespace gridfs::dfsm {

// Resolves a sandbox-relative path. Absolute paths, empty paths and any ".."
// component are rejected with Error(PermissionDenied).
std::filesystem::path resolve_sandbox_path(const std::filesystem::path& root,
                                           std::string_view relative);

}  // namespace gridfs::dfsm

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "gridfs/bytes.hpp"

namespace gridfs::perms {

enum class AccountType { Administrator, Others };

// Order matches the element order of the permission document.
enum class Flag : std::size_t {
  UnmanagedCode = 0,
  SocketPermission,
  Execution,
  FileIOPermission,
  RegistryPermission,
  SqlClientPermission,
};
inline constexpr std::size_t kFlagCount = 6;
inline constexpr std::array<Flag, kFlagCount> kAllFlags{
    Flag::UnmanagedCode,     Flag::SocketPermission,   Flag::Execution,
    Flag::FileIOPermission, Flag::RegistryPermission, Flag::SqlClientPermission};

std::string_view flag_name(Flag f) noexcept;
// Throws Error(InvalidArgument) for unknown names.
Flag parse_flag(std::string_view name);

struct FlagValue {
  bool value{false};
  std::string description;
  bool operator==(const FlagValue&) const = default;
};

struct PermissionDoc {
  AccountType account_type{AccountType::Others};
  std::array<FlagValue, kFlagCount> flags{};

  bool allows(Flag f) const { return flags[static_cast<std::size_t>(f)].value; }
  void set(Flag f, bool v) { flags[static_cast<std::size_t>(f)].value = v; }
  bool operator==(const PermissionDoc&) const = default;
};

// Absent elements read as False (default deny). Element text is kept, trimmed,
// as the description. Throws MalformedDocument or UnknownAccountType.
PermissionDoc parse_permissions(std::string_view xml);

// Emits the six elements in fixed order.
std::string serialize_permissions(const PermissionDoc& doc);

}  // namespace gridfs::perms

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gridfs/wire/fieldmap.hpp"

namespace gridfs::taskexec {

struct BuiltinContext {
  std::filesystem::path workdir;
  std::string username;
};

// Throws Error on failure; the task then ends FAILED with the message.
using BuiltinFn = std::function<wire::FieldMap(const wire::FieldMap& params,
                                               const BuiltinContext& ctx)>;

namespace pi_param {
inline constexpr wire::FieldMap::Tag kStart = 1;
inline constexpr wire::FieldMap::Tag kCount = 2;
inline constexpr wire::FieldMap::Tag kDigits = 1;  // result
}  // namespace pi_param

namespace md5_param {
inline constexpr wire::FieldMap::Tag kName = 1;
inline constexpr wire::FieldMap::Tag kDigest = 1;  // result
}  // namespace md5_param

// Name -> function table. A node fills it at startup and never changes it
// while serving.
class BuiltinRegistry {
 public:
  // Starts with pi_hex_digits and md5_file.
  BuiltinRegistry();

  void add(std::string name, BuiltinFn fn);
  const BuiltinFn* find(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, BuiltinFn, std::less<>> fns_;
};

}  // namespace gridfs::taskexec

#include "gridfs/taskexec/builtins.hpp"

#include "gridfs/dfsm/paths.hpp"
#include "gridfs/ftsm/state.hpp"
#include "gridfs/taskexec/pi.hpp"

namespace gridfs::taskexec {

namespace {

wire::FieldMap pi_builtin(const wire::FieldMap& p, const BuiltinContext&) {
  auto start = p.require_u64(pi_param::kStart);
  auto count = p.require_u64(pi_param::kCount);
  wire::FieldMap r;
  r.set_str(pi_param::kDigits, pi_hex_digits(start, count));
  return r;
}

wire::FieldMap md5_builtin(const wire::FieldMap& p, const BuiltinContext& ctx) {
  auto file = dfsm::resolve_sandbox_path(ctx.workdir, p.require_str(md5_param::kName));
  auto size = std::filesystem::file_size(file);
  wire::FieldMap r;
  r.set(md5_param::kDigest, ByteView(ftsm::md5_region(file, 0, size)));
  return r;
}

}  // namespace

BuiltinRegistry::BuiltinRegistry() {
  add("pi_hex_digits", pi_builtin);
  add("md5_file", md5_builtin);
}

void BuiltinRegistry::add(std::string name, BuiltinFn fn) { fns_[std::move(name)] = std::move(fn); }

const BuiltinFn* BuiltinRegistry::find(std::string_view name) const {
  auto it = fns_.find(name);
  return it == fns_.end() ? nullptr : &it->second;
}

std::vector<std::string> BuiltinRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, f] : fns_) out.push_back(n);
  return out;
}

}  // namespace gridfs::taskexec

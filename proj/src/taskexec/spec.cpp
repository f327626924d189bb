#include "gridfs/taskexec/spec.hpp"

#include <set>

#include "gridfs/error.hpp"

namespace gridfs::taskexec {

using wire::FieldMap;

namespace {

namespace tag {
constexpr FieldMap::Tag kKind = 1, kFunction = 2, kParams = 3, kCommand = 4, kArgs = 5,
                        kCaps = 6, kDeps = 7, kOutputs = 8, kTimeout = 9;
}
namespace rtag {
constexpr FieldMap::Tag kIndex = 1, kStatus = 2, kExit = 3, kResult = 4, kOut = 5, kErr = 6,
                        kOutputs = 7, kMessage = 8;
}

Bytes encode_strings(const std::vector<std::string>& v) {
  std::vector<FieldMap> items;
  for (const auto& s : v) items.push_back(FieldMap().set_str(1, s));
  return wire::encode_list(items);
}

std::vector<std::string> decode_strings(const Bytes* b) {
  std::vector<std::string> out;
  if (!b) return out;
  for (const auto& m : wire::decode_list(*b)) out.push_back(m.require_str(1));
  return out;
}

std::uint64_t caps_bits(const perms::TaskCapabilities& c) {
  return (c.network ? 1u : 0u) | (c.unmanaged ? 2u : 0u) | (c.registry ? 4u : 0u) |
         (c.sql ? 8u : 0u);
}

perms::TaskCapabilities caps_from(std::uint64_t b) {
  return perms::TaskCapabilities{(b & 1) != 0, (b & 2) != 0, (b & 4) != 0, (b & 8) != 0};
}

}  // namespace

const char* task_status_name(TaskStatus s) noexcept {
  switch (s) {
    case TaskStatus::Pending: return "PENDING";
    case TaskStatus::Running: return "RUNNING";
    case TaskStatus::Ok: return "OK";
    case TaskStatus::Failed: return "FAILED";
    case TaskStatus::Denied: return "DENIED";
    case TaskStatus::Timeout: return "TIMEOUT";
  }
  return "?";
}

TaskSpec TaskSpec::builtin(std::string function, FieldMap params) {
  TaskSpec t;
  t.kind = TaskKind::Builtin;
  t.function = std::move(function);
  t.params = std::move(params);
  return t;
}

TaskSpec TaskSpec::process(std::string command, std::vector<std::string> args) {
  TaskSpec t;
  t.kind = TaskKind::Process;
  t.command = std::move(command);
  t.args = std::move(args);
  return t;
}

FieldMap TaskSpec::to_fields() const {
  FieldMap m;
  m.set_u64(tag::kKind, static_cast<std::uint64_t>(kind));
  if (kind == TaskKind::Builtin) {
    m.set_str(tag::kFunction, function);
    m.set_map(tag::kParams, params);
  } else {
    m.set_str(tag::kCommand, command);
    m.set(tag::kArgs, encode_strings(args));
  }
  m.set_u64(tag::kCaps, caps_bits(caps));
  std::vector<std::string> names;
  for (const auto& d : dependencies) names.push_back(d.name);
  m.set(tag::kDeps, encode_strings(names));
  m.set(tag::kOutputs, encode_strings(outputs));
  m.set_u64(tag::kTimeout, timeout_ms);
  return m;
}

TaskSpec TaskSpec::from_fields(const FieldMap& m) {
  TaskSpec t;
  auto kind = m.require_u64(tag::kKind);
  if (kind != 1 && kind != 2) throw Error(Errc::ProtocolError, "unknown task kind");
  t.kind = static_cast<TaskKind>(kind);
  if (t.kind == TaskKind::Builtin) {
    t.function = m.require_str(tag::kFunction);
    if (m.has(tag::kParams)) t.params = m.require_map(tag::kParams);
  } else {
    t.command = m.require_str(tag::kCommand);
    t.args = decode_strings(m.find(tag::kArgs));
  }
  t.caps = caps_from(m.u64_or(tag::kCaps, 0));
  for (auto& n : decode_strings(m.find(tag::kDeps))) t.dependencies.push_back({n, ""});
  t.outputs = decode_strings(m.find(tag::kOutputs));
  t.timeout_ms = static_cast<std::uint32_t>(m.u64_or(tag::kTimeout, 0));
  return t;
}

FieldMap TaskResult::to_fields() const {
  FieldMap m;
  m.set_u64(rtag::kIndex, index);
  m.set_u64(rtag::kStatus, static_cast<std::uint64_t>(status));
  m.set_u64(rtag::kExit, static_cast<std::uint64_t>(exit_code));
  if (!result.empty()) m.set_map(rtag::kResult, result);
  if (!out.empty()) m.set_str(rtag::kOut, out);
  if (!err.empty()) m.set_str(rtag::kErr, err);
  if (!outputs.empty()) m.set(rtag::kOutputs, encode_strings(outputs));
  if (!message.empty()) m.set_str(rtag::kMessage, message);
  return m;
}

TaskResult TaskResult::from_fields(const FieldMap& m) {
  TaskResult r;
  r.index = static_cast<std::uint32_t>(m.require_u64(rtag::kIndex));
  auto st = m.require_u64(rtag::kStatus);
  if (st > static_cast<std::uint64_t>(TaskStatus::Timeout)) {
    throw Error(Errc::ProtocolError, "unknown task status");
  }
  r.status = static_cast<TaskStatus>(st);
  r.exit_code = static_cast<std::int64_t>(m.u64_or(rtag::kExit, 0));
  if (m.has(rtag::kResult)) r.result = m.require_map(rtag::kResult);
  r.out = m.get_str(rtag::kOut).value_or("");
  r.err = m.get_str(rtag::kErr).value_or("");
  r.outputs = decode_strings(m.find(rtag::kOutputs));
  r.message = m.get_str(rtag::kMessage).value_or("");
  return r;
}

Bytes encode_tasks(const std::vector<TaskSpec>& tasks) {
  std::vector<FieldMap> items;
  for (const auto& t : tasks) items.push_back(t.to_fields());
  return wire::encode_list(items);
}

std::vector<TaskSpec> decode_tasks(ByteView bytes) {
  std::vector<TaskSpec> out;
  for (const auto& m : wire::decode_list(bytes)) out.push_back(TaskSpec::from_fields(m));
  return out;
}

Bytes encode_results(const std::vector<TaskResult>& results) {
  std::vector<FieldMap> items;
  for (const auto& r : results) items.push_back(r.to_fields());
  return wire::encode_list(items);
}

std::vector<TaskResult> decode_results(ByteView bytes) {
  std::vector<TaskResult> out;
  for (const auto& m : wire::decode_list(bytes)) out.push_back(TaskResult::from_fields(m));
  return out;
}

void validate_task_set(const std::vector<TaskSpec>& tasks) {
  std::set<std::string> seen;
  auto plain = [](const std::string& n) {
    return !n.empty() && n != "." && n != ".." && n.find('/') == std::string::npos &&
           n.find('\0') == std::string::npos;
  };
  for (const auto& t : tasks) {
    for (const auto& d : t.dependencies) {
      if (!plain(d.name)) throw Error(Errc::InvalidArgument, "bad dependency name: " + d.name);
      if (!seen.insert(d.name).second) {
        throw Error(Errc::InvalidArgument, "duplicate dependency name: " + d.name);
      }
    }
    for (const auto& o : t.outputs) {
      if (!plain(o)) throw Error(Errc::InvalidArgument, "bad output name: " + o);
    }
  }
}

}  // namespace gridfs::taskexec

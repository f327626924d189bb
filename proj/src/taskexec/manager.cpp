#include "gridfs/taskexec/manager.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include <spdlog/spdlog.h>

#include "gridfs/dfsm/paths.hpp"
#include "gridfs/error.hpp"
#include "gridfs/ftsm/state.hpp"
#include "gridfs/taskexec/process.hpp"
#include "gridfs/wire/tags.hpp"

namespace fs = std::filesystem;

namespace gridfs::taskexec {

namespace tt = wire::task_tag;
using Clock = std::chrono::steady_clock;

const char* set_state_name(SetState s) noexcept {
  switch (s) {
    case SetState::Staging: return "STAGING";
    case SetState::Running: return "RUNNING";
    case SetState::Done: return "DONE";
    case SetState::Collected: return "COLLECTED";
  }
  return "?";
}

struct TaskManager::Set {
  std::string id;
  std::string owner;
  perms::Account account;
  fs::path dir;
  std::vector<TaskSpec> tasks;
  std::map<std::string, crypto::Md5Digest> deps;

  std::mutex mu;
  SetState state{SetState::Staging};
  std::vector<TaskResult> results;
  Clock::time_point done_at{};
  std::thread runner;
};

TaskManager::TaskManager(TaskManagerOptions options, const BuiltinRegistry& registry,
                         AuditSink* audit)
    : options_(std::move(options)), registry_(registry), audit_(audit) {
  if (options_.workers == 0) options_.workers = std::max(1u, std::thread::hardware_concurrency());
  fs::create_directories(options_.work_root);
}

TaskManager::~TaskManager() {
  std::map<std::string, std::shared_ptr<Set>> sets;
  {
    std::lock_guard lk(mu_);
    sets.swap(sets_);
  }
  for (auto& [id, s] : sets) {
    if (s->runner.joinable()) s->runner.join();
  }
}

std::string TaskManager::create_set(const perms::Account& account, std::vector<TaskSpec> tasks,
                                    std::map<std::string, crypto::Md5Digest> dependency_md5) {
  sweep();
  validate_task_set(tasks);
  audit(audit_, "check:EXECUTION");
  perms::Decision d = perms::check(account, perms::GuardedAction{perms::ActionKind::Execution, {}});
  if (!d) throw Error(Errc::PermissionDenied, d.reason);

  std::size_t declared = 0;
  for (const auto& t : tasks) {
    for (const auto& dep : t.dependencies) {
      ++declared;
      if (!dependency_md5.count(dep.name)) {
        throw Error(Errc::InvalidArgument, "no digest for dependency " + dep.name);
      }
    }
  }
  if (declared != dependency_md5.size()) {
    throw Error(Errc::InvalidArgument, "digest for an undeclared dependency");
  }

  auto set = std::make_shared<Set>();
  set->id = to_hex(crypto::random_array<16>());
  set->owner = account.username;
  set->account = account;
  set->dir = options_.work_root / set->id;
  set->tasks = std::move(tasks);
  set->deps = std::move(dependency_md5);
  set->results.resize(set->tasks.size());
  for (std::size_t i = 0; i < set->results.size(); ++i) {
    set->results[i].index = static_cast<std::uint32_t>(i);
  }
  audit(audit_, "effect:task:create");
  fs::create_directories(set->dir);
  std::lock_guard lk(mu_);
  sets_[set->id] = set;
  return set->id;
}

std::shared_ptr<TaskManager::Set> TaskManager::lookup(const std::string& set_id,
                                                      const std::string& owner) {
  std::lock_guard lk(mu_);
  auto it = sets_.find(set_id);
  if (it == sets_.end() || it->second->owner != owner) {
    throw Error(Errc::SetExpired, "no such task set");
  }
  return it->second;
}

fs::path TaskManager::staging_path(const std::string& set_id, const std::string& name,
                                   const std::string& owner) {
  auto set = lookup(set_id, owner);
  std::lock_guard lk(set->mu);
  if (set->state != SetState::Staging) throw Error(Errc::PermissionDenied, "set is not staging");
  if (!set->deps.count(name)) throw Error(Errc::PermissionDenied, "undeclared dependency");
  return dfsm::resolve_sandbox_path(set->dir, name);
}

fs::path TaskManager::output_path(const std::string& set_id, const std::string& name,
                                  const std::string& owner) {
  auto set = lookup(set_id, owner);
  std::lock_guard lk(set->mu);
  if (set->state != SetState::Done) throw Error(Errc::Busy, "set still running");
  bool produced = false;
  for (const auto& r : set->results) {
    if (r.status == TaskStatus::Ok &&
        std::find(r.outputs.begin(), r.outputs.end(), name) != r.outputs.end()) {
      produced = true;
    }
  }
  if (!produced) throw Error(Errc::NoSuchFile, name);
  return dfsm::resolve_sandbox_path(set->dir, name);
}

void TaskManager::start(const std::string& set_id, const std::string& owner) {
  auto set = lookup(set_id, owner);
  {
    std::lock_guard lk(set->mu);
    if (set->state != SetState::Staging) throw Error(Errc::ProtocolError, "set already started");
  }
  for (const auto& [name, md5] : set->deps) {
    fs::path p = set->dir / name;
    std::error_code ec;
    auto size = fs::file_size(p, ec);
    if (ec || ftsm::md5_region(p, 0, size) != md5) {
      remove_set(set);
      throw Error(Errc::StagingFailed, "dependency " + name + " missing or corrupt");
    }
  }
  std::lock_guard lk(set->mu);
  set->state = SetState::Running;
  audit(audit_, "effect:task:run");
  set->runner = std::thread([this, set] { run_set(set); });
}

void TaskManager::run_set(const std::shared_ptr<Set>& set) {
  std::size_t n = set->tasks.size();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard lk(set->mu);
        set->results[i].status = TaskStatus::Running;
      }
      TaskResult r = run_task(*set, static_cast<std::uint32_t>(i));
      std::lock_guard lk(set->mu);
      set->results[i] = std::move(r);
    }
  };
  std::size_t w = std::min<std::size_t>(options_.workers, n);
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < w; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::lock_guard lk(set->mu);
  set->state = SetState::Done;
  set->done_at = Clock::now();
}

TaskResult TaskManager::run_task(Set& set, std::uint32_t index) {
  const TaskSpec& t = set.tasks[index];
  TaskResult r;
  r.index = index;
  perms::Decision d = perms::check_all(set.account, perms::task_actions(t.caps));
  if (!d) {
    r.status = TaskStatus::Denied;
    r.message = d.reason;
    return r;
  }
  if (on_task_start) on_task_start(set.id, index);
  try {
    if (t.kind == TaskKind::Builtin) {
      const BuiltinFn* fn = registry_.find(t.function);
      if (!fn) throw Error(Errc::InvalidArgument, "unknown builtin " + t.function);
      r.result = (*fn)(t.params, BuiltinContext{set.dir, set.owner});
      r.status = TaskStatus::Ok;
    } else {
      std::string cmd = t.command;
      if (cmd.rfind("./", 0) == 0) cmd = cmd.substr(2);
      if (set.deps.count(cmd)) {
        fs::permissions(set.dir / cmd, fs::perms::owner_exec | fs::perms::group_exec,
                        fs::perm_options::add);
      }
      auto outcome =
          run_process(t.command, t.args, set.dir, std::chrono::milliseconds(t.timeout_ms));
      r.exit_code = outcome.exit_code;
      r.out = std::move(outcome.out);
      r.err = std::move(outcome.err);
      if (outcome.timed_out) {
        r.status = TaskStatus::Timeout;
      } else {
        r.status = outcome.exit_code == 0 ? TaskStatus::Ok : TaskStatus::Failed;
      }
    }
    if (r.status == TaskStatus::Ok) {
      for (const auto& o : t.outputs) {
        if (!fs::is_regular_file(dfsm::resolve_sandbox_path(set.dir, o))) {
          r.status = TaskStatus::Failed;
          r.message = "missing output " + o;
          r.outputs.clear();
          break;
        }
        r.outputs.push_back(o);
      }
    }
  } catch (const Error& e) {
    r.status = TaskStatus::Failed;
    r.exit_code = -1;
    r.message = e.what();
  } catch (const std::exception& e) {
    r.status = TaskStatus::Failed;
    r.exit_code = -1;
    r.message = e.what();
  }
  return r;
}

void TaskManager::abort(const std::string& set_id, const std::string& owner) {
  auto set = lookup(set_id, owner);
  {
    std::lock_guard lk(set->mu);
    if (set->state != SetState::Staging) throw Error(Errc::Busy, "set already started");
  }
  remove_set(set);
}

SetSnapshot TaskManager::status(const std::string& set_id, const std::string& owner) {
  sweep();
  auto set = lookup(set_id, owner);
  std::lock_guard lk(set->mu);
  SetSnapshot s;
  s.state = set->state;
  for (const auto& r : set->results) s.statuses.push_back(r.status);
  return s;
}

std::vector<TaskResult> TaskManager::results(const std::string& set_id, const std::string& owner) {
  sweep();
  auto set = lookup(set_id, owner);
  std::lock_guard lk(set->mu);
  if (set->state != SetState::Done) throw Error(Errc::Busy, "set still running");
  return set->results;
}

void TaskManager::release(const std::string& set_id, const std::string& owner) {
  auto set = lookup(set_id, owner);
  {
    std::lock_guard lk(set->mu);
    if (set->state != SetState::Done) throw Error(Errc::Busy, "set still running");
    set->state = SetState::Collected;
  }
  remove_set(set);
}

void TaskManager::remove_set(const std::shared_ptr<Set>& set) {
  {
    std::lock_guard lk(mu_);
    sets_.erase(set->id);
  }
  if (set->runner.joinable() && set->runner.get_id() != std::this_thread::get_id()) {
    set->runner.join();
  }
  std::error_code ec;
  fs::remove_all(set->dir, ec);
  if (ec) spdlog::warn("task set {}: cannot remove work directory: {}", set->id, ec.message());
}

void TaskManager::sweep() {
  std::vector<std::shared_ptr<Set>> expired;
  auto now = Clock::now();
  {
    std::lock_guard lk(mu_);
    for (auto& [id, s] : sets_) {
      std::lock_guard slk(s->mu);
      if (s->state == SetState::Done && now - s->done_at > options_.retention) {
        expired.push_back(s);
      }
    }
  }
  for (auto& s : expired) remove_set(s);
}

std::size_t TaskManager::live_sets() const {
  std::lock_guard lk(mu_);
  return sets_.size();
}

// ---------------------------------------------------------------- frames

namespace {

wire::FieldMap status_fields(const std::string& set_id, const SetSnapshot& s) {
  wire::FieldMap m;
  m.set_str(tt::kSetId, set_id).set_u64(tt::kState, static_cast<std::uint64_t>(s.state));
  Bytes st;
  for (auto x : s.statuses) st.push_back(static_cast<std::uint8_t>(x));
  m.set(tt::kStatuses, std::move(st));
  return m;
}

}  // namespace

void TaskService::handle(net::Channel& ch, Session& session, const perms::Account& account,
                         wire::FrameType type, const wire::FieldMap& f) {
  const std::string& owner = account.username;
  try {
    if (type == wire::FrameType::TaskSubmit) {
      auto tasks = decode_tasks(f.require(tt::kTasks));
      std::map<std::string, crypto::Md5Digest> deps;
      if (const auto* d = f.find(tt::kDependencies)) {
        for (const auto& m : wire::decode_list(*d)) {
          deps[m.require_str(1)] = to_array<16>(m.require(2));
        }
      }
      std::string id = manager_.create_set(account, std::move(tasks), std::move(deps));
      session.sets.push_back(id);
      ch.send(wire::FrameType::TaskStatus, status_fields(id, manager_.status(id, owner)));
    } else if (type == wire::FrameType::TaskStatus) {
      std::string id = f.require_str(tt::kSetId);
      switch (f.u64_or(tt::kAction, task_action::kPoll)) {
        case task_action::kStart: manager_.start(id, owner); break;
        case task_action::kPoll: break;
        case task_action::kRelease: {
          manager_.release(id, owner);
          ch.send(wire::FrameType::TaskStatus, status_fields(id, {SetState::Collected, {}}));
          return;
        }
        case task_action::kAbort: {
          manager_.abort(id, owner);
          ch.send(wire::FrameType::TaskStatus, status_fields(id, {SetState::Collected, {}}));
          return;
        }
        default: throw Error(Errc::ProtocolError, "unknown task action");
      }
      ch.send(wire::FrameType::TaskStatus, status_fields(id, manager_.status(id, owner)));
    } else if (type == wire::FrameType::TaskResult) {
      std::string id = f.require_str(tt::kSetId);
      wire::FieldMap m;
      m.set_str(tt::kSetId, id).set(tt::kResults, encode_results(manager_.results(id, owner)));
      ch.send(wire::FrameType::TaskResult, m);
    } else {
      throw Error(Errc::ProtocolError, "not a task frame");
    }
  } catch (const Error& e) {
    ch.send_error(e.code(), e.detail());
  }
}

void TaskService::end_session(Session& session, const std::string& owner) {
  for (const auto& id : session.sets) {
    try {
      if (manager_.status(id, owner).state == SetState::Staging) manager_.abort(id, owner);
    } catch (const Error&) {
    }
  }
  session.sets.clear();
}

}  // namespace gridfs::taskexec

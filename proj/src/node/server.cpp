#include "gridfs/node/server.hpp"

#include <spdlog/spdlog.h>

#include <sys/socket.h>

#include <fstream>

#include "gridfs/cryptengine/engine.hpp"
#include "gridfs/dfsm/paths.hpp"
#include "gridfs/perms/guard.hpp"
#include "gridfs/secchan/crypto.hpp"
#include "gridfs/wire/tags.hpp"

namespace fs = std::filesystem;

namespace gridfs::node {

using wire::FieldMap;
using wire::FrameType;
namespace ht = wire::hello_tag;

namespace {

constexpr auto kAcceptPoll = std::chrono::milliseconds(200);
// DFS_RESP carries status, ids and sizes around the data.
constexpr std::uint64_t kDfsEnvelope = 256;

bool is_task_frame(FrameType t) {
  return t == FrameType::TaskSubmit || t == FrameType::TaskStatus || t == FrameType::TaskResult;
}

void write_port_file(const fs::path& file, std::uint16_t port) {
  if (file.empty()) return;
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << port << "\n";
  }
  fs::rename(tmp, file);
}

}  // namespace

struct NodeServer::Conn {
  std::uint64_t id{0};
  int fd{-1};
  std::atomic<bool> data_stream{false};
};

namespace {

NodeConfig finalized(NodeConfig c) {
  c.finalize();
  return c;
}

taskexec::BuiltinRegistry node_builtins() {
  taskexec::BuiltinRegistry r;
  cryptengine::register_builtins(r);
  return r;
}

}  // namespace

NodeServer::NodeServer(NodeConfig config, NodeHooks hooks)
    : config_(finalized(std::move(config))),
      hooks_(std::move(hooks)),
      dfs_(locks_, hooks_.audit),
      ftsm_(hooks_.audit),
      builtins_(node_builtins()),
      tasks_(std::make_unique<taskexec::TaskManager>(
          taskexec::TaskManagerOptions{
              config_.work_root, config_.task_workers,
              std::chrono::duration_cast<std::chrono::milliseconds>(config_.retention)},
          builtins_, hooks_.audit)),
      task_service_(*tasks_) {}

NodeServer::~NodeServer() { stop(); }

void NodeServer::reload_accounts() {
  std::vector<std::string> warnings;
  auto set = perms::load_accounts(config_.accounts_dir, config_.credentials, config_.storage_root,
                                  &warnings);
  for (const auto& w : warnings) spdlog::warn("accounts: {}", w);
  spdlog::info("accounts: {} loaded", set.size());
  accounts_.replace(std::move(set));
}

void NodeServer::start() {
  if (started_) return;
  fs::create_directories(config_.storage_root);
  fs::create_directories(config_.work_root);
  reload_accounts();
  listener_ = net::Listener::bind(config_.host, config_.port);
  port_ = listener_.port();
  write_port_file(config_.port_file, port_);
  started_ = true;
  spdlog::info("node listening on {}:{}", config_.host, port_);
  acceptor_ = std::thread([this] { accept_loop(); });
}

void NodeServer::accept_loop() {
  auto last_sweep = std::chrono::steady_clock::now();
  while (!stopping_) {
    std::optional<net::Socket> s;
    try {
      s = listener_.accept(kAcceptPoll);
    } catch (const Error& e) {
      if (stopping_) break;
      spdlog::warn("accept: {}", e.what());
      continue;
    }
    auto now = std::chrono::steady_clock::now();
    if (now - last_sweep > std::chrono::seconds(5)) {
      tasks_->sweep();
      last_sweep = now;
    }
    if (!s) continue;

    std::unique_lock lock(mu_);
    if (stopping_) break;
    if (conns_.size() >= config_.max_sessions) {
      lock.unlock();
      try {
        net::Channel ch(std::move(*s), hooks_.tap);
        ch.send_error(Errc::Busy, "session limit reached");
      } catch (const Error&) {
      }
      continue;
    }
    auto conn = std::make_shared<Conn>();
    conn->id = next_conn_++;
    conn->fd = s->fd();
    conns_.emplace(conn->id, conn);
    lock.unlock();
    std::thread([this, conn, sock = std::move(*s)]() mutable {
      {
        net::Channel ch(std::move(sock), hooks_.tap);
        try {
          FieldMap hello = ch.recv_fields(FrameType::Hello);
          wire::SessionParams requested = wire::params_from_fields(hello);
          auto cn = to_array<16>(hello.require(ht::kNonce));
          wire::ServerLimits limits{wire::kProtocolVersion, config_.buffer_cap,
                                    config_.streams_cap, config_.modes};
          // Data streams belong to a transfer whose control session already
          // passed the mode check.
          if (hello.has(ht::kTransferId)) limits.enabled_modes = NodeConfig{}.modes;
          wire::SessionParams params;
          try {
            params = wire::negotiate(requested, limits);
          } catch (const Error& e) {
            ch.send_error(e.code(), e.detail());
            throw;
          }
          params.session_id = crypto::random_array<16>();
          auto sn = crypto::random_array<16>();
          FieldMap welcome = wire::params_to_fields(params);
          welcome.set(ht::kNonce, ByteView(sn));
          ch.send(FrameType::Welcome, welcome);
          ch.socket().set_buffer_sizes(params.buffer_size);
          ch.set_max_payload(params.buffer_size + wire::kFrameSlack);
          if (hello.has(ht::kTransferId)) {
            conn->data_stream = true;
            ftsm_.serve_stream(ch, hello, cn, sn, params.security_mode);
          } else {
            session(ch, hello, params, cn, sn);
          }
        } catch (const Error& e) {
          if (e.code() == Errc::ProtocolError) {
            try {
              ch.send_error(e.code(), e.detail());
            } catch (const Error&) {
            }
          }
          if (e.code() != Errc::ConnectionLost) spdlog::debug("connection: {}", e.what());
        } catch (const std::exception& e) {
          spdlog::warn("connection: {}", e.what());
        }
        std::lock_guard lk(mu_);
        conns_.erase(conn->id);
        cv_.notify_all();
      }
    }).detach();
  }
}

ftsm::FtsmService::PathResolver NodeServer::resolver(const perms::Account& account) {
  return [this, &account](const FieldMap& offer, ftsm::Direction dir) -> fs::path {
    if (offer.has(wire::xfer_tag::kSetId)) {
      audit(hooks_.audit, "check:EXECUTION");
      auto d = perms::check(account, {perms::ActionKind::Execution, {}});
      if (!d) throw Error(Errc::PermissionDenied, d.reason);
      auto set = offer.require_str(wire::xfer_tag::kSetId);
      auto name = offer.require_str(wire::xfer_tag::kName);
      return dir == ftsm::Direction::Push ? tasks_->staging_path(set, name, account.username)
                                          : tasks_->output_path(set, name, account.username);
    }
    auto path =
        dfsm::resolve_sandbox_path(account.sandbox_root, offer.require_str(wire::xfer_tag::kPath));
    audit(hooks_.audit, "check:FILE_IO");
    auto d = perms::check(account, {perms::ActionKind::FileIo, path});
    if (!d) throw Error(Errc::PermissionDenied, d.reason);
    return path;
  };
}

void NodeServer::session(net::Channel& ch, const FieldMap& hello,
                         const wire::SessionParams& params, const wire::Nonce& cn,
                         const wire::Nonce& sn) {
  auto snapshot = accounts_.snapshot();
  std::string username = hello.get_str(ht::kUsername).value_or("");
  const perms::Account* account = snapshot->find(username);
  // Unknown users run the same exchange against a throwaway key.
  Bytes psk = account ? account->psk : [] {
    Bytes b(32);
    crypto::random_bytes(b);
    return b;
  }();
  ch.enable_security(params.security_mode,
                     secchan::derive_keys(psk, cn, sn, secchan::Role::Server));

  bool ok = false;
  try {
    FieldMap auth = ch.recv_fields(FrameType::Auth);
    auto expected = secchan::compute_proof(psk, cn, sn, username);
    const Bytes* proof = auth.find(wire::auth_tag::kProof);
    ok = account && proof && auth.get_str(wire::auth_tag::kUsername) == username &&
         crypto::equal_ct(*proof, expected);
  } catch (const Error& e) {
    if (e.code() != Errc::IntegrityFailure) throw;
  }
  if (!ok) {
    audit(hooks_.audit, "auth:fail");
    spdlog::info("auth failed for '{}'", username);
    ch.send(FrameType::AuthFail, FieldMap{});
    return;
  }
  audit(hooks_.audit, "auth:ok");
  FieldMap welcome;
  welcome.set_str(wire::auth_tag::kAccountType,
                  account->is_admin() ? "Administrator" : "Others");
  ch.send(FrameType::AuthOk, welcome);
  spdlog::debug("session {} user {} mode {}", to_hex(params.session_id), username,
                wire::mode_name(params.mode));

  const std::uint64_t max_read =
      std::max<std::uint64_t>(1, params.buffer_size - kDfsEnvelope);
  ftsm::FtsmService::Control control{username, params, resolver(*account), {}};
  taskexec::TaskService::Session task_session;
  struct Cleanup {
    std::function<void()> fn;
    ~Cleanup() { fn(); }
  } cleanup{[&] {
    if (params.mode == wire::Mode::Dfsm) dfs_.end_session(params.session_id);
    ftsm_.end_control(control);
    task_service_.end_session(task_session, username);
  }};

  // Once stopping, the request in hand is answered and the session ends.
  while (!stopping_) {
    FrameType type{};
    FieldMap f = ch.recv_any(type);
    switch (params.mode) {
      case wire::Mode::Dfsm: {
        if (type != FrameType::DfsReq) throw Error(Errc::ProtocolError, "expected DFS_REQ");
        dfsm::DfsResponse resp;
        try {
          resp = dfs_.handle(*account, params.session_id, dfsm::DfsRequest::from_fields(f),
                             max_read);
        } catch (const Error& e) {
          resp.request_id = f.u64_or(wire::dfs_tag::kRequestId, 0);
          resp.status = e.code();
          resp.message = e.detail();
        }
        ch.send(FrameType::DfsResp, resp.to_fields());
        break;
      }
      case wire::Mode::FtsmPush:
      case wire::Mode::FtsmPull:
        if (!ftsm::FtsmService::is_control_frame(type)) {
          throw Error(Errc::ProtocolError, "unexpected frame on FTSM control session");
        }
        ftsm_.handle_control(ch, control, type, f);
        break;
      case wire::Mode::Task:
        if (is_task_frame(type)) {
          task_service_.handle(ch, task_session, *account, type, f);
        } else if (ftsm::FtsmService::is_control_frame(type)) {
          ftsm_.handle_control(ch, control, type, f);
        } else {
          throw Error(Errc::ProtocolError, "unexpected frame on TASK session");
        }
        break;
      case wire::Mode::Crypt: {
        if (type != FrameType::CryptTask) throw Error(Errc::ProtocolError, "expected CRYPT_TASK");
        try {
          audit(hooks_.audit, "check:EXECUTION");
          auto d = perms::check(*account, {perms::ActionKind::Execution, {}});
          if (!d) throw Error(Errc::PermissionDenied, d.reason);
          auto task = cryptengine::CryptTask::from_fields(f.require_map(wire::crypt_frame_tag::kTask));
          audit(hooks_.audit, "effect:crypt:block");
          auto result = cryptengine::run_crypt_task(task);
          FieldMap reply;
          reply.set_map(wire::crypt_frame_tag::kResult, result.to_fields());
          ch.send(FrameType::CryptTask, reply);
        } catch (const Error& e) {
          if (e.code() == Errc::ConnectionLost) throw;
          ch.send_error(e.code(), e.detail());
        }
        break;
      }
    }
  }
}

std::size_t NodeServer::active_connections() const {
  std::lock_guard lk(mu_);
  return conns_.size();
}

void NodeServer::stop() {
  if (!started_) return;
  if (stopping_.exchange(true)) {
    wait();
    return;
  }
  // Read sides only, so a request already being handled still gets its
  // answer. Data streams are cut outright: a sending peer would otherwise
  // keep them fed.
  auto cut = [this] {
    for (auto& [id, c] : conns_) ::shutdown(c->fd, c->data_stream ? SHUT_RDWR : SHUT_RD);
  };
  {
    std::lock_guard lk(mu_);
    cut();
  }
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  {
    std::unique_lock lk(mu_);
    cut();
    cv_.wait(lk, [this] { return conns_.empty(); });
  }
  ftsm_.persist_all();
  spdlog::info("node on port {} stopped", port_);
  std::lock_guard lk(mu_);
  stopped_ = true;
  cv_.notify_all();
}

void NodeServer::wait() {
  std::unique_lock lk(mu_);
  cv_.wait(lk, [this] { return stopped_ || !started_; });
}

}  // namespace gridfs::node

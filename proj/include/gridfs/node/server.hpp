#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "gridfs/audit.hpp"
#include "gridfs/dfsm/lock_table.hpp"
#include "gridfs/dfsm/service.hpp"
#include "gridfs/ftsm/engine.hpp"
#include "gridfs/net/channel.hpp"
#include "gridfs/net/socket.hpp"
#include "gridfs/node/config.hpp"
#include "gridfs/perms/accounts.hpp"
#include "gridfs/taskexec/builtins.hpp"
#include "gridfs/taskexec/manager.hpp"

namespace gridfs::node {

struct NodeHooks {
  std::shared_ptr<net::TranscriptTap> tap;  // server side of every connection
  AuditSink* audit{nullptr};
};

// One grid node: a listener, the account store and the four services.
class NodeServer {
 public:
  explicit NodeServer(NodeConfig config, NodeHooks hooks = {});
  ~NodeServer();
  NodeServer(const NodeServer&) = delete;
  NodeServer& operator=(const NodeServer&) = delete;

  // Loads accounts, binds and starts accepting. Throws BindFailed.
  void start();
  // Stops accepting, lets in-flight requests answer, releases locks and
  // persists transfer state. Idempotent.
  void stop();
  // Blocks until stop() has run.
  void wait();

  // Re-reads accounts and credentials; sessions already open keep their
  // snapshot.
  void reload_accounts();

  std::uint16_t port() const noexcept { return port_; }
  net::Endpoint endpoint() const { return {config_.host, port_}; }
  const NodeConfig& config() const noexcept { return config_; }
  std::size_t active_connections() const;

  dfsm::LockTable& locks() { return locks_; }
  ftsm::FtsmService& ftsm() { return ftsm_; }
  taskexec::TaskManager& tasks() { return *tasks_; }
  perms::AccountStore& accounts() { return accounts_; }

 private:
  struct Conn;
  void accept_loop();
  void serve(std::shared_ptr<Conn> conn);
  void session(net::Channel& ch, const wire::FieldMap& hello, const wire::SessionParams& params,
               const wire::Nonce& cn, const wire::Nonce& sn);
  ftsm::FtsmService::PathResolver resolver(const perms::Account& account);

  NodeConfig config_;
  NodeHooks hooks_;
  perms::AccountStore accounts_;
  dfsm::LockTable locks_;
  dfsm::DfsService dfs_;
  ftsm::FtsmService ftsm_;
  taskexec::BuiltinRegistry builtins_;
  std::unique_ptr<taskexec::TaskManager> tasks_;
  taskexec::TaskService task_service_;

  net::Listener listener_;
  std::uint16_t port_{0};
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  bool started_{false};

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, std::shared_ptr<Conn>> conns_;
  std::uint64_t next_conn_{1};
  bool stopped_{false};
};

}  // namespace gridfs::node

#include "gridfs/harness/cluster.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <thread>

#include "gridfs/error.hpp"
#include "gridfs/perms/accounts.hpp"
#include "gridfs/secchan/crypto.hpp"

extern char** environ;

namespace fs = std::filesystem;

namespace gridfs::harness {

namespace {

fs::path make_scratch() {
  auto base = fs::temp_directory_path();
  for (int i = 0; i < 100; ++i) {
    fs::path p = base / ("gridfs-cluster-" + to_hex(crypto::random_array<6>()));
    if (fs::create_directory(p)) return p;
  }
  throw Error(Errc::SpawnFailed, "cannot create a scratch directory");
}

std::optional<std::uint16_t> read_port(const fs::path& file) {
  std::ifstream in(file);
  unsigned port = 0;
  if (in >> port && port > 0 && port < 65536) return static_cast<std::uint16_t>(port);
  return std::nullopt;
}

}  // namespace

Cluster Cluster::spawn(const TopologyPlan& plan, ClusterOptions options) {
  if (!fs::exists(options.gridfs_bin)) {
    throw Error(Errc::SpawnFailed, "no gridfs executable at " + options.gridfs_bin.string());
  }
  Cluster c;
  c.plan_ = plan;
  c.options_ = options;
  if (options.scratch.empty()) {
    c.scratch_ = make_scratch();
    c.owns_scratch_ = !options.keep_scratch;
  } else {
    c.scratch_ = options.scratch;
    fs::create_directories(c.scratch_);
  }
  fs::create_directories(c.scratch_ / "accounts");
  c.creds_.username = std::string(perms::kBuiltinAdmin);
  c.creds_.psk.resize(32);
  crypto::random_bytes(c.creds_.psk);
  perms::write_credentials(c.scratch_ / "credentials", {{c.creds_.username, c.creds_.psk}});

  c.nodes_.resize(plan.nodes);
  try {
    for (std::size_t i = 0; i < plan.nodes; ++i) {
      Node& n = c.nodes_[i];
      n.dir = c.scratch_ / ("node" + std::to_string(i));
      fs::create_directories(n.dir);
      n.config = n.dir / "gridfs.conf";
      c.launch(n, 0);
    }
  } catch (...) {
    c.teardown();
    throw;
  }
  return c;
}

void Cluster::launch(Node& n, std::uint16_t port) {
  fs::path port_file = n.dir / "port";
  fs::remove(port_file);
  {
    std::ofstream cfg(n.config, std::ios::trunc);
    cfg << "host = 127.0.0.1\n"
        << "port = " << port << "\n"
        << "storage_root = " << (n.dir / "storage").string() << "\n"
        << "work_root = " << (n.dir / "work").string() << "\n"
        << "accounts_dir = " << (scratch_ / "accounts").string() << "\n"
        << "credentials = " << (scratch_ / "credentials").string() << "\n"
        << "buffer_cap = " << options_.buffer_cap << "\n"
        << "log_level = " << options_.log_level << "\n"
        << "port_file = " << port_file.string() << "\n";
  }
  std::string bin = options_.gridfs_bin.string();
  std::string cfg = n.config.string();
  std::vector<char*> argv{bin.data(), const_cast<char*>("serve"), const_cast<char*>("--config"),
                          cfg.data(), nullptr};
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  fs::path log = n.dir / "node.log";
  std::string log_s = log.string();
  posix_spawn_file_actions_addopen(&fa, 1, log_s.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&fa, 1, 2);
  pid_t pid = -1;
  int rc = ::posix_spawn(&pid, bin.c_str(), &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) throw Error(Errc::SpawnFailed, "posix_spawn: " + std::string(strerror(rc)));
  n.pid = pid;

  auto deadline = std::chrono::steady_clock::now() + options_.startup_timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (auto p = read_port(port_file)) {
      n.port = *p;
      return;
    }
    int status = 0;
    if (::waitpid(pid, &status, WNOHANG) == pid) {
      n.pid = -1;
      throw Error(Errc::SpawnFailed, "node exited during startup, see " + log_s);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid, SIGKILL);
  ::waitpid(pid, nullptr, 0);
  n.pid = -1;
  throw Error(Errc::SpawnFailed, "node did not report a port within the startup timeout");
}

Cluster::Cluster(Cluster&& o) noexcept
    : plan_(std::move(o.plan_)),
      options_(std::move(o.options_)),
      scratch_(std::move(o.scratch_)),
      owns_scratch_(std::exchange(o.owns_scratch_, false)),
      creds_(std::move(o.creds_)),
      nodes_(std::move(o.nodes_)) {
  o.nodes_.clear();
}

Cluster& Cluster::operator=(Cluster&& o) noexcept {
  if (this != &o) {
    teardown();
    plan_ = std::move(o.plan_);
    options_ = std::move(o.options_);
    scratch_ = std::move(o.scratch_);
    owns_scratch_ = std::exchange(o.owns_scratch_, false);
    creds_ = std::move(o.creds_);
    nodes_ = std::move(o.nodes_);
    o.nodes_.clear();
  }
  return *this;
}

Cluster::~Cluster() { teardown(); }

net::Endpoint Cluster::endpoint(std::size_t i) const {
  return net::Endpoint{"127.0.0.1", nodes_.at(i).port};
}

std::vector<net::Endpoint> Cluster::endpoints(const std::vector<std::size_t>& indices) const {
  std::vector<net::Endpoint> out;
  for (auto i : indices) out.push_back(endpoint(i));
  return out;
}

fs::path Cluster::sandbox(std::size_t i) const {
  return nodes_.at(i).dir / "storage" / creds_.username;
}

bool Cluster::running(std::size_t i) const { return nodes_.at(i).pid > 0; }

void Cluster::stop_node(std::size_t i, int sig) {
  Node& n = nodes_.at(i);
  if (n.pid <= 0) return;
  ::kill(n.pid, sig);
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
  while (::waitpid(n.pid, nullptr, WNOHANG) == 0) {
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(n.pid, SIGKILL);
      ::waitpid(n.pid, nullptr, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  n.pid = -1;
}

void Cluster::restart_node(std::size_t i) {
  Node& n = nodes_.at(i);
  stop_node(i, SIGTERM);
  // The old socket may linger briefly; retry the bind for a moment.
  for (int attempt = 0;; ++attempt) {
    try {
      launch(n, n.port);
      return;
    } catch (const Error&) {
      if (attempt >= 20) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }
}

void Cluster::teardown() {
  for (std::size_t i = 0; i < nodes_.size(); ++i) stop_node(i, SIGTERM);
  nodes_.clear();
  if (owns_scratch_ && !scratch_.empty()) {
    std::error_code ec;
    fs::remove_all(scratch_, ec);
    owns_scratch_ = false;
  }
}

}  // namespace gridfs::harness

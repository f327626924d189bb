#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "gridfs/audit.hpp"
#include "gridfs/net/client.hpp"
#include "gridfs/node/server.hpp"
#include "gridfs/perms/accounts.hpp"
#include "gridfs/perms/permissions.hpp"
#include "gridfs/secchan/crypto.hpp"

namespace testing {

namespace fs = std::filesystem;
using gridfs::Bytes;

class TempDir {
 public:
  TempDir() {
    auto base = fs::temp_directory_path();
    std::random_device rd;
    for (;;) {
      path_ = base / ("gridfs-test-" + std::to_string(rd()));
      if (fs::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const fs::path& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline Bytes random_bytes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

inline void write_file(const fs::path& p, gridfs::ByteView data) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

inline void write_text(const fs::path& p, const std::string& s) {
  write_file(p, gridfs::ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string md5_hex(gridfs::ByteView b) { return gridfs::to_hex(gridfs::crypto::md5(b)); }

inline gridfs::perms::PermissionDoc doc_with(std::initializer_list<gridfs::perms::Flag> allowed,
                                             bool admin = false) {
  gridfs::perms::PermissionDoc d;
  d.account_type = admin ? gridfs::perms::AccountType::Administrator
                         : gridfs::perms::AccountType::Others;
  for (auto f : allowed) d.set(f, true);
  return d;
}

struct NodeOptions {
  std::map<std::string, gridfs::perms::PermissionDoc> users;  // besides admin
  std::uint32_t buffer_cap{262144};
  std::optional<std::set<gridfs::wire::Mode>> modes;
  std::shared_ptr<gridfs::net::TranscriptTap> tap;
  gridfs::AuditSink* audit{nullptr};
  unsigned task_workers{2};
  std::chrono::seconds retention{600};
  std::uint32_t max_sessions{128};
};

// A node running in this process on an ephemeral loopback port.
class TestNode {
 public:
  explicit TestNode(NodeOptions opts = {}) : opts_(std::move(opts)) {
    std::vector<gridfs::perms::Credential> creds;
    creds.push_back({"admin", random_bytes(32, 1)});
    std::uint64_t seed = 100;
    for (const auto& [name, doc] : opts_.users) {
      creds.push_back({name, random_bytes(32, seed++)});
      write_text(dir_ / "accounts" / (name + ".xml"), gridfs::perms::serialize_permissions(doc));
    }
    fs::create_directories(dir_ / "accounts");
    gridfs::perms::write_credentials(dir_ / "credentials", creds);
    for (auto& c : creds) psk_[c.username] = c.psk;
    config_.host = "127.0.0.1";
    config_.port = 0;
    config_.data_dir = dir_.path();
    config_.buffer_cap = opts_.buffer_cap;
    config_.task_workers = opts_.task_workers;
    config_.retention = opts_.retention;
    config_.max_sessions = opts_.max_sessions;
    if (opts_.modes) config_.modes = *opts_.modes;
    config_.finalize();
    start();
  }
  ~TestNode() { stop(); }

  void start() {
    server_ = std::make_unique<gridfs::node::NodeServer>(
        config_, gridfs::node::NodeHooks{opts_.tap, opts_.audit});
    server_->start();
    config_.port = server_->port();
  }
  void stop() {
    if (server_) server_->stop();
    server_.reset();
  }
  void restart() {
    stop();
    start();
  }

  gridfs::net::Endpoint ep() const { return {"127.0.0.1", config_.port}; }
  gridfs::net::Credentials creds(const std::string& user = "admin") const {
    return {user, psk_.at(user)};
  }
  fs::path sandbox(const std::string& user = "admin") const {
    return config_.storage_root / user;
  }
  gridfs::node::NodeServer& server() { return *server_; }
  const gridfs::node::NodeConfig& config() const { return config_; }
  const fs::path& dir() const { return dir_.path(); }

 private:
  NodeOptions opts_;
  TempDir dir_;
  gridfs::node::NodeConfig config_;
  std::map<std::string, Bytes> psk_;
  std::unique_ptr<gridfs::node::NodeServer> server_;
};

}  // namespace testing

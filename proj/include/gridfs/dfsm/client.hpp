#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>

#include "gridfs/dfsm/protocol.hpp"
#include "gridfs/net/client.hpp"

namespace gridfs::dfsm {

struct RetryPolicy {
  int retries{3};
  std::chrono::milliseconds initial_delay{250};
};

// Client for the stateless file-operation mode. Bound to one connection and
// not shared across threads; open several for parallelism. Transport failures
// reconnect and replay the request (requests carry absolute offsets, so a
// replay is idempotent). Locks do not survive a reconnect.
class DfsClient {
 public:
  static DfsClient connect(const net::Endpoint& ep, const net::Credentials& creds,
                           const net::ClientOptions& opts = {}, RetryPolicy retry = {});

  // Loops until `length` bytes or EOF; fewer bytes means EOF was reached.
  Bytes read(const std::string& path, std::uint64_t offset, std::uint64_t length);
  std::uint64_t write(const std::string& path, std::uint64_t offset, ByteView data);
  void flush(const std::string& path);
  std::uint64_t lock(const std::string& path, std::uint64_t offset, std::uint64_t length);
  void unlock(std::uint64_t lock_id);
  void set_length(const std::string& path, std::uint64_t length);
  FileStat stat(const std::string& path);
  // Releases this session's locks on the server.
  void close();

  // Tracks a client-side position per path for CurrentHint seeks; END needs
  // a fresh stat, fetched here.
  std::uint64_t seek(const std::string& path, SeekOrigin origin, std::int64_t delta);
  std::uint64_t position(const std::string& path) const;

  const net::Session& session() const { return *session_; }
  std::uint32_t buffer_size() const { return session_->params.buffer_size; }
  int reconnects() const { return reconnects_; }

 private:
  DfsClient(net::Endpoint ep, net::Credentials creds, net::ClientOptions opts, RetryPolicy retry);

  DfsResponse call(DfsRequest req);
  std::uint64_t io_limit() const;

  net::Endpoint ep_;
  net::Credentials creds_;
  net::ClientOptions opts_;
  RetryPolicy retry_;
  std::optional<net::Session> session_;
  std::uint64_t next_request_id_{1};
  std::map<std::string, std::uint64_t> positions_;
  int reconnects_{0};
};

// A cursor over one remote file (the remoteReader / remoteWriter pattern).
class RemoteFile {
 public:
  RemoteFile(DfsClient& client, std::string path) : client_(client), path_(std::move(path)) {}

  Bytes read(std::uint64_t length);
  void write(ByteView data);
  std::uint64_t seek(SeekOrigin origin, std::int64_t delta);
  std::uint64_t tell() const { return pos_; }
  const std::string& path() const { return path_; }

 private:
  DfsClient& client_;
  std::string path_;
  std::uint64_t pos_{0};
};

}  // namespace gridfs::dfsm

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gridfs/audit.hpp"
#include "gridfs/ftsm/plan.hpp"
#include "gridfs/ftsm/report.hpp"
#include "gridfs/ftsm/state.hpp"
#include "gridfs/net/client.hpp"

namespace gridfs::ftsm {

namespace xfer_flags {
inline constexpr std::uint64_t kMemSink = 0x01;    // receiver discards data
inline constexpr std::uint64_t kWholeFile = 0x02;  // receiver file takes the source size
}  // namespace xfer_flags

struct TransferOptions {
  std::uint8_t streams{0};      // 0: the session's negotiated stream count
  std::uint32_t chunk_size{0};  // 0: the negotiated buffer size
  std::optional<Region> region;
  bool resume{false};
  // Staging into a task set's working directory instead of the sandbox.
  std::string set_id;
  // Test hook: data streams drop their connections once this many payload
  // bytes went out (push) or came in (pull) across all streams. 0 disables.
  std::uint64_t abort_after_bytes{0};
};

struct TransferResult {
  TransferId transfer_id{};
  std::uint64_t region_offset{0};
  std::uint64_t region_length{0};
  std::uint64_t bytes{0};  // payload bytes moved by this run
  double seconds{0};
  Md5Digest md5{};
  std::vector<std::uint64_t> stream_bytes;

  ThroughputReport report() const { return throughput_report(bytes, seconds, stream_bytes); }
};

// Client side of FTSM over an authenticated control session. The control
// session's mode may be FTSM_PUSH, FTSM_PULL or TASK (for staging).
class FtsmClient {
 public:
  FtsmClient(net::Session& control, net::Endpoint endpoint, net::ClientOptions options);

  // Throws IntegrityMismatch, StreamLost, PermissionDenied, StateCorrupt.
  TransferResult push(const std::filesystem::path& local, const std::string& remote,
                      const TransferOptions& opts);
  // Memory-to-memory: a zero generator feeds a discarding sink on the server.
  TransferResult push_memory(std::uint64_t bytes, const TransferOptions& opts);
  TransferResult pull(const std::string& remote, const std::filesystem::path& local,
                      const TransferOptions& opts);

 private:
  struct Source;
  TransferResult push_from(Source& src, const std::string& remote, std::uint64_t flags,
                           const TransferOptions& opts);

  net::Session& control_;
  net::Endpoint endpoint_;
  net::ClientOptions options_;
};

// Connects, authenticates and runs one transfer.
TransferResult push_file(const net::Endpoint& ep, const net::Credentials& creds,
                         const net::ClientOptions& copts, const std::filesystem::path& local,
                         const std::string& remote, const TransferOptions& opts);
TransferResult pull_file(const net::Endpoint& ep, const net::Credentials& creds,
                         const net::ClientOptions& copts, const std::string& remote,
                         const std::filesystem::path& local, const TransferOptions& opts);

// Server side: the registry of live transfers plus the frame handlers.
class FtsmService {
 public:
  // Maps an offer (path or set_id + name) to a local file after the
  // permission check. Throws PermissionDenied / NoSuchFile.
  using PathResolver =
      std::function<std::filesystem::path(const wire::FieldMap& offer, Direction direction)>;

  struct Control {
    std::string username;
    wire::SessionParams params;
    PathResolver resolve;
    std::vector<TransferId> owned;
  };

  explicit FtsmService(AuditSink* audit = nullptr);
  ~FtsmService();

  static bool is_control_frame(wire::FrameType type);
  // Handles XFER_OFFER / XFER_RESUME / XFER_DONE on a control channel and
  // writes the reply. Errors are sent as ERROR frames.
  void handle_control(net::Channel& channel, Control& control, wire::FrameType type,
                      const wire::FieldMap& fields);
  // Persists and forgets the transfers a closing control connection owned.
  void end_control(Control& control);

  // Completes a data-stream attach after WELCOME, then moves the stream's
  // data. `hello` is the client's HELLO map.
  void serve_stream(net::Channel& channel, const wire::FieldMap& hello,
                    const wire::Nonce& client_nonce, const wire::Nonce& server_nonce,
                    wire::SecurityMode security);

  std::size_t active_transfers() const;
  void persist_all();

 private:
  struct Active;
  std::shared_ptr<Active> find(const TransferId& id) const;
  void offer_push(net::Channel& ch, Control& c, const wire::FieldMap& f, bool resume);
  void offer_pull(net::Channel& ch, Control& c, const wire::FieldMap& f);
  void done(net::Channel& ch, Control& c, const wire::FieldMap& f);
  void receive_stream(net::Channel& ch, Active& t, std::uint8_t index);
  void send_stream(net::Channel& ch, Active& t, std::uint8_t index);

  AuditSink* audit_;
  mutable std::mutex mu_;
  std::map<TransferId, std::shared_ptr<Active>> transfers_;
};

}  // namespace gridfs::ftsm

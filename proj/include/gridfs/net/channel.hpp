#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gridfs/error.hpp"
#include "gridfs/net/socket.hpp"
#include "gridfs/secchan/channel_keys.hpp"
#include "gridfs/secchan/policy.hpp"
#include "gridfs/wire/fieldmap.hpp"
#include "gridfs/wire/frame.hpp"

namespace gridfs::net {

// Records every byte a set of channels puts on or takes off the wire, frame by
// frame. Used by tests to scan for plaintext leaks and count AUTH exchanges.
class TranscriptTap {
 public:
  struct Entry {
    bool outbound;
    wire::FrameType type;
    Bytes wire_bytes;  // header + payload exactly as transmitted
  };

  void record(bool outbound, wire::FrameType type, ByteView header, ByteView payload);
  std::vector<Entry> entries() const;
  std::size_t count(wire::FrameType type, bool outbound) const;
  // True if `needle` appears inside any single transmitted frame.
  bool contains(ByteView needle) const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
};

// A framed connection with the secchan sealing policy applied on both
// directions. Not thread-safe: one owner at a time.
class Channel {
 public:
  explicit Channel(Socket socket, std::shared_ptr<TranscriptTap> tap = nullptr);

  void enable_security(wire::SecurityMode mode, secchan::ChannelKeys keys);
  bool secured() const noexcept { return keys_.has_value(); }
  void set_max_payload(std::size_t max) noexcept { max_payload_ = max; }
  std::size_t max_payload() const noexcept { return max_payload_; }

  void send(wire::FrameType type, const wire::FieldMap& fields);
  // For binary payloads (CHUNK). Only whole-frame sealing applies.
  void send_payload(wire::FrameType type, ByteView payload);
  void send_error(Errc code, const std::string& message);

  // Returns the frame with sealing removed; FieldsSealed frames come back with
  // their sensitive fields merged into the payload map.
  wire::Frame recv();
  // Receives a FieldMap frame of the expected type. ERROR frames are rethrown
  // as Error with the peer's code.
  wire::FieldMap recv_fields(wire::FrameType expected);
  // Any FieldMap frame; ERROR frames are returned, not thrown.
  wire::FieldMap recv_any(wire::FrameType& type);

  Socket& socket() noexcept { return socket_; }

 private:
  void write_frame(wire::FrameType type, std::uint8_t flags, ByteView payload);

  Socket socket_;
  std::shared_ptr<TranscriptTap> tap_;
  std::size_t max_payload_{wire::kDefaultMaxPayload};
  wire::SecurityMode mode_{wire::SecurityMode::NonSecure};
  std::optional<secchan::ChannelKeys> keys_;
};

// Throws Error(code, message) built from an ERROR frame payload.
[[noreturn]] void throw_remote_error(const wire::FieldMap& fields);

}  // namespace gridfs::net

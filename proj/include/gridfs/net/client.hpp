#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "gridfs/net/channel.hpp"
#include "gridfs/net/socket.hpp"
#include "gridfs/secchan/channel_keys.hpp"
#include "gridfs/wire/session.hpp"

namespace gridfs::net {

struct Credentials {
  std::string username;
  Bytes psk;
};

struct ClientOptions {
  wire::SecurityMode security{wire::SecurityMode::NonSecure};
  std::uint32_t buffer_size{wire::kDefaultBufferSize};
  std::uint8_t streams{1};
  std::chrono::milliseconds connect_timeout{std::chrono::seconds(10)};
  std::shared_ptr<TranscriptTap> tap;
};

using TransferId = ByteArray<16>;
using Ticket = ByteArray<32>;

struct Session {
  Channel channel;
  wire::SessionParams params;
  wire::Nonce client_nonce{};
  wire::Nonce server_nonce{};
  secchan::Proof proof{};  // proof sent during AUTH; tests scan transcripts for it
};

// HELLO -> WELCOME -> AUTH -> AUTH_OK. Throws AuthFailed, VersionMismatch,
// ModeRejected or ConnectionLost.
Session open_session(const Endpoint& ep, wire::Mode mode, const Credentials& creds,
                     const ClientOptions& opts);

// Data-stream attach for an FTSM transfer: HELLO carries the transfer id and
// stream index; keys derive from the transfer ticket and the proof travels in
// XFER_ACCEPT, so no further AUTH exchange happens.
Session open_stream(const Endpoint& ep, wire::Mode mode, const TransferId& transfer_id,
                    std::uint8_t stream_index, const Ticket& ticket, const ClientOptions& opts);

std::string stream_proof_label(std::uint8_t stream_index);

}  // namespace gridfs::net

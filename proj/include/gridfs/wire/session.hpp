#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "gridfs/bytes.hpp"
#include "gridfs/wire/fieldmap.hpp"

namespace gridfs::wire {

inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMinBufferSize = 4096;
inline constexpr std::uint32_t kDefaultBufferSize = 262144;
// Slack above the negotiated buffer size for CHUNK headers and AEAD tags.
inline constexpr std::size_t kFrameSlack = 64;

enum class Mode : std::uint8_t { FtsmPush = 1, FtsmPull = 2, Dfsm = 3, Task = 4, Crypt = 5 };
enum class SecurityMode : std::uint8_t { NonSecure = 0, Secure = 1, SemiSecure = 2 };

const char* mode_name(Mode m) noexcept;
const char* security_mode_name(SecurityMode m) noexcept;
// Accepts "none"/"nonsecure", "secure", "semi"/"semisecure".
SecurityMode parse_security_mode(std::string_view text);
Mode parse_mode(std::string_view text);

using SessionId = ByteArray<16>;
using Nonce = ByteArray<16>;

struct SessionParams {
  std::uint16_t protocol_version{kProtocolVersion};
  Mode mode{Mode::Dfsm};
  SecurityMode security_mode{SecurityMode::NonSecure};
  std::uint32_t buffer_size{kDefaultBufferSize};
  std::uint8_t stream_count{1};
  SessionId session_id{};

  bool operator==(const SessionParams&) const = default;
};

struct ServerLimits {
  std::uint16_t protocol_version{kProtocolVersion};
  std::uint32_t buffer_cap{kDefaultBufferSize};
  std::uint8_t streams_cap{16};
  std::set<Mode> enabled_modes{Mode::FtsmPush, Mode::FtsmPull, Mode::Dfsm, Mode::Task,
                               Mode::Crypt};
};

// Server side of mode selection and buffer negotiation. Throws
// VersionMismatch or ModeRejected. session_id is left for the caller to fill.
SessionParams negotiate(const SessionParams& requested, const ServerLimits& limits);

// HELLO / WELCOME payloads.
namespace hello_tag {
inline constexpr FieldMap::Tag kVersion = 1;
inline constexpr FieldMap::Tag kMode = 2;
inline constexpr FieldMap::Tag kSecurity = 3;
inline constexpr FieldMap::Tag kBufferSize = 4;
inline constexpr FieldMap::Tag kStreamCount = 5;
inline constexpr FieldMap::Tag kNonce = 6;
inline constexpr FieldMap::Tag kUsername = 7;
inline constexpr FieldMap::Tag kTransferId = 8;
inline constexpr FieldMap::Tag kStreamIndex = 9;
inline constexpr FieldMap::Tag kSessionId = 10;
}  // namespace hello_tag

FieldMap params_to_fields(const SessionParams& p);
SessionParams params_from_fields(const FieldMap& m);

}  // namespace gridfs::wire

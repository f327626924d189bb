#include "gridfs/wire/session.hpp"

#include <algorithm>

#include "gridfs/error.hpp"

namespace gridfs::wire {

const char* mode_name(Mode m) noexcept {
  switch (m) {
    case Mode::FtsmPush: return "ftsm_push";
    case Mode::FtsmPull: return "ftsm_pull";
    case Mode::Dfsm: return "dfsm";
    case Mode::Task: return "task";
    case Mode::Crypt: return "crypt";
  }
  return "unknown";
}

const char* security_mode_name(SecurityMode m) noexcept {
  switch (m) {
    case SecurityMode::NonSecure: return "none";
    case SecurityMode::Secure: return "secure";
    case SecurityMode::SemiSecure: return "semi";
  }
  return "unknown";
}

SecurityMode parse_security_mode(std::string_view text) {
  if (text == "none" || text == "nonsecure") return SecurityMode::NonSecure;
  if (text == "secure") return SecurityMode::Secure;
  if (text == "semi" || text == "semisecure") return SecurityMode::SemiSecure;
  throw Error(Errc::InvalidArgument, "unknown security mode '" + std::string(text) + "'");
}

Mode parse_mode(std::string_view text) {
  for (auto m : {Mode::FtsmPush, Mode::FtsmPull, Mode::Dfsm, Mode::Task, Mode::Crypt}) {
    if (text == mode_name(m)) return m;
  }
  throw Error(Errc::InvalidArgument, "unknown mode '" + std::string(text) + "'");
}

SessionParams negotiate(const SessionParams& requested, const ServerLimits& limits) {
  if (requested.protocol_version != limits.protocol_version) {
    throw Error(Errc::VersionMismatch, "client speaks version " +
                                           std::to_string(requested.protocol_version) +
                                           ", server " + std::to_string(limits.protocol_version));
  }
  if (!limits.enabled_modes.contains(requested.mode)) {
    throw Error(Errc::ModeRejected, std::string("mode ") + mode_name(requested.mode) + " disabled");
  }
  SessionParams out = requested;
  out.buffer_size = std::max(kMinBufferSize, std::min(requested.buffer_size, limits.buffer_cap));
  if (requested.mode == Mode::Dfsm) {
    out.stream_count = 1;
  } else {
    out.stream_count = std::clamp<std::uint8_t>(requested.stream_count, 1,
                                                std::max<std::uint8_t>(1, limits.streams_cap));
  }
  return out;
}

FieldMap params_to_fields(const SessionParams& p) {
  FieldMap m;
  m.set_u64(hello_tag::kVersion, p.protocol_version)
      .set_u64(hello_tag::kMode, static_cast<std::uint8_t>(p.mode))
      .set_u64(hello_tag::kSecurity, static_cast<std::uint8_t>(p.security_mode))
      .set_u64(hello_tag::kBufferSize, p.buffer_size)
      .set_u64(hello_tag::kStreamCount, p.stream_count);
  m.set(hello_tag::kSessionId, ByteView(p.session_id));
  return m;
}

SessionParams params_from_fields(const FieldMap& m) {
  SessionParams p;
  p.protocol_version = static_cast<std::uint16_t>(m.require_u64(hello_tag::kVersion));
  auto mode = m.require_u64(hello_tag::kMode);
  if (mode < 1 || mode > 5) throw Error(Errc::ProtocolError, "bad mode code");
  p.mode = static_cast<Mode>(mode);
  auto sec = m.require_u64(hello_tag::kSecurity);
  if (sec > 2) throw Error(Errc::ProtocolError, "bad security mode code");
  p.security_mode = static_cast<SecurityMode>(sec);
  p.buffer_size = static_cast<std::uint32_t>(
      std::min<std::uint64_t>(m.require_u64(hello_tag::kBufferSize), 0xFFFFFFFFu));
  p.stream_count = static_cast<std::uint8_t>(
      std::clamp<std::uint64_t>(m.u64_or(hello_tag::kStreamCount, 1), 1, 255));
  if (const Bytes* sid = m.find(hello_tag::kSessionId); sid && sid->size() == 16) {
    std::copy(sid->begin(), sid->end(), p.session_id.begin());
  }
  return p;
}

}  // namespace gridfs::wire

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "gridfs/bytes.hpp"

namespace gridfs::wire {

enum class FrameType : std::uint8_t {
  Hello = 0x01,
  Welcome = 0x02,
  Auth = 0x03,
  AuthOk = 0x04,
  AuthFail = 0x05,
  DfsReq = 0x10,
  DfsResp = 0x11,
  XferOffer = 0x20,
  XferAccept = 0x21,
  Chunk = 0x22,
  XferDone = 0x23,
  XferResume = 0x24,
  TaskSubmit = 0x30,
  TaskStatus = 0x31,
  TaskResult = 0x32,
  CryptTask = 0x40,
  Error = 0x7F,
};

const char* frame_type_name(FrameType t) noexcept;

inline constexpr std::array<std::uint8_t, 4> kMagic{'D', 'G', '0', '1'};
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::size_t kDefaultMaxPayload = 262144;

namespace frame_flags {
inline constexpr std::uint8_t kSealed = 0x01;
inline constexpr std::uint8_t kFieldsSealed = 0x02;
}  // namespace frame_flags

struct Frame {
  FrameType type{FrameType::Hello};
  std::uint8_t flags{0};
  Bytes payload;

  bool operator==(const Frame&) const = default;
};

// Header only; throws Error(OversizedPayload) when payload_len exceeds
// max_payload or does not fit 32 bits.
ByteArray<kHeaderSize> encode_frame_header(FrameType type, std::uint8_t flags,
                                           std::uint64_t payload_len,
                                           std::size_t max_payload = kDefaultMaxPayload);

Bytes encode_frame(const Frame& frame, std::size_t max_payload = kDefaultMaxPayload);

enum class DecodeStatus { Ok, BadMagic, TruncatedFrame, OversizedPayload };

struct FrameHeader {
  FrameType type;
  std::uint8_t flags;
  std::uint32_t payload_len;
};

struct DecodeResult {
  DecodeStatus status{DecodeStatus::TruncatedFrame};
  Frame frame;
  ByteView rest;  // unconsumed suffix; only meaningful when status == Ok
};

// Validates magic and declared length of the first kHeaderSize bytes.
DecodeStatus decode_frame_header(ByteView bytes, std::size_t max_payload, FrameHeader& out);

// Total over arbitrary input. Never reads past the declared length and never
// allocates before the declared length has been checked against max_payload.
DecodeResult decode_frame(ByteView bytes, std::size_t max_payload = kDefaultMaxPayload);

}  // namespace gridfs::wire

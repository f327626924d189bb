#include "gridfs/wire/frame.hpp"

#include <algorithm>

#include "gridfs/error.hpp"

namespace gridfs::wire {

const char* frame_type_name(FrameType t) noexcept {
  switch (t) {
    case FrameType::Hello: return "HELLO";
    case FrameType::Welcome: return "WELCOME";
    case FrameType::Auth: return "AUTH";
    case FrameType::AuthOk: return "AUTH_OK";
    case FrameType::AuthFail: return "AUTH_FAIL";
    case FrameType::DfsReq: return "DFS_REQ";
    case FrameType::DfsResp: return "DFS_RESP";
    case FrameType::XferOffer: return "XFER_OFFER";
    case FrameType::XferAccept: return "XFER_ACCEPT";
    case FrameType::Chunk: return "CHUNK";
    case FrameType::XferDone: return "XFER_DONE";
    case FrameType::XferResume: return "XFER_RESUME";
    case FrameType::TaskSubmit: return "TASK_SUBMIT";
    case FrameType::TaskStatus: return "TASK_STATUS";
    case FrameType::TaskResult: return "TASK_RESULT";
    case FrameType::CryptTask: return "CRYPT_TASK";
    case FrameType::Error: return "ERROR";
  }
  return "UNKNOWN";
}

ByteArray<kHeaderSize> encode_frame_header(FrameType type, std::uint8_t flags,
                                           std::uint64_t payload_len, std::size_t max_payload) {
  if (payload_len > 0xFFFFFFFFull || payload_len > max_payload) {
    throw Error(Errc::OversizedPayload,
                "payload of " + std::to_string(payload_len) + " bytes exceeds " +
                    std::to_string(std::min<std::uint64_t>(max_payload, 0xFFFFFFFFull)));
  }
  ByteArray<kHeaderSize> h{};
  std::copy(kMagic.begin(), kMagic.end(), h.begin());
  h[4] = static_cast<std::uint8_t>(type);
  h[5] = flags;
  auto len = static_cast<std::uint32_t>(payload_len);
  h[6] = static_cast<std::uint8_t>(len >> 24);
  h[7] = static_cast<std::uint8_t>(len >> 16);
  h[8] = static_cast<std::uint8_t>(len >> 8);
  h[9] = static_cast<std::uint8_t>(len);
  return h;
}

Bytes encode_frame(const Frame& frame, std::size_t max_payload) {
  auto header = encode_frame_header(frame.type, frame.flags, frame.payload.size(), max_payload);
  Bytes out;
  out.reserve(kHeaderSize + frame.payload.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

DecodeStatus decode_frame_header(ByteView bytes, std::size_t max_payload, FrameHeader& out) {
  // A partial magic that already mismatches is rejected early.
  std::size_t magic_avail = std::min(bytes.size(), kMagic.size());
  if (!std::equal(bytes.begin(), bytes.begin() + magic_avail, kMagic.begin())) {
    return DecodeStatus::BadMagic;
  }
  if (bytes.size() < kHeaderSize) return DecodeStatus::TruncatedFrame;
  out.type = static_cast<FrameType>(bytes[4]);
  out.flags = bytes[5];
  out.payload_len = get_u32(bytes.data() + 6);
  if (out.payload_len > max_payload) return DecodeStatus::OversizedPayload;
  return DecodeStatus::Ok;
}

DecodeResult decode_frame(ByteView bytes, std::size_t max_payload) {
  DecodeResult result;
  FrameHeader header{};
  result.status = decode_frame_header(bytes, max_payload, header);
  if (result.status != DecodeStatus::Ok) return result;
  if (bytes.size() - kHeaderSize < header.payload_len) {
    result.status = DecodeStatus::TruncatedFrame;
    return result;
  }
  auto body = bytes.subspan(kHeaderSize, header.payload_len);
  result.frame.type = header.type;
  result.frame.flags = header.flags;
  result.frame.payload.assign(body.begin(), body.end());
  result.rest = bytes.subspan(kHeaderSize + header.payload_len);
  return result;
}

}  // namespace gridfs::wire

#include "gridfs/net/channel.hpp"

#include <algorithm>

#include "gridfs/wire/tags.hpp"

namespace gridfs::net {

using secchan::Sealing;
using wire::FieldMap;
using wire::Frame;
using wire::FrameType;

void TranscriptTap::record(bool outbound, FrameType type, ByteView header, ByteView payload) {
  Bytes all(header.begin(), header.end());
  append(all, payload);
  std::lock_guard lock(mu_);
  entries_.push_back(Entry{outbound, type, std::move(all)});
}

std::vector<TranscriptTap::Entry> TranscriptTap::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t TranscriptTap::count(FrameType type, bool outbound) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [&](const auto& e) {
    return e.type == type && e.outbound == outbound;
  }));
}

bool TranscriptTap::contains(ByteView needle) const {
  if (needle.empty()) return false;
  std::lock_guard lock(mu_);
  for (const auto& e : entries_) {
    if (std::search(e.wire_bytes.begin(), e.wire_bytes.end(), needle.begin(), needle.end()) !=
        e.wire_bytes.end()) {
      return true;
    }
  }
  return false;
}

void TranscriptTap::clear() {
  std::lock_guard lock(mu_);
  entries_.clear();
}

Channel::Channel(Socket socket, std::shared_ptr<TranscriptTap> tap)
    : socket_(std::move(socket)), tap_(std::move(tap)) {}

void Channel::enable_security(wire::SecurityMode mode, secchan::ChannelKeys keys) {
  mode_ = mode;
  keys_ = keys;
}

void Channel::write_frame(FrameType type, std::uint8_t flags, ByteView payload) {
  auto header = wire::encode_frame_header(type, flags, payload.size(), max_payload_);
  if (tap_) tap_->record(true, type, header, payload);
  socket_.send_all(header, payload);
}

void Channel::send(FrameType type, const FieldMap& fields) {
  Sealing sealing = keys_ ? secchan::classify_frame(type, mode_) : Sealing::Clear;
  if (sealing == Sealing::Sealed) {
    write_frame(type, wire::frame_flags::kSealed, secchan::seal(fields.encode(), *keys_));
    return;
  }
  if (sealing == Sealing::FieldsSealed) {
    FieldMap clear = fields;
    FieldMap hidden;
    for (auto tag : secchan::sensitive_tags(type)) {
      if (const Bytes* v = fields.find(tag)) {
        hidden.set(tag, *v);
        clear.erase(tag);
      }
    }
    if (!hidden.empty()) {
      clear.set(wire::kSealedFieldsTag, secchan::seal(hidden.encode(), *keys_));
      write_frame(type, wire::frame_flags::kFieldsSealed, clear.encode());
      return;
    }
  }
  write_frame(type, 0, fields.encode());
}

void Channel::send_payload(FrameType type, ByteView payload) {
  Sealing sealing = keys_ ? secchan::classify_frame(type, mode_) : Sealing::Clear;
  if (sealing == Sealing::Sealed) {
    write_frame(type, wire::frame_flags::kSealed, secchan::seal(payload, *keys_));
  } else {
    write_frame(type, 0, payload);
  }
}

void Channel::send_error(Errc code, const std::string& message) {
  FieldMap m;
  m.set_u64(wire::error_tag::kCode, static_cast<std::uint16_t>(code));
  m.set_str(wire::error_tag::kMessage, message);
  send(FrameType::Error, m);
}

Frame Channel::recv() {
  ByteArray<wire::kHeaderSize> header{};
  socket_.recv_exact(header);
  wire::FrameHeader h{};
  switch (wire::decode_frame_header(header, max_payload_, h)) {
    case wire::DecodeStatus::Ok: break;
    case wire::DecodeStatus::BadMagic: throw Error(Errc::BadMagic, "bad frame magic");
    case wire::DecodeStatus::OversizedPayload:
      throw Error(Errc::OversizedPayload, "declared payload " + std::to_string(h.payload_len));
    case wire::DecodeStatus::TruncatedFrame: throw Error(Errc::TruncatedFrame);
  }
  Frame f;
  f.type = h.type;
  f.flags = h.flags;
  f.payload.resize(h.payload_len);
  socket_.recv_exact(f.payload);
  if (tap_) tap_->record(false, f.type, header, f.payload);

  Sealing expected = keys_ ? secchan::classify_frame(f.type, mode_) : Sealing::Clear;
  bool sealed = (f.flags & wire::frame_flags::kSealed) != 0;
  bool fields_sealed = (f.flags & wire::frame_flags::kFieldsSealed) != 0;

  if ((sealed || fields_sealed) && !keys_) {
    throw Error(Errc::ProtocolError, "sealed frame before key agreement");
  }
  if (expected == Sealing::Sealed && !sealed) {
    throw Error(Errc::ProtocolError,
                std::string("clear ") + wire::frame_type_name(f.type) + " where sealing required");
  }
  if (sealed) {
    f.payload = secchan::open(f.payload, *keys_);
    f.flags &= static_cast<std::uint8_t>(~wire::frame_flags::kSealed);
    return f;
  }
  if (expected == Sealing::FieldsSealed) {
    FieldMap m = FieldMap::decode(f.payload);
    for (auto tag : secchan::sensitive_tags(f.type)) {
      if (m.has(tag)) throw Error(Errc::ProtocolError, "sensitive field sent in clear");
    }
    if (fields_sealed) {
      FieldMap hidden = FieldMap::decode(secchan::open(m.require(wire::kSealedFieldsTag), *keys_));
      m.erase(wire::kSealedFieldsTag);
      for (const auto& [tag, value] : hidden.fields()) m.set(tag, value);
      f.payload = m.encode();
      f.flags &= static_cast<std::uint8_t>(~wire::frame_flags::kFieldsSealed);
    }
  } else if (fields_sealed) {
    throw Error(Errc::ProtocolError, "unexpected sealed fields");
  }
  return f;
}

FieldMap Channel::recv_any(FrameType& type) {
  Frame f = recv();
  type = f.type;
  return FieldMap::decode(f.payload);
}

FieldMap Channel::recv_fields(FrameType expected) {
  FrameType type{};
  FieldMap m = recv_any(type);
  if (type == FrameType::Error) throw_remote_error(m);
  if (type != expected) {
    throw Error(Errc::ProtocolError, std::string("expected ") + wire::frame_type_name(expected) +
                                         ", got " + wire::frame_type_name(type));
  }
  return m;
}

void throw_remote_error(const FieldMap& fields) {
  auto code = static_cast<Errc>(fields.u64_or(wire::error_tag::kCode,
                                              static_cast<std::uint16_t>(Errc::Internal)));
  throw Error(code, fields.get_str(wire::error_tag::kMessage).value_or("remote error"));
}

}  // namespace gridfs::net

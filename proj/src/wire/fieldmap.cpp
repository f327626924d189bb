#include "gridfs/wire/fieldmap.hpp"

#include <algorithm>

#include "gridfs/error.hpp"

namespace gridfs::wire {

FieldMap& FieldMap::set(Tag tag, Bytes value) {
  for (auto& [t, v] : fields_) {
    if (t == tag) {
      v = std::move(value);
      return *this;
    }
  }
  fields_.emplace_back(tag, std::move(value));
  return *this;
}

FieldMap& FieldMap::set_u64(Tag tag, std::uint64_t value) {
  Bytes b;
  put_u64(b, value);
  return set(tag, std::move(b));
}

const Bytes* FieldMap::find(Tag tag) const {
  for (const auto& [t, v] : fields_) {
    if (t == tag) return &v;
  }
  return nullptr;
}

void FieldMap::erase(Tag tag) {
  std::erase_if(fields_, [tag](const auto& f) { return f.first == tag; });
}

std::optional<std::uint64_t> FieldMap::get_u64(Tag tag) const {
  const Bytes* v = find(tag);
  if (!v) return std::nullopt;
  switch (v->size()) {
    case 1: return (*v)[0];
    case 2: return gridfs::get_u16(v->data());
    case 4: return gridfs::get_u32(v->data());
    case 8: return gridfs::get_u64(v->data());
    default: return std::nullopt;
  }
}

std::optional<std::string> FieldMap::get_str(Tag tag) const {
  const Bytes* v = find(tag);
  if (!v) return std::nullopt;
  return to_string(*v);
}

std::uint64_t FieldMap::require_u64(Tag tag) const {
  auto v = get_u64(tag);
  if (!v) throw Error(Errc::ProtocolError, "missing integer field " + std::to_string(tag));
  return *v;
}

std::string FieldMap::require_str(Tag tag) const { return to_string(require(tag)); }

const Bytes& FieldMap::require(Tag tag) const {
  const Bytes* v = find(tag);
  if (!v) throw Error(Errc::ProtocolError, "missing field " + std::to_string(tag));
  return *v;
}

FieldMap FieldMap::require_map(Tag tag) const { return decode(require(tag)); }

Bytes FieldMap::encode() const {
  std::size_t total = 0;
  for (const auto& f : fields_) total += 5 + f.second.size();
  Bytes out;
  out.reserve(total);
  for (const auto& [tag, value] : fields_) {
    out.push_back(tag);
    put_u32(out, static_cast<std::uint32_t>(value.size()));
    append(out, value);
  }
  return out;
}

FieldMap FieldMap::decode(ByteView bytes) {
  FieldMap map;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 5) throw Error(Errc::ProtocolError, "truncated field header");
    Tag tag = bytes[pos];
    std::uint32_t len = get_u32(bytes.data() + pos + 1);
    pos += 5;
    if (bytes.size() - pos < len) throw Error(Errc::ProtocolError, "truncated field value");
    if (map.has(tag)) throw Error(Errc::ProtocolError, "duplicate tag " + std::to_string(tag));
    map.fields_.emplace_back(tag, Bytes(bytes.begin() + pos, bytes.begin() + pos + len));
    pos += len;
  }
  return map;
}

Bytes encode_list(const std::vector<FieldMap>& items) {
  Bytes out;
  put_u32(out, static_cast<std::uint32_t>(items.size()));
  for (const auto& item : items) {
    Bytes enc = item.encode();
    put_u32(out, static_cast<std::uint32_t>(enc.size()));
    append(out, enc);
  }
  return out;
}

std::vector<FieldMap> decode_list(ByteView bytes) {
  if (bytes.size() < 4) throw Error(Errc::ProtocolError, "truncated list");
  std::uint32_t count = get_u32(bytes.data());
  std::size_t pos = 4;
  std::vector<FieldMap> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (bytes.size() - pos < 4) throw Error(Errc::ProtocolError, "truncated list entry");
    std::uint32_t len = get_u32(bytes.data() + pos);
    pos += 4;
    if (bytes.size() - pos < len) throw Error(Errc::ProtocolError, "truncated list entry");
    out.push_back(FieldMap::decode(bytes.subspan(pos, len)));
    pos += len;
  }
  return out;
}

}  // namespace gridfs::wire

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridfs/bytes.hpp"

namespace gridfs::wire {

// Tag-length-value map used as the structured payload of control frames.
// Wire form: repeated tag(1) | value_len(4, BE) | value.
// Integers are stored as 8-byte big-endian values; readers also accept the
// 1-, 2- and 4-byte widths.
class FieldMap {
 public:
  using Tag = std::uint8_t;

  FieldMap() = default;

  FieldMap& set(Tag tag, Bytes value);
  FieldMap& set(Tag tag, ByteView value) { return set(tag, Bytes(value.begin(), value.end())); }
  FieldMap& set_str(Tag tag, std::string_view value) { return set(tag, to_bytes(value)); }
  FieldMap& set_u64(Tag tag, std::uint64_t value);
  FieldMap& set_map(Tag tag, const FieldMap& nested) { return set(tag, nested.encode()); }

  bool has(Tag tag) const { return find(tag) != nullptr; }
  const Bytes* find(Tag tag) const;
  void erase(Tag tag);

  std::optional<std::uint64_t> get_u64(Tag tag) const;
  std::optional<std::string> get_str(Tag tag) const;

  // The require_* accessors throw Error(ProtocolError) when the tag is absent
  // or malformed.
  std::uint64_t require_u64(Tag tag) const;
  std::string require_str(Tag tag) const;
  const Bytes& require(Tag tag) const;
  FieldMap require_map(Tag tag) const;

  std::uint64_t u64_or(Tag tag, std::uint64_t fallback) const {
    return get_u64(tag).value_or(fallback);
  }

  const std::vector<std::pair<Tag, Bytes>>& fields() const { return fields_; }
  bool empty() const { return fields_.empty(); }

  Bytes encode() const;
  // Throws Error(ProtocolError) on truncated records or duplicate tags.
  static FieldMap decode(ByteView bytes);

  bool operator==(const FieldMap&) const = default;

 private:
  std::vector<std::pair<Tag, Bytes>> fields_;
};

// Sequences of nested maps (task lists, result arrays):
// count(4, BE) | repeated len(4, BE) | encoded map.
Bytes encode_list(const std::vector<FieldMap>& items);
std::vector<FieldMap> decode_list(ByteView bytes);

}  // namespace gridfs::wire

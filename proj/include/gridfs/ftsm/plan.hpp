#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridfs/net/client.hpp"

namespace gridfs::ftsm {

using net::TransferId;

enum class Direction : std::uint8_t { Push = 1, Pull = 2 };

struct Region {
  std::uint64_t offset{0};
  std::uint64_t length{0};
};

// One stream's contiguous assignment.
struct Span {
  std::uint8_t stream_index{0};
  std::uint64_t offset{0};  // absolute file offset
  std::uint64_t length{0};
  bool operator==(const Span&) const = default;
};

struct TransferPlan {
  TransferId transfer_id{};
  std::string path_src;
  std::string path_dst;
  std::uint64_t region_offset{0};
  std::uint64_t region_length{0};
  std::uint32_t chunk_size{0};
  std::uint8_t stream_count{1};
  Direction direction{Direction::Push};
  std::vector<Span> spans;

  std::uint64_t planned_bytes() const;
};

// Splits the region into stream_count contiguous spans of ceil(L/N) bytes,
// the last one shorter; streams with nothing left get no span. Region
// defaults to the whole file. Throws EmptyRegion for zero-length regions and
// InvalidArgument when the region leaves the file.
TransferPlan plan_transfer(std::uint64_t file_size, std::optional<Region> region,
                           std::uint8_t stream_count, std::uint32_t chunk_size);

// A CHUNK record's extent.
struct ChunkExtent {
  std::uint64_t offset;
  std::uint32_t length;
};

// Cuts a span along the chunk grid anchored at region_offset, so a chunk never
// straddles two grid cells.
std::vector<ChunkExtent> chunk_span(const Span& span, std::uint64_t region_offset,
                                    std::uint32_t chunk_size);

// Fixed CHUNK payload layout:
// transfer_id(16) | stream_index(1) | offset(8, BE) | length(4, BE) | payload
inline constexpr std::size_t kChunkHeaderSize = 29;

Bytes encode_chunk_header(const TransferId& id, std::uint8_t stream_index, std::uint64_t offset,
                          std::uint32_t length);

struct ChunkView {
  TransferId transfer_id{};
  std::uint8_t stream_index{0};
  std::uint64_t offset{0};
  ByteView data;
};

// Throws ProtocolError when the declared length disagrees with the payload.
ChunkView decode_chunk(ByteView payload);

// Span lists travel as a FieldMap list: tag 1 stream, 2 offset, 3 length.
Bytes encode_spans(const std::vector<Span>& spans);
std::vector<Span> decode_spans(ByteView bytes);

}  // namespace gridfs::ftsm

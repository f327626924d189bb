#include "gridfs/ftsm/plan.hpp"

#include <algorithm>

#include "gridfs/error.hpp"
#include "gridfs/wire/fieldmap.hpp"

namespace gridfs::ftsm {

std::uint64_t TransferPlan::planned_bytes() const {
  std::uint64_t total = 0;
  for (const auto& s : spans) total += s.length;
  return total;
}

TransferPlan plan_transfer(std::uint64_t file_size, std::optional<Region> region,
                           std::uint8_t stream_count, std::uint32_t chunk_size) {
  if (stream_count < 1) throw Error(Errc::InvalidArgument, "stream_count must be >= 1");
  if (chunk_size < 1) throw Error(Errc::InvalidArgument, "chunk_size must be >= 1");
  Region r = region.value_or(Region{0, file_size});
  if (r.offset > file_size || r.length > file_size - r.offset) {
    throw Error(Errc::InvalidArgument, "region lies outside the file");
  }
  if (r.length == 0) throw Error(Errc::EmptyRegion, "nothing to transfer");

  TransferPlan plan;
  plan.region_offset = r.offset;
  plan.region_length = r.length;
  plan.chunk_size = chunk_size;
  plan.stream_count = stream_count;

  std::uint64_t per = (r.length + stream_count - 1) / stream_count;
  for (std::uint8_t i = 0; i < stream_count; ++i) {
    std::uint64_t start = std::uint64_t{i} * per;
    if (start >= r.length) break;
    plan.spans.push_back(Span{i, r.offset + start, std::min(per, r.length - start)});
  }
  return plan;
}

std::vector<ChunkExtent> chunk_span(const Span& span, std::uint64_t region_offset,
                                    std::uint32_t chunk_size) {
  std::vector<ChunkExtent> out;
  std::uint64_t pos = span.offset;
  std::uint64_t end = span.offset + span.length;
  while (pos < end) {
    std::uint64_t cell_end = region_offset + ((pos - region_offset) / chunk_size + 1) * chunk_size;
    std::uint64_t stop = std::min(end, cell_end);
    out.push_back(ChunkExtent{pos, static_cast<std::uint32_t>(stop - pos)});
    pos = stop;
  }
  return out;
}

Bytes encode_chunk_header(const TransferId& id, std::uint8_t stream_index, std::uint64_t offset,
                          std::uint32_t length) {
  Bytes h(id.begin(), id.end());
  h.push_back(stream_index);
  put_u64(h, offset);
  put_u32(h, length);
  return h;
}

ChunkView decode_chunk(ByteView payload) {
  if (payload.size() < kChunkHeaderSize) throw Error(Errc::ProtocolError, "short CHUNK");
  ChunkView v;
  std::copy_n(payload.begin(), 16, v.transfer_id.begin());
  v.stream_index = payload[16];
  v.offset = get_u64(payload.data() + 17);
  std::uint32_t len = get_u32(payload.data() + 25);
  if (payload.size() - kChunkHeaderSize != len) {
    throw Error(Errc::ProtocolError, "CHUNK length disagrees with payload");
  }
  v.data = payload.subspan(kChunkHeaderSize);
  return v;
}

Bytes encode_spans(const std::vector<Span>& spans) {
  std::vector<wire::FieldMap> items;
  for (const auto& s : spans) {
    wire::FieldMap m;
    m.set_u64(1, s.stream_index).set_u64(2, s.offset).set_u64(3, s.length);
    items.push_back(std::move(m));
  }
  return wire::encode_list(items);
}

std::vector<Span> decode_spans(ByteView bytes) {
  std::vector<Span> out;
  for (const auto& m : wire::decode_list(bytes)) {
    out.push_back(Span{static_cast<std::uint8_t>(m.require_u64(1)), m.require_u64(2),
                       m.require_u64(3)});
  }
  return out;
}

}  // namespace gridfs::ftsm

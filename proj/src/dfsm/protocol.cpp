#include "gridfs/dfsm/protocol.hpp"

#include "gridfs/wire/tags.hpp"

namespace gridfs::dfsm {

namespace tag = wire::dfs_tag;

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::Read: return "read";
    case Op::Write: return "write";
    case Op::Flush: return "flush";
    case Op::Lock: return "lock";
    case Op::Unlock: return "unlock";
    case Op::Seek: return "seek";
    case Op::Close: return "close";
    case Op::SetLength: return "setlength";
    case Op::Stat: return "stat";
  }
  return "?";
}

wire::FieldMap DfsRequest::to_fields() const {
  wire::FieldMap m;
  m.set_u64(tag::kOp, static_cast<std::uint8_t>(op));
  m.set_u64(tag::kRequestId, request_id);
  if (!path.empty()) m.set_str(tag::kPath, path);
  m.set_u64(tag::kOffset, offset);
  m.set_u64(tag::kLength, length);
  if (op == Op::Write) m.set(tag::kData, data);
  if (op == Op::Seek) m.set_u64(tag::kSeekOrigin, static_cast<std::uint8_t>(seek_origin));
  if (op == Op::Unlock) m.set_u64(tag::kLockId, lock_id);
  return m;
}

DfsRequest DfsRequest::from_fields(const wire::FieldMap& m) {
  DfsRequest r;
  auto op = m.require_u64(tag::kOp);
  if (op < 1 || op > 9) throw Error(Errc::ProtocolError, "unknown DFS op");
  r.op = static_cast<Op>(op);
  r.request_id = m.require_u64(tag::kRequestId);
  r.path = m.get_str(tag::kPath).value_or("");
  r.offset = m.u64_or(tag::kOffset, 0);
  r.length = m.u64_or(tag::kLength, 0);
  if (const Bytes* d = m.find(tag::kData)) r.data = *d;
  auto origin = m.u64_or(tag::kSeekOrigin, 0);
  if (origin > 2) throw Error(Errc::ProtocolError, "bad seek origin");
  r.seek_origin = static_cast<SeekOrigin>(origin);
  r.lock_id = m.u64_or(tag::kLockId, 0);
  return r;
}

wire::FieldMap DfsResponse::to_fields() const {
  wire::FieldMap m;
  m.set_u64(tag::kRequestId, request_id);
  m.set_u64(tag::kStatus, static_cast<std::uint16_t>(status));
  if (!message.empty()) m.set_str(tag::kMessage, message);
  if (!data.empty()) m.set(tag::kData, data);
  m.set_u64(tag::kLength, length);
  if (lock_id) m.set_u64(tag::kLockId, lock_id);
  m.set_u64(tag::kSize, stat.size);
  m.set_u64(tag::kExists, stat.exists ? 1 : 0);
  return m;
}

DfsResponse DfsResponse::from_fields(const wire::FieldMap& m) {
  DfsResponse r;
  r.request_id = m.require_u64(tag::kRequestId);
  r.status = static_cast<Errc>(m.require_u64(tag::kStatus));
  r.message = m.get_str(tag::kMessage).value_or("");
  if (const Bytes* d = m.find(tag::kData)) r.data = *d;
  r.length = m.u64_or(tag::kLength, 0);
  r.lock_id = m.u64_or(tag::kLockId, 0);
  r.stat.size = m.u64_or(tag::kSize, 0);
  r.stat.exists = m.u64_or(tag::kExists, 0) != 0;
  return r;
}

std::uint64_t resolve_seek(SeekOrigin origin, std::int64_t delta, const FileStat& stat,
                           std::uint64_t current_position) {
  auto apply = [](std::uint64_t base, std::int64_t d) -> std::uint64_t {
    if (d < 0) {
      auto mag = static_cast<std::uint64_t>(-(d + 1)) + 1;
      if (mag > base) throw Error(Errc::NegativeOffset, "seek resolves before start of file");
      return base - mag;
    }
    return base + static_cast<std::uint64_t>(d);
  };
  switch (origin) {
    case SeekOrigin::Begin: return apply(0, delta);
    case SeekOrigin::End:
      if (delta > 0) throw Error(Errc::InvalidArgument, "END-relative seek needs delta <= 0");
      return apply(stat.size, delta);
    case SeekOrigin::CurrentHint: return apply(current_position, delta);
  }
  throw Error(Errc::InvalidArgument, "bad seek origin");
}

}  // namespace gridfs::dfsm

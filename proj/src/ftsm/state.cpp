#include "gridfs/ftsm/state.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <iterator>

#include "gridfs/error.hpp"
#include "gridfs/wire/fieldmap.hpp"

namespace fs = std::filesystem;

namespace gridfs::ftsm {

namespace {

namespace tag {
constexpr std::uint8_t kId = 1, kPath = 2, kFileSize = 3, kRegionOffset = 4, kRegionLength = 5,
                       kChunk = 6, kStreams = 7, kStreamNext = 8, kBitmap = 9, kMd5 = 10;
}

}  // namespace

TransferState TransferState::fresh(const TransferId& id, std::string path,
                                   std::uint64_t file_size, std::uint64_t region_offset,
                                   std::uint64_t region_length, std::uint32_t chunk_size,
                                   std::uint8_t stream_count) {
  if (chunk_size == 0) throw Error(Errc::InvalidArgument, "chunk_size must be >= 1");
  TransferState s;
  s.transfer_id = id;
  s.path = std::move(path);
  s.file_size = file_size;
  s.region_offset = region_offset;
  s.region_length = region_length;
  s.chunk_size = chunk_size;
  s.stream_count = std::max<std::uint8_t>(stream_count, 1);
  s.stream_next.assign(s.stream_count, region_offset);
  s.bitmap.assign((s.cell_count() + 7) / 8, 0);
  return s;
}

std::size_t TransferState::cell_count() const {
  return static_cast<std::size_t>((region_length + chunk_size - 1) / chunk_size);
}

std::uint64_t TransferState::cell_length(std::size_t i) const {
  std::uint64_t start = std::uint64_t{i} * chunk_size;
  return std::min<std::uint64_t>(chunk_size, region_length - start);
}

void TransferState::clear_bitmap() {
  std::fill(bitmap.begin(), bitmap.end(), 0);
  std::fill(stream_next.begin(), stream_next.end(), region_offset);
  md5.reset();
}

bool TransferState::bitmap_full() const {
  for (std::size_t i = 0; i < cell_count(); ++i) {
    if (!cell_done(i)) return false;
  }
  return true;
}

std::uint64_t TransferState::received_bytes() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < cell_count(); ++i) {
    if (cell_done(i)) n += cell_length(i);
  }
  return n;
}

Bytes TransferState::encode() const {
  wire::FieldMap m;
  m.set(tag::kId, ByteView(transfer_id));
  m.set_str(tag::kPath, path);
  m.set_u64(tag::kFileSize, file_size);
  m.set_u64(tag::kRegionOffset, region_offset);
  m.set_u64(tag::kRegionLength, region_length);
  m.set_u64(tag::kChunk, chunk_size);
  m.set_u64(tag::kStreams, stream_count);
  Bytes next;
  for (auto v : stream_next) put_u64(next, v);
  m.set(tag::kStreamNext, std::move(next));
  m.set(tag::kBitmap, ByteView(bitmap));
  if (md5) m.set(tag::kMd5, ByteView(*md5));
  return m.encode();
}

TransferState TransferState::decode(ByteView bytes) {
  try {
    auto m = wire::FieldMap::decode(bytes);
    TransferState s;
    s.transfer_id = to_array<16>(m.require(tag::kId));
    s.path = m.require_str(tag::kPath);
    s.file_size = m.require_u64(tag::kFileSize);
    s.region_offset = m.require_u64(tag::kRegionOffset);
    s.region_length = m.require_u64(tag::kRegionLength);
    auto chunk = m.require_u64(tag::kChunk);
    auto streams = m.require_u64(tag::kStreams);
    if (chunk == 0 || chunk > 0xFFFFFFFFu || streams == 0 || streams > 255) {
      throw Error(Errc::StateCorrupt, "bad chunk size or stream count");
    }
    s.chunk_size = static_cast<std::uint32_t>(chunk);
    s.stream_count = static_cast<std::uint8_t>(streams);
    const auto& next = m.require(tag::kStreamNext);
    if (next.size() != 8u * s.stream_count) throw Error(Errc::StateCorrupt, "stream offsets");
    for (std::size_t i = 0; i < s.stream_count; ++i) s.stream_next.push_back(get_u64(&next[i * 8]));
    s.bitmap = m.require(tag::kBitmap);
    if (s.region_offset + s.region_length < s.region_offset ||
        s.bitmap.size() != (s.cell_count() + 7) / 8) {
      throw Error(Errc::StateCorrupt, "bitmap does not match region");
    }
    if (const auto* d = m.find(tag::kMd5)) s.md5 = to_array<16>(*d);
    return s;
  } catch (const Error& e) {
    if (e.code() == Errc::StateCorrupt) throw;
    throw Error(Errc::StateCorrupt, e.detail());
  }
}

void TransferState::save(const fs::path& file) const {
  fs::path tmp = file;
  tmp += ".tmp";
  Bytes data = encode();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Internal, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(Errc::StorageFull, "short write on " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::optional<TransferState> TransferState::load(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(data);
}

fs::path sidecar_path(const fs::path& destination) {
  fs::path p = destination;
  p += ".xferstate";
  return p;
}

TransferPlan resume(const TransferState& state, std::uint64_t receiver_file_size,
                    std::uint8_t streams) {
  if (streams < 1) throw Error(Errc::InvalidArgument, "stream_count must be >= 1");
  if (state.region_offset + state.region_length > state.file_size) {
    throw Error(Errc::StateCorrupt, "region extends beyond recorded file size");
  }
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < state.cell_count(); ++i) {
    if (!state.cell_done(i)) {
      missing.push_back(i);
    } else if (state.cell_offset(i) + state.cell_length(i) > receiver_file_size) {
      throw Error(Errc::StateCorrupt, "state claims bytes beyond the file");
    }
  }

  TransferPlan plan;
  plan.transfer_id = state.transfer_id;
  plan.path_dst = state.path;
  plan.region_offset = state.region_offset;
  plan.region_length = state.region_length;
  plan.chunk_size = state.chunk_size;
  plan.stream_count = streams;
  if (missing.empty()) return plan;

  std::size_t per = (missing.size() + streams - 1) / streams;
  for (std::size_t g = 0; g * per < missing.size(); ++g) {
    std::size_t end = std::min(missing.size(), (g + 1) * per);
    std::size_t run_start = missing[g * per];
    for (std::size_t k = g * per; k < end; ++k) {
      bool run_ends = k + 1 == end || missing[k + 1] != missing[k] + 1;
      if (!run_ends) continue;
      std::uint64_t off = state.cell_offset(run_start);
      std::uint64_t stop = state.cell_offset(missing[k]) + state.cell_length(missing[k]);
      plan.spans.push_back(Span{static_cast<std::uint8_t>(g), off, stop - off});
      if (k + 1 < end) run_start = missing[k + 1];
    }
  }
  return plan;
}

ReceiveTracker::ReceiveTracker(TransferState state, std::optional<fs::path> sidecar)
    : state_(std::move(state)), sidecar_(std::move(sidecar)) {
  cell_bytes_.resize(state_.cell_count());
  for (std::size_t i = 0; i < cell_bytes_.size(); ++i) {
    if (state_.cell_done(i)) cell_bytes_[i] = state_.cell_length(i);
  }
  stream_bytes_.assign(state_.stream_count, 0);
}

void ReceiveTracker::validate(std::uint64_t offset, std::uint64_t length) const {
  std::uint64_t end = offset + length;
  if (end < offset || offset < state_.region_offset ||
      end > state_.region_offset + state_.region_length) {
    throw Error(Errc::ProtocolError, "chunk outside the planned region");
  }
}

void ReceiveTracker::add(std::uint8_t stream_index, std::uint64_t offset, std::uint64_t length) {
  validate(offset, length);
  std::lock_guard lk(mu_);
  if (stream_index >= stream_bytes_.size()) {
    stream_bytes_.resize(stream_index + 1, 0);
    state_.stream_next.resize(stream_index + 1, state_.region_offset);
    state_.stream_count = static_cast<std::uint8_t>(stream_index + 1);
  }
  stream_bytes_[stream_index] += length;
  bytes_ += length;
  state_.stream_next[stream_index] = std::max(state_.stream_next[stream_index], offset + length);

  std::uint64_t pos = offset;
  std::uint64_t end = offset + length;
  while (pos < end) {
    std::size_t cell = static_cast<std::size_t>((pos - state_.region_offset) / state_.chunk_size);
    std::uint64_t cell_end = state_.cell_offset(cell) + state_.cell_length(cell);
    std::uint64_t stop = std::min(end, cell_end);
    cell_bytes_[cell] += stop - pos;
    if (cell_bytes_[cell] >= state_.cell_length(cell)) state_.mark(cell);
    pos = stop;
  }
  if (bytes_ - bytes_at_persist_ >= kPersistEvery) persist_locked();
}

bool ReceiveTracker::complete() const {
  std::lock_guard lk(mu_);
  return state_.bitmap_full();
}

TransferState ReceiveTracker::snapshot() const {
  std::lock_guard lk(mu_);
  return state_;
}

std::vector<std::uint64_t> ReceiveTracker::stream_bytes() const {
  std::lock_guard lk(mu_);
  return stream_bytes_;
}

std::uint64_t ReceiveTracker::bytes() const {
  std::lock_guard lk(mu_);
  return bytes_;
}

void ReceiveTracker::persist(bool force) {
  std::lock_guard lk(mu_);
  if (force || bytes_ - bytes_at_persist_ >= kPersistEvery) persist_locked();
}

void ReceiveTracker::persist_locked() {
  bytes_at_persist_ = bytes_;
  if (!sidecar_ || finished_) return;
  state_.save(*sidecar_);
}

void ReceiveTracker::close() {
  std::lock_guard lk(mu_);
  persist_locked();
  finished_ = true;
}

void ReceiveTracker::finish(const Md5Digest& md5) {
  std::lock_guard lk(mu_);
  state_.md5 = md5;
  finished_ = true;
  if (sidecar_) {
    std::error_code ec;
    fs::remove(*sidecar_, ec);
  }
}

void ReceiveTracker::discard_progress() {
  std::lock_guard lk(mu_);
  state_.clear_bitmap();
  std::fill(cell_bytes_.begin(), cell_bytes_.end(), 0);
  if (sidecar_) state_.save(*sidecar_);
}

Md5Digest md5_region(const fs::path& file, std::uint64_t offset, std::uint64_t length) {
  crypto::Md5 h;
  if (length == 0) return h.finish();
  int fd = ::open(file.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw Error(Errc::NoSuchFile, file.string());
  Bytes buf(1u << 20);
  std::uint64_t pos = offset;
  std::uint64_t end = offset + length;
  while (pos < end) {
    auto want = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), end - pos));
    ssize_t n = ::pread(fd, buf.data(), want, static_cast<off_t>(pos));
    if (n <= 0) {
      ::close(fd);
      throw Error(Errc::IntegrityMismatch, "file shorter than the region");
    }
    h.update(ByteView(buf.data(), static_cast<std::size_t>(n)));
    pos += static_cast<std::uint64_t>(n);
  }
  ::close(fd);
  return h.finish();
}

}  // namespace gridfs::ftsm

#include "gridfs/ftsm/engine.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <exception>
#include <thread>

#include <spdlog/spdlog.h>

#include "gridfs/error.hpp"
#include "gridfs/secchan/crypto.hpp"
#include "gridfs/wire/tags.hpp"

namespace fs = std::filesystem;

namespace gridfs::ftsm {

using wire::FieldMap;
using wire::FrameType;
namespace xt = wire::xfer_tag;

namespace {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_{-1};
};

Fd open_or_throw(const fs::path& p, int flags) {
  int fd = ::open(p.c_str(), flags | O_CLOEXEC, 0644);
  if (fd < 0) {
    if (errno == ENOENT) throw Error(Errc::NoSuchFile, p.filename().string());
    if (errno == EACCES) throw Error(Errc::PermissionDenied, p.filename().string());
    throw Error(Errc::Internal, "open " + p.filename().string() + ": " + std::strerror(errno));
  }
  return Fd(fd);
}

std::uint64_t fd_size(int fd) {
  struct stat st {};
  if (::fstat(fd, &st) != 0) throw Error(Errc::Internal, "fstat failed");
  return static_cast<std::uint64_t>(st.st_size);
}

void set_size(int fd, std::uint64_t size) {
  if (::ftruncate(fd, static_cast<off_t>(size)) != 0) {
    throw Error(errno == ENOSPC ? Errc::StorageFull : Errc::Internal, "cannot size file");
  }
}

void pwrite_all(int fd, ByteView data, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::pwrite(fd, data.data() + done, data.size() - done,
                         static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(errno == ENOSPC ? Errc::StorageFull : Errc::Internal, "write failed");
    }
    done += static_cast<std::size_t>(n);
  }
}

void pread_all(int fd, std::uint8_t* out, std::size_t len, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < len) {
    ssize_t n = ::pread(fd, out + done, len - done, static_cast<off_t>(offset + done));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(Errc::Internal, "source shorter than planned");
    done += static_cast<std::size_t>(n);
  }
}

Bytes encode_u64s(const std::vector<std::uint64_t>& v) {
  Bytes b;
  for (auto x : v) put_u64(b, x);
  return b;
}

std::vector<std::uint64_t> decode_u64s(const Bytes* b) {
  std::vector<std::uint64_t> v;
  if (!b) return v;
  for (std::size_t i = 0; i + 8 <= b->size(); i += 8) v.push_back(get_u64(b->data() + i));
  return v;
}

// Runs fn(i) for each index on its own thread and rethrows the first failure.
template <class Fn>
void run_parallel(const std::vector<std::uint8_t>& indices, Fn fn) {
  std::mutex mu;
  std::exception_ptr first;
  std::vector<std::thread> threads;
  threads.reserve(indices.size());
  for (auto idx : indices) {
    threads.emplace_back([&, idx] {
      try {
        fn(idx);
      } catch (...) {
        std::lock_guard lk(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

std::vector<std::uint8_t> stream_indices(const TransferPlan& plan) {
  std::vector<std::uint8_t> out;
  for (const auto& s : plan.spans) {
    if (std::find(out.begin(), out.end(), s.stream_index) == out.end()) {
      out.push_back(s.stream_index);
    }
  }
  return out;
}

[[noreturn]] void rethrow_as_stream_loss(const Error& e) {
  if (e.code() == Errc::ConnectionLost || e.code() == Errc::StreamLost) {
    throw Error(Errc::StreamLost, e.detail());
  }
  throw e;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------- client

struct FtsmClient::Source {
  virtual ~Source() = default;
  virtual std::uint64_t size() const = 0;
  virtual void read(std::uint64_t offset, std::uint8_t* out, std::size_t len) = 0;
  virtual std::optional<Md5Digest> digest(std::uint64_t offset, std::uint64_t length) = 0;
};

FtsmClient::FtsmClient(net::Session& control, net::Endpoint endpoint, net::ClientOptions options)
    : control_(control), endpoint_(std::move(endpoint)), options_(std::move(options)) {}

TransferResult FtsmClient::push(const fs::path& local, const std::string& remote,
                                const TransferOptions& opts) {
  struct Src final : Source {
    fs::path path;
    Fd fd;
    std::uint64_t bytes{0};
    std::uint64_t size() const override { return bytes; }
    void read(std::uint64_t offset, std::uint8_t* out, std::size_t len) override {
      pread_all(fd.get(), out, len, offset);
    }
    std::optional<Md5Digest> digest(std::uint64_t offset, std::uint64_t length) override {
      return md5_region(path, offset, length);
    }
  } src;
  src.path = local;
  src.fd = open_or_throw(local, O_RDONLY);
  src.bytes = fd_size(src.fd.get());
  return push_from(src, remote, opts.region ? 0 : xfer_flags::kWholeFile, opts);
}

TransferResult FtsmClient::push_memory(std::uint64_t bytes, const TransferOptions& opts) {
  struct Zero final : Source {
    std::uint64_t bytes{0};
    std::uint64_t size() const override { return bytes; }
    void read(std::uint64_t, std::uint8_t* out, std::size_t len) override {
      std::memset(out, 0, len);
    }
    std::optional<Md5Digest> digest(std::uint64_t, std::uint64_t) override { return std::nullopt; }
  } src;
  src.bytes = bytes;
  TransferOptions o = opts;
  o.resume = false;
  return push_from(src, "", xfer_flags::kMemSink, o);
}

TransferResult FtsmClient::push_from(Source& src, const std::string& remote, std::uint64_t flags,
                                     const TransferOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  const auto& params = control_.params;
  std::uint8_t streams = opts.streams ? std::min(opts.streams, params.stream_count)
                                      : params.stream_count;
  std::uint32_t chunk = opts.chunk_size ? std::min(opts.chunk_size, params.buffer_size)
                                        : params.buffer_size;
  Region region = opts.region.value_or(Region{0, src.size()});
  if (region.offset > src.size() || region.length > src.size() - region.offset) {
    throw Error(Errc::InvalidArgument, "region lies outside the source");
  }

  FieldMap offer;
  if (!opts.set_id.empty()) {
    offer.set_str(xt::kSetId, opts.set_id).set_str(xt::kName, remote);
  } else if (!(flags & xfer_flags::kMemSink)) {
    offer.set_str(xt::kPath, remote);
  }
  offer.set_u64(xt::kDirection, static_cast<std::uint64_t>(Direction::Push))
      .set_u64(xt::kFileSize, src.size())
      .set_u64(xt::kRegionOffset, region.offset)
      .set_u64(xt::kRegionLength, region.length)
      .set_u64(xt::kChunkSize, chunk)
      .set_u64(xt::kStreamCount, streams)
      .set_u64(xt::kFlags, flags);
  control_.channel.send(opts.resume ? FrameType::XferResume : FrameType::XferOffer, offer);
  FieldMap accept = control_.channel.recv_fields(FrameType::XferAccept);

  auto id = to_array<16>(accept.require(xt::kTransferId));
  auto ticket = to_array<32>(accept.require(xt::kTicket));
  chunk = static_cast<std::uint32_t>(accept.require_u64(xt::kChunkSize));
  streams = static_cast<std::uint8_t>(accept.require_u64(xt::kStreamCount));

  TransferPlan plan;
  if (const auto* bitmap = accept.find(xt::kBitmap)) {
    auto st = TransferState::fresh(id, remote, src.size(), region.offset, region.length, chunk,
                                   streams);
    if (bitmap->size() != st.bitmap.size()) throw Error(Errc::StateCorrupt, "bitmap size");
    st.bitmap = *bitmap;
    plan = resume(st, src.size(), streams);
  } else if (region.length > 0) {
    plan = plan_transfer(src.size(), region, streams, chunk);
  }
  plan.transfer_id = id;

  std::atomic<std::uint64_t> sent{0};
  std::vector<std::uint64_t> local_counts(streams, 0);
  net::ClientOptions sopts = options_;
  sopts.streams = 1;
  try {
    run_parallel(stream_indices(plan), [&](std::uint8_t idx) {
      auto s = net::open_stream(endpoint_, wire::Mode::FtsmPush, id, idx, ticket, sopts);
      Bytes buf(kChunkHeaderSize + chunk);
      for (const auto& span : plan.spans) {
        if (span.stream_index != idx) continue;
        for (const auto& ext : chunk_span(span, plan.region_offset, chunk)) {
          Bytes h = encode_chunk_header(id, idx, ext.offset, ext.length);
          std::copy(h.begin(), h.end(), buf.begin());
          src.read(ext.offset, buf.data() + kChunkHeaderSize, ext.length);
          if (opts.abort_after_bytes) {
            if (sent.fetch_add(ext.length) + ext.length > opts.abort_after_bytes) {
              s.channel.socket().shutdown_both();
              throw Error(Errc::StreamLost, "stream aborted");
            }
          } else {
            sent.fetch_add(ext.length);
          }
          s.channel.send_payload(FrameType::Chunk,
                                 ByteView(buf.data(), kChunkHeaderSize + ext.length));
          local_counts[idx] += ext.length;
        }
      }
      FieldMap done;
      done.set(xt::kTransferId, ByteView(id)).set_u64(xt::kStreamIndex, idx);
      s.channel.send(FrameType::XferDone, done);
      s.channel.recv_fields(FrameType::XferDone);
    });
  } catch (const Error& e) {
    rethrow_as_stream_loss(e);
  }

  FieldMap done;
  done.set(xt::kTransferId, ByteView(id));
  std::optional<Md5Digest> digest;
  if (!(flags & xfer_flags::kMemSink)) digest = src.digest(region.offset, region.length);
  if (digest) done.set(xt::kMd5, ByteView(*digest));
  control_.channel.send(FrameType::XferDone, done);
  FieldMap reply = control_.channel.recv_fields(FrameType::XferDone);

  TransferResult r;
  r.transfer_id = id;
  r.region_offset = region.offset;
  r.region_length = region.length;
  r.bytes = sent.load();
  r.seconds = seconds_since(t0);
  if (const auto* m = reply.find(xt::kMd5)) r.md5 = to_array<16>(*m);
  else if (digest) r.md5 = *digest;
  r.stream_bytes = decode_u64s(reply.find(xt::kStreamBytes));
  if (r.stream_bytes.empty()) r.stream_bytes = local_counts;
  return r;
}

TransferResult FtsmClient::pull(const std::string& remote, const fs::path& local,
                                const TransferOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  const auto& params = control_.params;
  std::uint8_t streams = opts.streams ? std::min(opts.streams, params.stream_count)
                                      : params.stream_count;
  std::uint32_t chunk = opts.chunk_size ? std::min(opts.chunk_size, params.buffer_size)
                                        : params.buffer_size;

  FieldMap offer;
  if (!opts.set_id.empty()) {
    offer.set_str(xt::kSetId, opts.set_id).set_str(xt::kName, remote);
  } else {
    offer.set_str(xt::kPath, remote);
  }
  offer.set_u64(xt::kDirection, static_cast<std::uint64_t>(Direction::Pull))
      .set_u64(xt::kChunkSize, chunk)
      .set_u64(xt::kStreamCount, streams);
  if (opts.region) {
    offer.set_u64(xt::kRegionOffset, opts.region->offset)
        .set_u64(xt::kRegionLength, opts.region->length);
  }
  control_.channel.send(FrameType::XferOffer, offer);
  FieldMap accept = control_.channel.recv_fields(FrameType::XferAccept);

  auto id = to_array<16>(accept.require(xt::kTransferId));
  auto ticket = to_array<32>(accept.require(xt::kTicket));
  chunk = static_cast<std::uint32_t>(accept.require_u64(xt::kChunkSize));
  streams = static_cast<std::uint8_t>(accept.require_u64(xt::kStreamCount));
  std::uint64_t file_size = accept.require_u64(xt::kFileSize);
  Region region{accept.require_u64(xt::kRegionOffset), accept.require_u64(xt::kRegionLength)};

  if (local.has_parent_path()) fs::create_directories(local.parent_path());
  Fd fd = open_or_throw(local, O_RDWR | O_CREAT);
  std::uint64_t local_size = fd_size(fd.get());
  fs::path sidecar = sidecar_path(local);

  std::optional<TransferState> prior;
  if (opts.resume) prior = TransferState::load(sidecar);
  TransferState st;
  TransferPlan plan;
  if (prior && prior->region_offset == region.offset && prior->region_length == region.length &&
      prior->chunk_size == chunk && prior->file_size == file_size) {
    st = *prior;
    st.transfer_id = id;
    plan = resume(st, local_size, streams);
  } else {
    st = TransferState::fresh(id, local.string(), file_size, region.offset, region.length, chunk,
                              streams);
    if (region.length > 0) plan = plan_transfer(file_size, region, streams, chunk);
  }
  plan.transfer_id = id;
  std::uint64_t target = opts.region ? std::max(local_size, region.offset + region.length)
                                     : file_size;
  if (target != local_size) set_size(fd.get(), target);

  ReceiveTracker tracker(st, sidecar);
  tracker.persist(true);

  std::atomic<std::uint64_t> received{0};
  net::ClientOptions sopts = options_;
  sopts.streams = 1;
  try {
    run_parallel(stream_indices(plan), [&](std::uint8_t idx) {
      auto s = net::open_stream(endpoint_, wire::Mode::FtsmPull, id, idx, ticket, sopts);
      std::vector<Span> mine;
      for (const auto& span : plan.spans) {
        if (span.stream_index == idx) mine.push_back(span);
      }
      FieldMap req;
      req.set(xt::kTransferId, ByteView(id))
          .set_u64(xt::kStreamIndex, idx)
          .set(xt::kSpans, encode_spans(mine));
      s.channel.send(FrameType::XferOffer, req);
      for (;;) {
        wire::Frame f = s.channel.recv();
        if (f.type == FrameType::XferDone) break;
        if (f.type == FrameType::Error) net::throw_remote_error(FieldMap::decode(f.payload));
        if (f.type != FrameType::Chunk) throw Error(Errc::ProtocolError, "unexpected frame");
        ChunkView cv = decode_chunk(f.payload);
        if (cv.transfer_id != id || cv.stream_index != idx) {
          throw Error(Errc::ProtocolError, "chunk for another stream");
        }
        tracker.validate(cv.offset, cv.data.size());
        if (opts.abort_after_bytes &&
            received.load() + cv.data.size() > opts.abort_after_bytes) {
          s.channel.socket().shutdown_both();
          throw Error(Errc::StreamLost, "stream aborted");
        }
        pwrite_all(fd.get(), cv.data, cv.offset);
        tracker.add(idx, cv.offset, cv.data.size());
        received.fetch_add(cv.data.size());
      }
    });
  } catch (const Error& e) {
    tracker.persist(true);
    rethrow_as_stream_loss(e);
  }

  FieldMap done;
  done.set(xt::kTransferId, ByteView(id));
  control_.channel.send(FrameType::XferDone, done);
  FieldMap reply = control_.channel.recv_fields(FrameType::XferDone);
  auto remote_md5 = to_array<16>(reply.require(xt::kMd5));
  ::fsync(fd.get());
  if (!tracker.complete()) {
    tracker.persist(true);
    throw Error(Errc::StreamLost, "transfer incomplete");
  }
  auto local_md5 = md5_region(local, region.offset, region.length);
  if (local_md5 != remote_md5) {
    tracker.discard_progress();
    throw Error(Errc::IntegrityMismatch, "MD5 differs after pull");
  }
  tracker.finish(local_md5);

  TransferResult r;
  r.transfer_id = id;
  r.region_offset = region.offset;
  r.region_length = region.length;
  r.bytes = received.load();
  r.seconds = seconds_since(t0);
  r.md5 = local_md5;
  r.stream_bytes = tracker.stream_bytes();
  return r;
}

TransferResult push_file(const net::Endpoint& ep, const net::Credentials& creds,
                         const net::ClientOptions& copts, const fs::path& local,
                         const std::string& remote, const TransferOptions& opts) {
  auto session = net::open_session(ep, wire::Mode::FtsmPush, creds, copts);
  FtsmClient client(session, ep, copts);
  return client.push(local, remote, opts);
}

TransferResult pull_file(const net::Endpoint& ep, const net::Credentials& creds,
                         const net::ClientOptions& copts, const std::string& remote,
                         const fs::path& local, const TransferOptions& opts) {
  auto session = net::open_session(ep, wire::Mode::FtsmPull, creds, copts);
  FtsmClient client(session, ep, copts);
  return client.pull(remote, local, opts);
}

// ---------------------------------------------------------------- server

struct FtsmService::Active {
  TransferId id{};
  net::Ticket ticket{};
  Direction direction{Direction::Push};
  std::uint64_t flags{0};
  std::string owner;
  fs::path file;
  Fd fd;
  std::uint64_t file_size{0};
  std::uint64_t region_offset{0};
  std::uint64_t region_length{0};
  std::uint32_t chunk_size{1};
  std::uint8_t stream_count{1};
  std::unique_ptr<ReceiveTracker> tracker;  // push only

  bool mem_sink() const { return (flags & xfer_flags::kMemSink) != 0; }
};

FtsmService::FtsmService(AuditSink* audit) : audit_(audit) {}
FtsmService::~FtsmService() = default;

bool FtsmService::is_control_frame(FrameType type) {
  return type == FrameType::XferOffer || type == FrameType::XferResume ||
         type == FrameType::XferDone;
}

std::shared_ptr<FtsmService::Active> FtsmService::find(const TransferId& id) const {
  std::lock_guard lk(mu_);
  auto it = transfers_.find(id);
  return it == transfers_.end() ? nullptr : it->second;
}

std::size_t FtsmService::active_transfers() const {
  std::lock_guard lk(mu_);
  return transfers_.size();
}

void FtsmService::handle_control(net::Channel& ch, Control& c, FrameType type,
                                 const FieldMap& f) {
  try {
    auto dir = static_cast<Direction>(f.u64_or(xt::kDirection, 1));
    if (type == FrameType::XferDone) {
      done(ch, c, f);
    } else if (dir == Direction::Pull) {
      offer_pull(ch, c, f);
    } else {
      offer_push(ch, c, f, type == FrameType::XferResume);
    }
  } catch (const Error& e) {
    spdlog::debug("ftsm: {}", e.what());
    ch.send_error(e.code(), e.detail());
  } catch (const fs::filesystem_error& e) {
    ch.send_error(Errc::Internal, e.what());
  }
}

void FtsmService::offer_push(net::Channel& ch, Control& c, const FieldMap& f, bool want_resume) {
  auto t = std::make_shared<Active>();
  t->id = crypto::random_array<16>();
  t->ticket = crypto::random_array<32>();
  t->direction = Direction::Push;
  t->owner = c.username;
  t->flags = f.u64_or(xt::kFlags, 0);
  std::uint64_t src_size = f.require_u64(xt::kFileSize);
  t->region_offset = f.require_u64(xt::kRegionOffset);
  t->region_length = f.require_u64(xt::kRegionLength);
  if (t->region_offset > src_size || t->region_length > src_size - t->region_offset) {
    throw Error(Errc::InvalidArgument, "region lies outside the source");
  }
  t->chunk_size = static_cast<std::uint32_t>(std::clamp<std::uint64_t>(
      f.u64_or(xt::kChunkSize, c.params.buffer_size), 1, c.params.buffer_size));
  t->stream_count = static_cast<std::uint8_t>(
      std::clamp<std::uint64_t>(f.u64_or(xt::kStreamCount, 1), 1, c.params.stream_count));
  std::uint64_t region_end = t->region_offset + t->region_length;

  FieldMap accept;
  if (t->mem_sink()) {
    audit(audit_, "effect:ftsm:mem");
    t->file_size = src_size;
    t->tracker = std::make_unique<ReceiveTracker>(
        TransferState::fresh(t->id, "", src_size, t->region_offset, t->region_length,
                             t->chunk_size, t->stream_count),
        std::nullopt);
  } else {
    t->file = c.resolve(f, Direction::Push);
    audit(audit_, "effect:ftsm:push");
    if (t->file.has_parent_path()) fs::create_directories(t->file.parent_path());
    t->fd = open_or_throw(t->file, O_RDWR | O_CREAT);
    std::uint64_t cur = fd_size(t->fd.get());
    bool whole = (t->flags & xfer_flags::kWholeFile) != 0;
    t->file_size = whole ? src_size : std::max(cur, region_end);
    fs::path sidecar = sidecar_path(t->file);

    std::optional<TransferState> st;
    if (want_resume) {
      auto prior = TransferState::load(sidecar);
      if (prior && prior->region_offset == t->region_offset &&
          prior->region_length == t->region_length && prior->chunk_size == t->chunk_size &&
          prior->file_size == t->file_size) {
        resume(*prior, cur, t->stream_count);  // StateCorrupt check
        t->id = prior->transfer_id;
        prior->stream_count = t->stream_count;
        prior->stream_next.resize(t->stream_count, t->region_offset);
        st = std::move(prior);
      }
    }
    if (!st) {
      st = TransferState::fresh(t->id, t->file.string(), t->file_size, t->region_offset,
                                t->region_length, t->chunk_size, t->stream_count);
    }
    if (whole ? cur != t->file_size : cur < t->file_size) set_size(t->fd.get(), t->file_size);
    if (want_resume) accept.set(xt::kBitmap, ByteView(st->bitmap));
    t->tracker = std::make_unique<ReceiveTracker>(std::move(*st), sidecar);
    t->tracker->persist(true);
  }

  accept.set(xt::kTransferId, ByteView(t->id))
      .set(xt::kTicket, ByteView(t->ticket))
      .set_u64(xt::kChunkSize, t->chunk_size)
      .set_u64(xt::kStreamCount, t->stream_count)
      .set_u64(xt::kRegionOffset, t->region_offset)
      .set_u64(xt::kRegionLength, t->region_length)
      .set_u64(xt::kFileSize, t->file_size);
  {
    std::lock_guard lk(mu_);
    transfers_[t->id] = t;
  }
  c.owned.push_back(t->id);
  ch.send(FrameType::XferAccept, accept);
}

void FtsmService::offer_pull(net::Channel& ch, Control& c, const FieldMap& f) {
  auto t = std::make_shared<Active>();
  t->id = crypto::random_array<16>();
  t->ticket = crypto::random_array<32>();
  t->direction = Direction::Pull;
  t->owner = c.username;
  t->file = c.resolve(f, Direction::Pull);
  audit(audit_, "effect:ftsm:pull");
  t->fd = open_or_throw(t->file, O_RDONLY);
  t->file_size = fd_size(t->fd.get());
  t->region_offset = f.u64_or(xt::kRegionOffset, 0);
  if (t->region_offset > t->file_size) {
    throw Error(Errc::InvalidArgument, "region lies outside the file");
  }
  t->region_length = f.u64_or(xt::kRegionLength, t->file_size - t->region_offset);
  if (t->region_length > t->file_size - t->region_offset) {
    throw Error(Errc::InvalidArgument, "region lies outside the file");
  }
  t->chunk_size = static_cast<std::uint32_t>(std::clamp<std::uint64_t>(
      f.u64_or(xt::kChunkSize, c.params.buffer_size), 1, c.params.buffer_size));
  t->stream_count = static_cast<std::uint8_t>(
      std::clamp<std::uint64_t>(f.u64_or(xt::kStreamCount, 1), 1, c.params.stream_count));

  FieldMap accept;
  accept.set(xt::kTransferId, ByteView(t->id))
      .set(xt::kTicket, ByteView(t->ticket))
      .set_u64(xt::kChunkSize, t->chunk_size)
      .set_u64(xt::kStreamCount, t->stream_count)
      .set_u64(xt::kRegionOffset, t->region_offset)
      .set_u64(xt::kRegionLength, t->region_length)
      .set_u64(xt::kFileSize, t->file_size);
  {
    std::lock_guard lk(mu_);
    transfers_[t->id] = t;
  }
  c.owned.push_back(t->id);
  ch.send(FrameType::XferAccept, accept);
}

void FtsmService::done(net::Channel& ch, Control& c, const FieldMap& f) {
  auto id = to_array<16>(f.require(xt::kTransferId));
  auto t = find(id);
  if (!t || std::find(c.owned.begin(), c.owned.end(), id) == c.owned.end()) {
    throw Error(Errc::ProtocolError, "unknown transfer");
  }
  auto forget = [&] {
    std::lock_guard lk(mu_);
    transfers_.erase(id);
    c.owned.erase(std::remove(c.owned.begin(), c.owned.end(), id), c.owned.end());
  };

  FieldMap reply;
  reply.set(xt::kTransferId, ByteView(id));
  if (t->direction == Direction::Pull) {
    reply.set(xt::kMd5, ByteView(md5_region(t->file, t->region_offset, t->region_length)));
    forget();
    ch.send(FrameType::XferDone, reply);
    return;
  }

  auto& tr = *t->tracker;
  if (!tr.complete()) {
    tr.persist(true);
    auto st = tr.snapshot();
    throw Error(Errc::StreamLost, std::to_string(st.received_bytes()) + " of " +
                                      std::to_string(st.region_length) + " bytes received");
  }
  Md5Digest digest{};
  if (!t->mem_sink()) {
    ::fsync(t->fd.get());
    digest = md5_region(t->file, t->region_offset, t->region_length);
    const auto* claimed = f.find(xt::kMd5);
    if (!claimed || !crypto::equal_ct(*claimed, digest)) {
      tr.discard_progress();
      forget();
      throw Error(Errc::IntegrityMismatch, "MD5 differs after push");
    }
    reply.set(xt::kMd5, ByteView(digest));
  }
  tr.finish(digest);
  reply.set_u64(xt::kBytes, tr.bytes()).set(xt::kStreamBytes, encode_u64s(tr.stream_bytes()));
  forget();
  ch.send(FrameType::XferDone, reply);
}

void FtsmService::end_control(Control& c) {
  for (const auto& id : c.owned) {
    auto t = find(id);
    if (!t) continue;
    // Saved before the transfer disappears from the registry.
    if (t->tracker) t->tracker->close();
    std::lock_guard lk(mu_);
    transfers_.erase(id);
  }
  c.owned.clear();
}

void FtsmService::persist_all() {
  std::vector<std::shared_ptr<Active>> all;
  {
    std::lock_guard lk(mu_);
    for (auto& [id, t] : transfers_) all.push_back(t);
  }
  for (auto& t : all) {
    if (t->tracker) t->tracker->persist(true);
  }
}

void FtsmService::serve_stream(net::Channel& ch, const FieldMap& hello,
                               const wire::Nonce& client_nonce, const wire::Nonce& server_nonce,
                               wire::SecurityMode security) {
  auto id = to_array<16>(hello.require(wire::hello_tag::kTransferId));
  auto idx = static_cast<std::uint8_t>(hello.require_u64(wire::hello_tag::kStreamIndex));
  auto t = find(id);
  // Unknown transfers get a throwaway ticket so they fail like a bad proof.
  net::Ticket ticket = t ? t->ticket : crypto::random_array<32>();
  ch.enable_security(security, secchan::derive_keys(ticket, client_nonce, server_nonce,
                                                    secchan::Role::Server));
  FieldMap attach;
  try {
    attach = ch.recv_fields(FrameType::XferAccept);
  } catch (const Error& e) {
    spdlog::debug("ftsm: stream attach rejected: {}", e.what());
    return;
  }
  auto expected = secchan::compute_proof(ticket, client_nonce, server_nonce,
                                         net::stream_proof_label(idx));
  const auto* proof = attach.find(xt::kProof);
  if (!t || !proof || !crypto::equal_ct(*proof, expected) || idx >= t->stream_count) {
    ch.send_error(Errc::AuthFailed, "stream attach refused");
    return;
  }
  FieldMap ok;
  ok.set(xt::kTransferId, ByteView(id)).set_u64(xt::kStreamIndex, idx);
  ch.send(FrameType::XferAccept, ok);
  if (t->direction == Direction::Push) {
    receive_stream(ch, *t, idx);
  } else {
    send_stream(ch, *t, idx);
  }
}

void FtsmService::receive_stream(net::Channel& ch, Active& t, std::uint8_t index) {
  auto& tr = *t.tracker;
  try {
    for (;;) {
      wire::Frame f = ch.recv();
      if (f.type == FrameType::Chunk) {
        ChunkView cv = decode_chunk(f.payload);
        if (cv.transfer_id != t.id || cv.stream_index != index) {
          throw Error(Errc::ProtocolError, "chunk for another stream");
        }
        tr.validate(cv.offset, cv.data.size());
        if (!t.mem_sink()) pwrite_all(t.fd.get(), cv.data, cv.offset);
        tr.add(index, cv.offset, cv.data.size());
      } else if (f.type == FrameType::XferDone) {
        auto counts = tr.stream_bytes();
        FieldMap reply;
        reply.set(xt::kTransferId, ByteView(t.id))
            .set_u64(xt::kStreamIndex, index)
            .set_u64(xt::kBytes, index < counts.size() ? counts[index] : 0);
        tr.persist(false);
        ch.send(FrameType::XferDone, reply);
        return;
      } else {
        throw Error(Errc::ProtocolError, "unexpected frame on data stream");
      }
    }
  } catch (const Error& e) {
    tr.persist(true);
    if (e.code() == Errc::ConnectionLost) {
      spdlog::debug("ftsm: stream {} lost", index);
      return;
    }
    try {
      ch.send_error(e.code(), e.detail());
    } catch (const Error&) {
    }
  }
}

void FtsmService::send_stream(net::Channel& ch, Active& t, std::uint8_t index) {
  try {
    FieldMap req = ch.recv_fields(FrameType::XferOffer);
    auto spans = decode_spans(req.require(xt::kSpans));
    std::uint64_t region_end = t.region_offset + t.region_length;
    std::uint64_t sent = 0;
    Bytes buf(kChunkHeaderSize + t.chunk_size);
    for (const auto& span : spans) {
      if (span.stream_index != index || span.offset < t.region_offset ||
          span.offset + span.length > region_end || span.offset + span.length < span.offset) {
        throw Error(Errc::ProtocolError, "span outside the region");
      }
      for (const auto& ext : chunk_span(span, t.region_offset, t.chunk_size)) {
        Bytes h = encode_chunk_header(t.id, index, ext.offset, ext.length);
        std::copy(h.begin(), h.end(), buf.begin());
        pread_all(t.fd.get(), buf.data() + kChunkHeaderSize, ext.length, ext.offset);
        ch.send_payload(FrameType::Chunk, ByteView(buf.data(), kChunkHeaderSize + ext.length));
        sent += ext.length;
      }
    }
    FieldMap done;
    done.set(xt::kTransferId, ByteView(t.id)).set_u64(xt::kStreamIndex, index).set_u64(xt::kBytes,
                                                                                      sent);
    ch.send(FrameType::XferDone, done);
  } catch (const Error& e) {
    if (e.code() == Errc::ConnectionLost) return;
    try {
      ch.send_error(e.code(), e.detail());
    } catch (const Error&) {
    }
  }
}

}  // namespace gridfs::ftsm

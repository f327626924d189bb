#include "gridfs/dfsm/client.hpp"

#include <algorithm>
#include <thread>

#include "gridfs/wire/session.hpp"

namespace gridfs::dfsm {

using wire::FrameType;

namespace {
// Leaves room for the request/response FieldMap envelope inside one frame.
constexpr std::uint64_t kEnvelope = 256;
}  // namespace

DfsClient::DfsClient(net::Endpoint ep, net::Credentials creds, net::ClientOptions opts,
                     RetryPolicy retry)
    : ep_(std::move(ep)), creds_(std::move(creds)), opts_(std::move(opts)), retry_(retry) {}

DfsClient DfsClient::connect(const net::Endpoint& ep, const net::Credentials& creds,
                             const net::ClientOptions& opts, RetryPolicy retry) {
  DfsClient c(ep, creds, opts, retry);
  c.session_.emplace(net::open_session(ep, wire::Mode::Dfsm, creds, opts));
  return c;
}

std::uint64_t DfsClient::io_limit() const {
  return std::max<std::uint64_t>(1, session_->params.buffer_size - kEnvelope);
}

DfsResponse DfsClient::call(DfsRequest req) {
  auto delay = retry_.initial_delay;
  for (int attempt = 0;; ++attempt) {
    try {
      if (!session_) {
        session_.emplace(net::open_session(ep_, wire::Mode::Dfsm, creds_, opts_));
        ++reconnects_;
      }
      req.request_id = next_request_id_++;
      session_->channel.send(FrameType::DfsReq, req.to_fields());
      auto resp = DfsResponse::from_fields(session_->channel.recv_fields(FrameType::DfsResp));
      if (resp.status != Errc::Ok) throw Error(resp.status, resp.message);
      return resp;
    } catch (const Error& e) {
      if (e.code() != Errc::ConnectionLost || attempt >= retry_.retries) throw;
      session_.reset();
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

Bytes DfsClient::read(const std::string& path, std::uint64_t offset, std::uint64_t length) {
  Bytes out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(length, 64u << 20)));
  while (out.size() < length) {
    DfsRequest req;
    req.op = Op::Read;
    req.path = path;
    req.offset = offset + out.size();
    req.length = std::min(length - out.size(), io_limit());
    auto resp = call(std::move(req));
    if (resp.data.empty()) break;
    append(out, resp.data);
  }
  positions_[path] = offset + out.size();
  return out;
}

std::uint64_t DfsClient::write(const std::string& path, std::uint64_t offset, ByteView data) {
  std::uint64_t done = 0;
  do {
    auto n = std::min<std::uint64_t>(data.size() - done, io_limit());
    DfsRequest req;
    req.op = Op::Write;
    req.path = path;
    req.offset = offset + done;
    req.data.assign(data.begin() + static_cast<std::ptrdiff_t>(done),
                    data.begin() + static_cast<std::ptrdiff_t>(done + n));
    done += call(std::move(req)).length;
  } while (done < data.size());
  positions_[path] = offset + done;
  return done;
}

void DfsClient::flush(const std::string& path) {
  DfsRequest req;
  req.op = Op::Flush;
  req.path = path;
  call(std::move(req));
}

std::uint64_t DfsClient::lock(const std::string& path, std::uint64_t offset, std::uint64_t length) {
  DfsRequest req;
  req.op = Op::Lock;
  req.path = path;
  req.offset = offset;
  req.length = length;
  return call(std::move(req)).lock_id;
}

void DfsClient::unlock(std::uint64_t lock_id) {
  DfsRequest req;
  req.op = Op::Unlock;
  req.lock_id = lock_id;
  call(std::move(req));
}

void DfsClient::set_length(const std::string& path, std::uint64_t length) {
  DfsRequest req;
  req.op = Op::SetLength;
  req.path = path;
  req.length = length;
  call(std::move(req));
}

FileStat DfsClient::stat(const std::string& path) {
  DfsRequest req;
  req.op = Op::Stat;
  req.path = path;
  return call(std::move(req)).stat;
}

void DfsClient::close() {
  DfsRequest req;
  req.op = Op::Close;
  call(std::move(req));
}

std::uint64_t DfsClient::seek(const std::string& path, SeekOrigin origin, std::int64_t delta) {
  FileStat st;
  if (origin == SeekOrigin::End) {
    DfsRequest req;
    req.op = Op::Seek;
    req.path = path;
    req.seek_origin = origin;
    st = call(std::move(req)).stat;
  }
  auto pos = resolve_seek(origin, delta, st, position(path));
  positions_[path] = pos;
  return pos;
}

std::uint64_t DfsClient::position(const std::string& path) const {
  auto it = positions_.find(path);
  return it == positions_.end() ? 0 : it->second;
}

Bytes RemoteFile::read(std::uint64_t length) {
  Bytes b = client_.read(path_, pos_, length);
  pos_ += b.size();
  return b;
}

void RemoteFile::write(ByteView data) { pos_ += client_.write(path_, pos_, data); }

std::uint64_t RemoteFile::seek(SeekOrigin origin, std::int64_t delta) {
  FileStat st;
  if (origin == SeekOrigin::End) st = client_.stat(path_);
  pos_ = resolve_seek(origin, delta, st, pos_);
  return pos_;
}

}  // namespace gridfs::dfsm

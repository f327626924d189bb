#include "gridfs/dfsm/service.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

#include "gridfs/dfsm/paths.hpp"
#include "gridfs/perms/guard.hpp"

namespace gridfs::dfsm {

namespace fs = std::filesystem;

namespace {

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

[[noreturn]] void throw_io(const char* what) {
  int err = errno;
  if (err == ENOSPC || err == EDQUOT) throw Error(Errc::StorageFull, what);
  if (err == ENOENT) throw Error(Errc::NoSuchFile, what);
  if (err == EACCES || err == EPERM || err == EISDIR) throw Error(Errc::PermissionDenied, what);
  throw Error(Errc::Internal, std::string(what) + ": " + std::strerror(err));
}

FileStat stat_path(const fs::path& p) {
  struct stat st {};
  if (::stat(p.c_str(), &st) != 0) {
    if (errno == ENOENT || errno == ENOTDIR) return FileStat{0, false};
    throw_io("stat");
  }
  if (!S_ISREG(st.st_mode)) throw Error(Errc::PermissionDenied, "not a regular file");
  return FileStat{static_cast<std::uint64_t>(st.st_size), true};
}

int open_existing(const fs::path& p, int flags) {
  int fd = ::open(p.c_str(), flags | O_CLOEXEC);
  if (fd < 0) throw_io("open");
  return fd;
}

int open_create(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  int fd = ::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw_io("open");
  return fd;
}

}  // namespace

DfsResponse DfsService::handle(const perms::Account& account, const wire::SessionId& session,
                               const DfsRequest& request, std::uint64_t max_read) const {
  try {
    return dispatch(account, session, request, max_read);
  } catch (const Error& e) {
    DfsResponse r;
    r.request_id = request.request_id;
    r.status = e.code();
    r.message = e.detail();
    return r;
  } catch (const std::exception& e) {
    DfsResponse r;
    r.request_id = request.request_id;
    r.status = Errc::Internal;
    r.message = e.what();
    return r;
  }
}

DfsResponse DfsService::dispatch(const perms::Account& account, const wire::SessionId& session,
                                 const DfsRequest& req, std::uint64_t max_read) const {
  DfsResponse resp;
  resp.request_id = req.request_id;

  if (req.op == Op::Close) {
    audit(audit_, "effect:dfs:close");
    locks_.release_session(session);
    return resp;
  }
  if (req.op == Op::Unlock) {
    // Touches only the caller's own lock entries, never file contents.
    audit(audit_, "effect:dfs:unlock");
    locks_.unlock(req.lock_id, session);
    return resp;
  }

  const fs::path path = resolve_sandbox_path(account.sandbox_root, req.path);
  audit(audit_, "check:FILE_IO");
  if (auto d = perms::check(account, {perms::ActionKind::FileIo, path}); !d) {
    throw Error(Errc::PermissionDenied, d.reason);
  }
  const std::string key = path.string();
  audit(audit_, std::string("effect:dfs:") + op_name(req.op));

  switch (req.op) {
    case Op::Stat:
    case Op::Seek:
      resp.stat = stat_path(path);
      return resp;

    case Op::Read: {
      std::uint64_t want = std::min(req.length, max_read);
      locks_.check_access(key, req.offset, want, session);
      Fd fd(open_existing(path, O_RDONLY));
      resp.data.resize(static_cast<std::size_t>(want));
      std::size_t got = 0;
      while (got < want) {
        ssize_t n = ::pread(fd.get(), resp.data.data() + got, want - got,
                            static_cast<off_t>(req.offset + got));
        if (n < 0) {
          if (errno == EINTR) continue;
          throw_io("read");
        }
        if (n == 0) break;
        got += static_cast<std::size_t>(n);
      }
      resp.data.resize(got);
      resp.length = got;
      return resp;
    }

    case Op::Write: {
      locks_.check_access(key, req.offset, req.data.size(), session);
      Fd fd(open_create(path));
      std::size_t put = 0;
      while (put < req.data.size()) {
        ssize_t n = ::pwrite(fd.get(), req.data.data() + put, req.data.size() - put,
                             static_cast<off_t>(req.offset + put));
        if (n < 0) {
          if (errno == EINTR) continue;
          throw_io("write");
        }
        put += static_cast<std::size_t>(n);
      }
      // A zero-length write still creates the file.
      resp.length = put;
      return resp;
    }

    case Op::Flush: {
      Fd fd(open_existing(path, O_RDONLY));
      if (::fsync(fd.get()) != 0) throw_io("fsync");
      return resp;
    }

    case Op::SetLength: {
      FileStat st = stat_path(path);
      std::uint64_t lo = std::min(st.size, req.length);
      std::uint64_t hi = std::max(st.size, req.length);
      locks_.check_access(key, lo, hi - lo, session);
      Fd fd(open_create(path));
      if (::ftruncate(fd.get(), static_cast<off_t>(req.length)) != 0) throw_io("ftruncate");
      resp.stat = FileStat{req.length, true};
      return resp;
    }

    case Op::Lock:
      resp.lock_id = locks_.lock(key, req.offset, req.length, session);
      return resp;

    case Op::Unlock:
    case Op::Close:
      break;
  }
  throw Error(Errc::ProtocolError, "unhandled op");
}

}  // namespace gridfs::dfsm

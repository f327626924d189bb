#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "gridfs/wire/session.hpp"

namespace gridfs::dfsm {

inline constexpr std::uint64_t kWholeFile = std::numeric_limits<std::uint64_t>::max();

struct RangeLock {
  std::string path;
  std::uint64_t offset{0};
  std::uint64_t length{0};  // kWholeFile = to infinity
  wire::SessionId owner{};
  std::uint64_t lock_id{0};

  std::uint64_t end() const;  // saturating
  bool overlaps(std::uint64_t off, std::uint64_t len) const;
};

// Advisory, exclusive, non-blocking byte-range locks. The only server-side
// session state in DFSM; all of a session's locks go when it ends.
class LockTable {
 public:
  // Throws LockConflict if any live lock on `path` overlaps, including locks
  // held by the same session. length must be > 0.
  std::uint64_t lock(const std::string& path, std::uint64_t offset, std::uint64_t length,
                     const wire::SessionId& owner);
  // Idempotent for the owner (unknown ids succeed). Throws NotOwner when the
  // lock is held by another session.
  void unlock(std::uint64_t lock_id, const wire::SessionId& owner);
  // Throws LockConflict if [offset, offset+length) overlaps a lock owned by a
  // different session.
  void check_access(const std::string& path, std::uint64_t offset, std::uint64_t length,
                    const wire::SessionId& session) const;
  std::size_t release_session(const wire::SessionId& owner);

  // No two live locks on one path overlap.
  bool audit() const;
  std::vector<RangeLock> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<RangeLock>> by_path_;
  std::uint64_t next_id_{1};
};

}  // namespace gridfs::dfsm

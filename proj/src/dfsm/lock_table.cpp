#include "gridfs/dfsm/lock_table.hpp"

#include <algorithm>

#include "gridfs/error.hpp"

namespace gridfs::dfsm {

namespace {
std::uint64_t sat_end(std::uint64_t off, std::uint64_t len) {
  return len > kWholeFile - off ? kWholeFile : off + len;
}
}  // namespace

std::uint64_t RangeLock::end() const { return sat_end(offset, length); }

bool RangeLock::overlaps(std::uint64_t off, std::uint64_t len) const {
  if (len == 0 || length == 0) return false;
  return off < end() && offset < sat_end(off, len);
}

std::uint64_t LockTable::lock(const std::string& path, std::uint64_t offset, std::uint64_t length,
                              const wire::SessionId& owner) {
  if (length == 0) throw Error(Errc::InvalidArgument, "lock length must be positive");
  std::lock_guard guard(mu_);
  auto& locks = by_path_[path];
  for (const auto& l : locks) {
    if (l.overlaps(offset, length)) {
      throw Error(Errc::LockConflict, "range overlaps lock " + std::to_string(l.lock_id));
    }
  }
  RangeLock l{path, offset, length, owner, next_id_++};
  locks.push_back(l);
  return l.lock_id;
}

void LockTable::unlock(std::uint64_t lock_id, const wire::SessionId& owner) {
  std::lock_guard guard(mu_);
  for (auto it = by_path_.begin(); it != by_path_.end(); ++it) {
    auto& locks = it->second;
    auto found = std::find_if(locks.begin(), locks.end(),
                              [&](const RangeLock& l) { return l.lock_id == lock_id; });
    if (found == locks.end()) continue;
    if (found->owner != owner) throw Error(Errc::NotOwner, "lock held by another session");
    locks.erase(found);
    if (locks.empty()) by_path_.erase(it);
    return;
  }
}

void LockTable::check_access(const std::string& path, std::uint64_t offset, std::uint64_t length,
                             const wire::SessionId& session) const {
  std::lock_guard guard(mu_);
  auto it = by_path_.find(path);
  if (it == by_path_.end()) return;
  for (const auto& l : it->second) {
    if (l.owner != session && l.overlaps(offset, length)) {
      throw Error(Errc::LockConflict, "range locked by another session");
    }
  }
}

std::size_t LockTable::release_session(const wire::SessionId& owner) {
  std::lock_guard guard(mu_);
  std::size_t released = 0;
  for (auto it = by_path_.begin(); it != by_path_.end();) {
    released += std::erase_if(it->second, [&](const RangeLock& l) { return l.owner == owner; });
    it = it->second.empty() ? by_path_.erase(it) : std::next(it);
  }
  return released;
}

bool LockTable::audit() const {
  std::lock_guard guard(mu_);
  for (const auto& [path, locks] : by_path_) {
    for (std::size_t i = 0; i < locks.size(); ++i) {
      for (std::size_t j = i + 1; j < locks.size(); ++j) {
        if (locks[i].overlaps(locks[j].offset, locks[j].length)) return false;
      }
    }
  }
  return true;
}

std::vector<RangeLock> LockTable::snapshot() const {
  std::lock_guard guard(mu_);
  std::vector<RangeLock> out;
  for (const auto& [path, locks] : by_path_) out.insert(out.end(), locks.begin(), locks.end());
  return out;
}

std::size_t LockTable::size() const {
  std::lock_guard guard(mu_);
  std::size_t n = 0;
  for (const auto& [path, locks] : by_path_) n += locks.size();
  return n;
}

}  // namespace gridfs::dfsm

#pragma once

#include <cstdint>

#include "gridfs/audit.hpp"
#include "gridfs/dfsm/lock_table.hpp"
#include "gridfs/dfsm/protocol.hpp"
#include "gridfs/perms/accounts.hpp"

namespace gridfs::dfsm {

// Stateless file-operation server. Every request names its file; nothing but
// the lock table survives between requests.
class DfsService {
 public:
  DfsService(LockTable& locks, AuditSink* audit = nullptr) : locks_(locks), audit_(audit) {}

  // Never throws for request-level failures; they come back as status codes.
  // `max_read` caps the bytes returned by one READ.
  DfsResponse handle(const perms::Account& account, const wire::SessionId& session,
                     const DfsRequest& request, std::uint64_t max_read) const;

  // Releases the session's locks (CLOSE, disconnect, shutdown).
  std::size_t end_session(const wire::SessionId& session) const {
    return locks_.release_session(session);
  }

  LockTable& locks() const { return locks_; }

 private:
  DfsResponse dispatch(const perms::Account& account, const wire::SessionId& session,
                       const DfsRequest& request, std::uint64_t max_read) const;

  LockTable& locks_;
  AuditSink* audit_;
};

}  // namespace gridfs::dfsm

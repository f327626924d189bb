#pragma once

#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace gridfs {

// Optional observer that services report permission checks and side effects
// to. Tests install a RecordingAudit to assert check-before-effect ordering.
class AuditSink {
 public:
  virtual ~AuditSink() = default;
  virtual void record(std::string_view event) = 0;
};

class RecordingAudit final : public AuditSink {
 public:
  void record(std::string_view event) override {
    std::lock_guard lock(mu_);
    events_.emplace_back(event);
  }
  std::vector<std::string> events() const {
    std::lock_guard lock(mu_);
    return events_;
  }
  void clear() {
    std::lock_guard lock(mu_);
    events_.clear();
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> events_;
};

inline void audit(AuditSink* sink, std::string_view event) {
  if (sink) sink->record(event);
}

}  // namespace gridfs

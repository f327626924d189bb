#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridfs {

// Error codes are stable: they travel on the wire inside ERROR frames and
// DFS_RESP status fields.
enum class Errc : std::uint16_t {
  Ok = 0,
  BadMagic = 1,
  TruncatedFrame = 2,
  OversizedPayload = 3,
  VersionMismatch = 4,
  ModeRejected = 5,
  ProtocolError = 6,
  AuthFailed = 10,
  IntegrityFailure = 11,
  CounterExhausted = 12,
  NoSuchFile = 20,
  PermissionDenied = 21,
  LockConflict = 22,
  NotOwner = 23,
  StorageFull = 24,
  NegativeOffset = 25,
  EmptyRegion = 30,
  IntegrityMismatch = 31,
  StreamLost = 32,
  StateCorrupt = 33,
  MalformedDocument = 40,
  UnknownAccountType = 41,
  StagingFailed = 50,
  LaunchFailed = 51,
  ConnectionLost = 52,
  SetExpired = 53,
  TruncatedHeader = 60,
  BadPadding = 61,
  WorkerFailed = 62,
  NoWorkers = 63,
  MissingBlock = 64,
  MalformedConfig = 70,
  BindFailed = 71,
  SpawnFailed = 72,
  ScenarioFailed = 73,
  InvalidArgument = 80,
  Busy = 81,
  Internal = 99,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}
  explicit Error(Errc code) : std::runtime_error(std::string(errc_name(code))), code_(code) {}

  Errc code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace gridfs

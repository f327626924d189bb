#include "gridfs/error.hpp"

namespace gridfs {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::Ok: return "Ok";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFrame: return "TruncatedFrame";
    case Errc::OversizedPayload: return "OversizedPayload";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::ModeRejected: return "ModeRejected";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::AuthFailed: return "AuthFailed";
    case Errc::IntegrityFailure: return "IntegrityFailure";
    case Errc::CounterExhausted: return "CounterExhausted";
    case Errc::NoSuchFile: return "NoSuchFile";
    case Errc::PermissionDenied: return "PermissionDenied";
    case Errc::LockConflict: return "LockConflict";
    case Errc::NotOwner: return "NotOwner";
    case Errc::StorageFull: return "StorageFull";
    case Errc::NegativeOffset: return "NegativeOffset";
    case Errc::EmptyRegion: return "EmptyRegion";
    case Errc::IntegrityMismatch: return "IntegrityMismatch";
    case Errc::StreamLost: return "StreamLost";
    case Errc::StateCorrupt: return "StateCorrupt";
    case Errc::MalformedDocument: return "MalformedDocument";
    case Errc::UnknownAccountType: return "UnknownAccountType";
    case Errc::StagingFailed: return "StagingFailed";
    case Errc::LaunchFailed: return "LaunchFailed";
    case Errc::ConnectionLost: return "ConnectionLost";
    case Errc::SetExpired: return "SetExpired";
    case Errc::TruncatedHeader: return "TruncatedHeader";
    case Errc::BadPadding: return "BadPadding";
    case Errc::WorkerFailed: return "WorkerFailed";
    case Errc::NoWorkers: return "NoWorkers";
    case Errc::MissingBlock: return "MissingBlock";
    case Errc::MalformedConfig: return "MalformedConfig";
    case Errc::BindFailed: return "BindFailed";
    case Errc::SpawnFailed: return "SpawnFailed";
    case Errc::ScenarioFailed: return "ScenarioFailed";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Busy: return "Busy";
    case Errc::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace gridfs

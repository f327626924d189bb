#pragma once

#include <span>

#include "gridfs/wire/fieldmap.hpp"
#include "gridfs/wire/frame.hpp"
#include "gridfs/wire/session.hpp"

namespace gridfs::secchan {

enum class Sealing {
  Clear,
  Sealed,        // whole payload sealed
  FieldsSealed,  // credential / path fields sealed, remainder clear
};

// The security-mode table:
//   SECURE      every frame after the handshake is sealed.
//   SEMISECURE  everything sealed except CHUNK payloads.
//   NONSECURE   AUTH sealed; path / credential fields sealed; rest clear.
// HELLO and WELCOME precede key agreement and are always clear.
Sealing classify_frame(wire::FrameType type, wire::SecurityMode mode) noexcept;

// Tags that carry paths, credentials, proofs or tickets for a frame type.
std::span<const wire::FieldMap::Tag> sensitive_tags(wire::FrameType type) noexcept;

}  // namespace gridfs::secchan

#include "gridfs/secchan/policy.hpp"

#include <array>

#include "gridfs/wire/tags.hpp"

namespace gridfs::secchan {

using wire::FrameType;
using wire::SecurityMode;

Sealing classify_frame(FrameType type, SecurityMode mode) noexcept {
  if (type == FrameType::Hello || type == FrameType::Welcome) return Sealing::Clear;
  if (type == FrameType::Auth) return Sealing::Sealed;
  switch (mode) {
    case SecurityMode::Secure:
      return Sealing::Sealed;
    case SecurityMode::SemiSecure:
      return type == FrameType::Chunk ? Sealing::Clear : Sealing::Sealed;
    case SecurityMode::NonSecure:
      return sensitive_tags(type).empty() ? Sealing::Clear : Sealing::FieldsSealed;
  }
  return Sealing::Sealed;
}

std::span<const wire::FieldMap::Tag> sensitive_tags(FrameType type) noexcept {
  static constexpr std::array<wire::FieldMap::Tag, 2> kDfs{wire::dfs_tag::kPath,
                                                           wire::dfs_tag::kMessage};
  static constexpr std::array<wire::FieldMap::Tag, 4> kXfer{
      wire::xfer_tag::kPath, wire::xfer_tag::kTicket, wire::xfer_tag::kProof,
      wire::xfer_tag::kName};
  static constexpr std::array<wire::FieldMap::Tag, 4> kTask{
      wire::task_tag::kTasks, wire::task_tag::kResults, wire::task_tag::kDependencies,
      wire::task_tag::kMessage};
  static constexpr std::array<wire::FieldMap::Tag, 2> kCrypt{wire::crypt_frame_tag::kTask,
                                                             wire::crypt_frame_tag::kResult};
  static constexpr std::array<wire::FieldMap::Tag, 1> kError{wire::error_tag::kMessage};
  switch (type) {
    case FrameType::DfsReq:
    case FrameType::DfsResp:
      return kDfs;
    case FrameType::XferOffer:
    case FrameType::XferAccept:
    case FrameType::XferResume:
    case FrameType::XferDone:
      return kXfer;
    case FrameType::TaskSubmit:
    case FrameType::TaskStatus:
    case FrameType::TaskResult:
      return kTask;
    case FrameType::CryptTask:
      return kCrypt;
    case FrameType::Error:
      return kError;
    default:
      return {};
  }
}

}  // namespace gridfs::secchan

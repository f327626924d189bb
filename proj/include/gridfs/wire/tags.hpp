#pragma once

#include "gridfs/wire/fieldmap.hpp"

// FieldMap tag registries per frame family.
namespace gridfs::wire {

namespace auth_tag {
inline constexpr FieldMap::Tag kUsername = 1;
inline constexpr FieldMap::Tag kProof = 2;
inline constexpr FieldMap::Tag kAccountType = 3;
}  // namespace auth_tag

namespace error_tag {
inline constexpr FieldMap::Tag kCode = 1;
inline constexpr FieldMap::Tag kMessage = 2;
}  // namespace error_tag

// DFS_REQ / DFS_RESP.
namespace dfs_tag {
inline constexpr FieldMap::Tag kOp = 1;
inline constexpr FieldMap::Tag kRequestId = 2;
inline constexpr FieldMap::Tag kPath = 3;
inline constexpr FieldMap::Tag kOffset = 4;
inline constexpr FieldMap::Tag kLength = 5;
inline constexpr FieldMap::Tag kData = 6;
inline constexpr FieldMap::Tag kSeekOrigin = 7;
inline constexpr FieldMap::Tag kStatus = 8;
inline constexpr FieldMap::Tag kLockId = 9;
inline constexpr FieldMap::Tag kSize = 10;
inline constexpr FieldMap::Tag kExists = 11;
inline constexpr FieldMap::Tag kMessage = 12;
}  // namespace dfs_tag

// XFER_OFFER / XFER_ACCEPT / XFER_RESUME / XFER_DONE.
namespace xfer_tag {
inline constexpr FieldMap::Tag kTransferId = 1;
inline constexpr FieldMap::Tag kPath = 2;
inline constexpr FieldMap::Tag kRegionOffset = 3;
inline constexpr FieldMap::Tag kRegionLength = 4;
inline constexpr FieldMap::Tag kChunkSize = 5;
inline constexpr FieldMap::Tag kStreamCount = 6;
inline constexpr FieldMap::Tag kDirection = 7;
inline constexpr FieldMap::Tag kFlags = 8;
inline constexpr FieldMap::Tag kSetId = 9;
inline constexpr FieldMap::Tag kFileSize = 10;
inline constexpr FieldMap::Tag kTicket = 11;
inline constexpr FieldMap::Tag kBitmap = 12;
inline constexpr FieldMap::Tag kStreamIndex = 13;
inline constexpr FieldMap::Tag kProof = 14;
inline constexpr FieldMap::Tag kMd5 = 15;
inline constexpr FieldMap::Tag kBytes = 16;
inline constexpr FieldMap::Tag kStreamBytes = 17;
inline constexpr FieldMap::Tag kSpans = 18;
inline constexpr FieldMap::Tag kStatus = 19;
inline constexpr FieldMap::Tag kName = 20;
}  // namespace xfer_tag

// TASK_SUBMIT / TASK_STATUS / TASK_RESULT.
namespace task_tag {
inline constexpr FieldMap::Tag kSetId = 1;
inline constexpr FieldMap::Tag kTasks = 2;
inline constexpr FieldMap::Tag kAction = 3;
inline constexpr FieldMap::Tag kState = 4;
inline constexpr FieldMap::Tag kResults = 5;
inline constexpr FieldMap::Tag kDependencies = 6;
inline constexpr FieldMap::Tag kMessage = 7;
inline constexpr FieldMap::Tag kStatuses = 8;
}  // namespace task_tag

// CRYPT_TASK.
namespace crypt_frame_tag {
inline constexpr FieldMap::Tag kTask = 1;
inline constexpr FieldMap::Tag kResult = 2;
}  // namespace crypt_frame_tag

// Reserved in every FieldMap: sealed sub-map of sensitive fields.
inline constexpr FieldMap::Tag kSealedFieldsTag = 0xFF;

}  // namespace gridfs::wire

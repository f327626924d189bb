#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <vector>

#include "gridfs/ftsm/plan.hpp"
#include "gridfs/secchan/crypto.hpp"

namespace gridfs::ftsm {

using crypto::Md5Digest;

// Receiver-side progress of one transfer. The bitmap has one bit per grid
// cell of chunk_size bytes starting at region_offset (last cell shorter).
struct TransferState {
  TransferId transfer_id{};
  std::string path;
  std::uint64_t file_size{0};  // size the receiver file must have
  std::uint64_t region_offset{0};
  std::uint64_t region_length{0};
  std::uint32_t chunk_size{1};
  std::uint8_t stream_count{1};
  std::vector<std::uint64_t> stream_next;  // per-stream next unwritten offset
  std::vector<std::uint8_t> bitmap;
  std::optional<Md5Digest> md5;

  static TransferState fresh(const TransferId& id, std::string path, std::uint64_t file_size,
                             std::uint64_t region_offset, std::uint64_t region_length,
                             std::uint32_t chunk_size, std::uint8_t stream_count);

  std::size_t cell_count() const;
  std::uint64_t cell_offset(std::size_t i) const { return region_offset + i * chunk_size; }
  std::uint64_t cell_length(std::size_t i) const;
  bool cell_done(std::size_t i) const { return (bitmap[i / 8] >> (i % 8)) & 1; }
  void mark(std::size_t i) { bitmap[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8)); }
  void clear_bitmap();
  bool bitmap_full() const;
  std::uint64_t received_bytes() const;

  Bytes encode() const;
  // Throws StateCorrupt on any decoding failure.
  static TransferState decode(ByteView bytes);

  void save(const std::filesystem::path& file) const;  // atomic replace
  // nullopt when no sidecar exists; StateCorrupt when it cannot be parsed.
  static std::optional<TransferState> load(const std::filesystem::path& file);
};

std::filesystem::path sidecar_path(const std::filesystem::path& destination);

// Plan for the chunks the state still misses, spread over `streams`
// contiguous groups of cells. Complete states give an empty plan. Throws
// StateCorrupt when the state claims bytes beyond the receiver's file.
TransferPlan resume(const TransferState& state, std::uint64_t receiver_file_size,
                    std::uint8_t streams);

// Thread-safe wrapper the receiving side updates per chunk. Cells fill up
// through byte counters so spans that do not align with the grid still
// complete their cells.
class ReceiveTracker {
 public:
  static constexpr std::uint64_t kPersistEvery = 4u << 20;

  ReceiveTracker(TransferState state, std::optional<std::filesystem::path> sidecar);

  // Validates the extent against the region and records it. Throws
  // ProtocolError for extents outside the region.
  void add(std::uint8_t stream_index, std::uint64_t offset, std::uint64_t length);
  void validate(std::uint64_t offset, std::uint64_t length) const;

  bool complete() const;
  TransferState snapshot() const;
  std::vector<std::uint64_t> stream_bytes() const;
  std::uint64_t bytes() const;

  // Writes the sidecar once kPersistEvery more bytes arrived, or when forced.
  // No-op
  // once finish() or discard_progress() sealed the outcome.
  void persist(bool force);
  // Final save for an abandoned transfer; chunks that still arrive are
  // written but no longer recorded.
  void close();
  // Success: removes the sidecar and stops further persistence.
  void finish(const Md5Digest& md5);
  // Integrity failure: forget received cells so a retry resends everything.
  void discard_progress();

 private:
  void persist_locked();

  mutable std::mutex mu_;
  TransferState state_;
  std::vector<std::uint64_t> cell_bytes_;
  std::vector<std::uint64_t> stream_bytes_;
  std::uint64_t bytes_{0};
  std::optional<std::filesystem::path> sidecar_;
  std::uint64_t bytes_at_persist_{0};
  bool finished_{false};
};

// Whole-region digest read straight from a file.
Md5Digest md5_region(const std::filesystem::path& file, std::uint64_t offset,
                     std::uint64_t length);

}  // namespace gridfs::ftsm

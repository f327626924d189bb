#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridfs/cryptengine/cipher.hpp"
#include "gridfs/secchan/crypto.hpp"

namespace gridfs::cryptengine {

inline constexpr std::uint64_t kDefaultBlockSize = 20u << 20;
inline constexpr std::size_t kBlockHeaderSize = 32;

// part_num(8, BE) | length(8, BE) | md5(16). length counts ciphertext bytes;
// md5 covers the block's plaintext.
struct BlockHeader {
  std::uint64_t part_num{0};
  std::uint64_t length{0};
  crypto::Md5Digest md5{};
  bool operator==(const BlockHeader&) const = default;
};

ByteArray<kBlockHeaderSize> encode_block_header(const BlockHeader& h);
BlockHeader decode_block_header(ByteView bytes);  // TruncatedHeader below 32 bytes

struct BlockDesc {
  std::uint64_t part_num{0};
  std::uint64_t offset{0};
  std::uint64_t plain_length{0};
  bool operator==(const BlockDesc&) const = default;
};

struct BlockPlan {
  std::uint64_t file_size{0};
  std::uint64_t block_size{kDefaultBlockSize};
  std::vector<BlockDesc> blocks;
};

BlockPlan plan_blocks(std::uint64_t file_size, std::uint64_t block_size);

// header || ciphertext. Every block is CBC-encrypted under the file's key and
// IV, so equal inputs give equal blocks; blocks with equal plaintext prefixes
// are recognisable as such.
Bytes encrypt_block(ByteView plaintext, const CipherParams& params, std::uint64_t part_num);
// Checks the header, padding and plaintext MD5. Throws TruncatedHeader,
// BadPadding or IntegrityMismatch.
Bytes decrypt_block(ByteView block, const CipherParams& params);

std::string block_file_name(const std::string& basename, std::uint64_t part_num);
std::string manifest_name(const std::string& basename);

struct Placement {
  std::uint64_t part_num{0};
  std::string holder;  // host:port of the node storing the block
  std::string file;    // path of the block inside the holder's sandbox
  std::uint64_t offset{0};
  std::uint64_t plain_length{0};
  std::uint64_t cipher_length{0};
  crypto::Md5Digest md5{};
  bool operator==(const Placement&) const = default;
};

struct PlacementMap {
  std::string source;  // distributor-side path of the plaintext file
  std::string cipher;
  std::uint64_t file_size{0};
  std::uint64_t block_size{kDefaultBlockSize};
  std::vector<Placement> blocks;  // ordered by part_num

  Bytes encode() const;
  static PlacementMap decode(ByteView bytes);  // MalformedDocument on bad input
  // Every part of the plan exactly once. Throws MissingBlock(part).
  void validate() const;
  bool operator==(const PlacementMap&) const = default;
};

}  // namespace gridfs::cryptengine

#include "gridfs/cryptengine/block.hpp"

#include <algorithm>

#include "gridfs/error.hpp"
#include "gridfs/wire/fieldmap.hpp"

namespace gridfs::cryptengine {

using wire::FieldMap;

ByteArray<kBlockHeaderSize> encode_block_header(const BlockHeader& h) {
  Bytes b;
  put_u64(b, h.part_num);
  put_u64(b, h.length);
  append(b, h.md5);
  ByteArray<kBlockHeaderSize> out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

BlockHeader decode_block_header(ByteView bytes) {
  if (bytes.size() < kBlockHeaderSize) {
    throw Error(Errc::TruncatedHeader, std::to_string(bytes.size()) + " header bytes");
  }
  BlockHeader h;
  h.part_num = get_u64(bytes.data());
  h.length = get_u64(bytes.data() + 8);
  std::copy_n(bytes.begin() + 16, 16, h.md5.begin());
  return h;
}

BlockPlan plan_blocks(std::uint64_t file_size, std::uint64_t block_size) {
  if (block_size < 1) throw Error(Errc::InvalidArgument, "block_size must be >= 1");
  BlockPlan p;
  p.file_size = file_size;
  p.block_size = block_size;
  std::uint64_t part = 0;
  for (std::uint64_t off = 0; off < file_size; off += block_size, ++part) {
    p.blocks.push_back(BlockDesc{part, off, std::min(block_size, file_size - off)});
  }
  return p;
}

Bytes encrypt_block(ByteView plaintext, const CipherParams& params, std::uint64_t part_num) {
  params.validate();
  Bytes ct = encrypt_bytes(params, plaintext);
  auto header = encode_block_header(BlockHeader{part_num, ct.size(), crypto::md5(plaintext)});
  Bytes out(header.begin(), header.end());
  append(out, ct);
  return out;
}

Bytes decrypt_block(ByteView block, const CipherParams& params) {
  params.validate();
  BlockHeader h = decode_block_header(block);
  ByteView ct = block.subspan(kBlockHeaderSize);
  if (h.length != ct.size()) {
    throw Error(Errc::IntegrityMismatch, "part " + std::to_string(h.part_num) + ": length differs");
  }
  Bytes plain;
  try {
    plain = decrypt_bytes(params, ct);
  } catch (const Error& e) {
    if (e.code() == Errc::BadPadding) {
      throw Error(Errc::BadPadding, "part " + std::to_string(h.part_num));
    }
    throw;
  }
  if (crypto::md5(plain) != h.md5) {
    throw Error(Errc::IntegrityMismatch, "part " + std::to_string(h.part_num));
  }
  return plain;
}

std::string block_file_name(const std::string& basename, std::uint64_t part_num) {
  return basename + ".blk" + std::to_string(part_num);
}

std::string manifest_name(const std::string& basename) { return basename + ".manifest"; }

namespace {
namespace mt {
constexpr FieldMap::Tag kSource = 1, kCipher = 2, kFileSize = 3, kBlockSize = 4, kBlocks = 5;
}
namespace bt {
constexpr FieldMap::Tag kPart = 1, kHolder = 2, kFile = 3, kOffset = 4, kPlain = 5, kCipher = 6,
                        kMd5 = 7;
}
}  // namespace

Bytes PlacementMap::encode() const {
  std::vector<FieldMap> items;
  for (const auto& b : blocks) {
    FieldMap m;
    m.set_u64(bt::kPart, b.part_num)
        .set_str(bt::kHolder, b.holder)
        .set_str(bt::kFile, b.file)
        .set_u64(bt::kOffset, b.offset)
        .set_u64(bt::kPlain, b.plain_length)
        .set_u64(bt::kCipher, b.cipher_length)
        .set(bt::kMd5, ByteView(b.md5));
    items.push_back(std::move(m));
  }
  FieldMap m;
  m.set_str(mt::kSource, source)
      .set_str(mt::kCipher, cipher)
      .set_u64(mt::kFileSize, file_size)
      .set_u64(mt::kBlockSize, block_size)
      .set(mt::kBlocks, wire::encode_list(items));
  return m.encode();
}

PlacementMap PlacementMap::decode(ByteView bytes) {
  try {
    auto m = FieldMap::decode(bytes);
    PlacementMap p;
    p.source = m.require_str(mt::kSource);
    p.cipher = m.require_str(mt::kCipher);
    p.file_size = m.require_u64(mt::kFileSize);
    p.block_size = m.require_u64(mt::kBlockSize);
    for (const auto& b : wire::decode_list(m.require(mt::kBlocks))) {
      Placement pl;
      pl.part_num = b.require_u64(bt::kPart);
      pl.holder = b.require_str(bt::kHolder);
      pl.file = b.require_str(bt::kFile);
      pl.offset = b.require_u64(bt::kOffset);
      pl.plain_length = b.require_u64(bt::kPlain);
      pl.cipher_length = b.require_u64(bt::kCipher);
      pl.md5 = to_array<16>(b.require(bt::kMd5));
      p.blocks.push_back(std::move(pl));
    }
    return p;
  } catch (const Error& e) {
    throw Error(Errc::MalformedDocument, "manifest: " + e.detail());
  }
}

void PlacementMap::validate() const {
  if (block_size < 1) throw Error(Errc::MalformedDocument, "manifest: zero block size");
  auto plan = plan_blocks(file_size, block_size);
  std::vector<int> seen(plan.blocks.size(), 0);
  for (const auto& b : blocks) {
    if (b.part_num >= seen.size()) {
      throw Error(Errc::MalformedDocument, "manifest: part " + std::to_string(b.part_num) +
                                               " outside the plan");
    }
    const auto& d = plan.blocks[b.part_num];
    if (b.offset != d.offset || b.plain_length != d.plain_length) {
      throw Error(Errc::MalformedDocument,
                  "manifest: part " + std::to_string(b.part_num) + " has the wrong extent");
    }
    if (++seen[b.part_num] > 1) {
      throw Error(Errc::MalformedDocument,
                  "manifest: part " + std::to_string(b.part_num) + " listed twice");
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw Error(Errc::MissingBlock, "part " + std::to_string(i));
  }
}

}  // namespace gridfs::cryptengine

#pragma once

#include <cstdint>
#include <memory>

#include "gridfs/bytes.hpp"

// Thin RAII wrappers over libcrypto primitives.
namespace gridfs::crypto {

using Md5Digest = ByteArray<16>;
using Sha256Digest = ByteArray<32>;

void random_bytes(std::span<std::uint8_t> out);

template <std::size_t N>
ByteArray<N> random_array() {
  ByteArray<N> a{};
  random_bytes(a);
  return a;
}

class Md5 {
 public:
  Md5();
  ~Md5();
  Md5(Md5&&) noexcept;
  Md5& operator=(Md5&&) noexcept;
  Md5(const Md5&) = delete;
  Md5& operator=(const Md5&) = delete;

  void update(ByteView data);
  Md5Digest finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Md5Digest md5(ByteView data);

Sha256Digest hmac_sha256(ByteView key, ByteView data);

// Constant-time comparison; false on length mismatch.
bool equal_ct(ByteView a, ByteView b) noexcept;

inline constexpr std::size_t kAeadTagSize = 16;

// AES-128-GCM. Output is ciphertext || tag.
Bytes aead_seal(const ByteArray<16>& key, const ByteArray<12>& nonce, ByteView plaintext);
// Throws Error(IntegrityFailure) on tag mismatch.
Bytes aead_open(const ByteArray<16>& key, const ByteArray<12>& nonce, ByteView sealed);

}  // namespace gridfs::crypto

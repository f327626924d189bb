#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gridfs/bytes.hpp"

namespace gridfs::cryptengine {

enum class Direction { Encrypt, Decrypt };

// Incremental CBC + PKCS#7 transform. Output lags input by at most one
// cipher block.
class CipherStream {
 public:
  virtual ~CipherStream() = default;
  virtual void update(ByteView in, Bytes& out) = 0;
  // Decrypt: throws BadPadding when the final block does not unpad.
  virtual void finish(Bytes& out) = 0;
};

// Extension point for block ciphers.
class BlockCipher {
 public:
  virtual ~BlockCipher() = default;
  virtual std::string_view name() const = 0;
  virtual std::size_t key_size() const = 0;
  virtual std::size_t iv_size() const = 0;
  virtual std::size_t block_size() const = 0;
  virtual std::unique_ptr<CipherStream> stream(Direction dir, ByteView key, ByteView iv) const = 0;
};

// "aes128" (AES-128-CBC) and "tdes" (two-key triple DES, EDE-CBC, 16-byte key).
const BlockCipher& cipher_by_name(std::string_view name);  // InvalidArgument if unknown
std::vector<std::string> cipher_names();
void register_cipher(std::unique_ptr<BlockCipher> cipher);

struct CipherParams {
  std::string algorithm{"aes128"};
  Bytes key;
  Bytes iv;

  const BlockCipher& cipher() const { return cipher_by_name(algorithm); }
  // Throws InvalidArgument when key or iv sizes do not fit the cipher.
  void validate() const;
};

Bytes encrypt_bytes(const CipherParams& p, ByteView plaintext);
Bytes decrypt_bytes(const CipherParams& p, ByteView ciphertext);

}  // namespace gridfs::cryptengine

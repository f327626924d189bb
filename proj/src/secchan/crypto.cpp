#include "gridfs/secchan/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include "gridfs/error.hpp"

namespace gridfs::crypto {

namespace {
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

void check(int rc, const char* what) {
  if (rc != 1) throw Error(Errc::Internal, what);
}
}  // namespace

void random_bytes(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  check(RAND_bytes(out.data(), static_cast<int>(out.size())), "RAND_bytes");
}

struct Md5::Impl {
  EVP_MD_CTX* ctx{EVP_MD_CTX_new()};
  ~Impl() { EVP_MD_CTX_free(ctx); }
};

Md5::Md5() : impl_(std::make_unique<Impl>()) {
  check(EVP_DigestInit_ex(impl_->ctx, EVP_md5(), nullptr), "md5 init");
}
Md5::~Md5() = default;
Md5::Md5(Md5&&) noexcept = default;
Md5& Md5::operator=(Md5&&) noexcept = default;

void Md5::update(ByteView data) {
  check(EVP_DigestUpdate(impl_->ctx, data.data(), data.size()), "md5 update");
}

Md5Digest Md5::finish() {
  Md5Digest d{};
  unsigned int len = 0;
  check(EVP_DigestFinal_ex(impl_->ctx, d.data(), &len), "md5 final");
  return d;
}

Md5Digest md5(ByteView data) {
  Md5 h;
  h.update(data);
  return h.finish();
}

Sha256Digest hmac_sha256(ByteView key, ByteView data) {
  Sha256Digest out{};
  unsigned int len = 0;
  static const std::uint8_t kEmpty = 0;
  if (!HMAC(EVP_sha256(), key.empty() ? &kEmpty : key.data(), static_cast<int>(key.size()),
            data.data(), data.size(), out.data(), &len)) {
    throw Error(Errc::Internal, "HMAC");
  }
  return out;
}

bool equal_ct(ByteView a, ByteView b) noexcept {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

Bytes aead_seal(const ByteArray<16>& key, const ByteArray<12>& nonce, ByteView plaintext) {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(), nonce.data()),
        "gcm init");
  Bytes out(plaintext.size() + kAeadTagSize);
  int len = 0;
  if (!plaintext.empty()) {
    check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                            static_cast<int>(plaintext.size())),
          "gcm update");
  }
  int tail = 0;
  check(EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &tail), "gcm final");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAeadTagSize,
                            out.data() + plaintext.size()),
        "gcm tag");
  return out;
}

Bytes aead_open(const ByteArray<16>& key, const ByteArray<12>& nonce, ByteView sealed) {
  if (sealed.size() < kAeadTagSize) throw Error(Errc::IntegrityFailure, "sealed payload too short");
  std::size_t body = sealed.size() - kAeadTagSize;
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  check(EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(), nonce.data()),
        "gcm init");
  Bytes out(body);
  int len = 0;
  if (body > 0) {
    check(EVP_DecryptUpdate(ctx.get(), out.data(), &len, sealed.data(), static_cast<int>(body)),
          "gcm update");
  }
  Bytes tag(sealed.begin() + static_cast<std::ptrdiff_t>(body), sealed.end());
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAeadTagSize, tag.data()),
        "gcm set tag");
  int tail = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &tail) != 1) {
    throw Error(Errc::IntegrityFailure, "authentication tag mismatch");
  }
  return out;
}

}  // namespace gridfs::crypto

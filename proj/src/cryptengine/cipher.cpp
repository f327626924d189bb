#include "gridfs/cryptengine/cipher.hpp"

#include <openssl/evp.h>

#include <map>
#include <mutex>

#include "gridfs/error.hpp"

namespace gridfs::cryptengine {

namespace {

class EvpStream final : public CipherStream {
 public:
  EvpStream(const EVP_CIPHER* cipher, Direction dir, ByteView key, ByteView iv)
      : ctx_(EVP_CIPHER_CTX_new()), block_(static_cast<std::size_t>(EVP_CIPHER_block_size(cipher))) {
    if (!ctx_ || EVP_CipherInit_ex(ctx_, cipher, nullptr, key.data(), iv.data(),
                                   dir == Direction::Encrypt ? 1 : 0) != 1) {
      EVP_CIPHER_CTX_free(ctx_);
      throw Error(Errc::Internal, "cipher init failed");
    }
    EVP_CIPHER_CTX_set_padding(ctx_, 1);
  }
  ~EvpStream() override { EVP_CIPHER_CTX_free(ctx_); }

  void update(ByteView in, Bytes& out) override {
    std::size_t at = out.size();
    out.resize(at + in.size() + block_);
    int n = 0;
    if (EVP_CipherUpdate(ctx_, out.data() + at, &n, in.data(), static_cast<int>(in.size())) != 1) {
      throw Error(Errc::Internal, "cipher update failed");
    }
    out.resize(at + static_cast<std::size_t>(n));
  }

  void finish(Bytes& out) override {
    std::size_t at = out.size();
    out.resize(at + block_);
    int n = 0;
    if (EVP_CipherFinal_ex(ctx_, out.data() + at, &n) != 1) {
      throw Error(Errc::BadPadding, "padding check failed");
    }
    out.resize(at + static_cast<std::size_t>(n));
  }

 private:
  EVP_CIPHER_CTX* ctx_;
  std::size_t block_;
};

class EvpCipher final : public BlockCipher {
 public:
  EvpCipher(std::string name, const EVP_CIPHER* (*fn)()) : name_(std::move(name)), fn_(fn) {}
  std::string_view name() const override { return name_; }
  std::size_t key_size() const override { return static_cast<std::size_t>(EVP_CIPHER_key_length(fn_())); }
  std::size_t iv_size() const override { return static_cast<std::size_t>(EVP_CIPHER_iv_length(fn_())); }
  std::size_t block_size() const override {
    return static_cast<std::size_t>(EVP_CIPHER_block_size(fn_()));
  }
  std::unique_ptr<CipherStream> stream(Direction dir, ByteView key, ByteView iv) const override {
    if (key.size() != key_size() || iv.size() != iv_size()) {
      throw Error(Errc::InvalidArgument, "key or iv size does not fit " + name_);
    }
    return std::make_unique<EvpStream>(fn_(), dir, key, iv);
  }

 private:
  std::string name_;
  const EVP_CIPHER* (*fn_)();
};

struct Registry {
  std::mutex mu;
  std::map<std::string, std::unique_ptr<BlockCipher>, std::less<>> ciphers;
  Registry() {
    ciphers["aes128"] = std::make_unique<EvpCipher>("aes128", EVP_aes_128_cbc);
    ciphers["tdes"] = std::make_unique<EvpCipher>("tdes", EVP_des_ede_cbc);
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

const BlockCipher& cipher_by_name(std::string_view name) {
  auto& r = registry();
  std::lock_guard lk(r.mu);
  auto it = r.ciphers.find(name);
  if (it == r.ciphers.end()) throw Error(Errc::InvalidArgument, "unknown cipher " + std::string(name));
  return *it->second;
}

std::vector<std::string> cipher_names() {
  auto& r = registry();
  std::lock_guard lk(r.mu);
  std::vector<std::string> out;
  for (const auto& [n, c] : r.ciphers) out.push_back(n);
  return out;
}

void register_cipher(std::unique_ptr<BlockCipher> cipher) {
  auto& r = registry();
  std::lock_guard lk(r.mu);
  std::string name(cipher->name());
  r.ciphers[name] = std::move(cipher);
}

void CipherParams::validate() const {
  const auto& c = cipher();
  if (key.size() != c.key_size()) {
    throw Error(Errc::InvalidArgument,
                algorithm + " needs a " + std::to_string(c.key_size()) + "-byte key");
  }
  if (iv.size() != c.iv_size()) {
    throw Error(Errc::InvalidArgument,
                algorithm + " needs a " + std::to_string(c.iv_size()) + "-byte iv");
  }
}

Bytes encrypt_bytes(const CipherParams& p, ByteView plaintext) {
  auto s = p.cipher().stream(Direction::Encrypt, p.key, p.iv);
  Bytes out;
  out.reserve(plaintext.size() + p.cipher().block_size());
  s->update(plaintext, out);
  s->finish(out);
  return out;
}

Bytes decrypt_bytes(const CipherParams& p, ByteView ciphertext) {
  if (ciphertext.empty() || ciphertext.size() % p.cipher().block_size() != 0) {
    throw Error(Errc::BadPadding, "ciphertext is not a whole number of blocks");
  }
  auto s = p.cipher().stream(Direction::Decrypt, p.key, p.iv);
  Bytes out;
  out.reserve(ciphertext.size());
  s->update(ciphertext, out);
  s->finish(out);
  return out;
}

}  // namespace gridfs::cryptengine

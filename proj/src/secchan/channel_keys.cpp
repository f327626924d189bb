#include "gridfs/secchan/channel_keys.hpp"

#include <algorithm>
#include <limits>

#include "gridfs/error.hpp"
#include "gridfs/secchan/crypto.hpp"

namespace gridfs::secchan {

namespace {
constexpr std::string_view kInfo = "gridfs channel keys v1";

ByteArray<12> counter_nonce(std::uint64_t counter) {
  ByteArray<12> n{};
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
  return n;
}
}  // namespace

ChannelKeys derive_keys(ByteView psk, const wire::Nonce& client_nonce,
                        const wire::Nonce& server_nonce, Role role) {
  Bytes salt(client_nonce.begin(), client_nonce.end());
  append(salt, server_nonce);
  auto prk = crypto::hmac_sha256(salt, psk);
  Bytes info = to_bytes(kInfo);
  info.push_back(0x01);
  auto okm = crypto::hmac_sha256(prk, info);

  Key128 c2s{};
  Key128 s2c{};
  std::copy_n(okm.begin(), 16, c2s.begin());
  std::copy_n(okm.begin() + 16, 16, s2c.begin());

  ChannelKeys keys;
  keys.send_key = role == Role::Client ? c2s : s2c;
  keys.recv_key = role == Role::Client ? s2c : c2s;
  return keys;
}

Bytes seal(ByteView plaintext, ChannelKeys& keys) {
  if (keys.send_counter == std::numeric_limits<std::uint64_t>::max()) {
    throw Error(Errc::CounterExhausted, "send counter exhausted");
  }
  return crypto::aead_seal(keys.send_key, counter_nonce(keys.send_counter++), plaintext);
}

Bytes open(ByteView sealed, ChannelKeys& keys) {
  if (keys.recv_counter == std::numeric_limits<std::uint64_t>::max()) {
    throw Error(Errc::CounterExhausted, "receive counter exhausted");
  }
  return crypto::aead_open(keys.recv_key, counter_nonce(keys.recv_counter++), sealed);
}

Proof compute_proof(ByteView psk, const wire::Nonce& client_nonce,
                    const wire::Nonce& server_nonce, std::string_view username) {
  Bytes msg(client_nonce.begin(), client_nonce.end());
  append(msg, server_nonce);
  append(msg, to_bytes(username));
  return crypto::hmac_sha256(psk, msg);
}

}  // namespace gridfs::secchan

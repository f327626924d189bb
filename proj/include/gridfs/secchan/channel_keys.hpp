#pragma once

#include <cstdint>
#include <string_view>

#include "gridfs/bytes.hpp"
#include "gridfs/wire/session.hpp"

namespace gridfs::secchan {

using Key128 = ByteArray<16>;
using Proof = ByteArray<32>;

enum class Role { Client, Server };

struct ChannelKeys {
  Key128 send_key{};
  Key128 recv_key{};
  std::uint64_t send_counter{0};
  std::uint64_t recv_counter{0};
};

// HKDF-style extract-then-expand over HMAC-SHA256:
//   prk = HMAC(client_nonce || server_nonce, psk)
//   okm = HMAC(prk, "gridfs channel keys v1" || 0x01)
// okm[0:16] protects client->server traffic, okm[16:32] server->client.
ChannelKeys derive_keys(ByteView psk, const wire::Nonce& client_nonce,
                        const wire::Nonce& server_nonce, Role role);

// Authenticated encryption under the next send (seal) or receive (open)
// counter. Counters advance once per call; a failed open still consumes the
// counter because the connection is torn down anyway.
Bytes seal(ByteView plaintext, ChannelKeys& keys);
Bytes open(ByteView sealed, ChannelKeys& keys);

// proof = HMAC-SHA256(psk, client_nonce || server_nonce || username)
Proof compute_proof(ByteView psk, const wire::Nonce& client_nonce,
                    const wire::Nonce& server_nonce, std::string_view username);

}  // namespace gridfs::secchan

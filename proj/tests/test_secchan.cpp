#include <doctest.h>

#include "gridfs/dfsm/client.hpp"
#include "gridfs/error.hpp"
#include "gridfs/ftsm/engine.hpp"
#include "gridfs/net/client.hpp"
#include "gridfs/secchan/channel_keys.hpp"
#include "gridfs/secchan/crypto.hpp"
#include "gridfs/secchan/policy.hpp"
#include "gridfs/wire/tags.hpp"
#include "support.hpp"

using namespace gridfs;
using secchan::Role;
using wire::FrameType;
using wire::SecurityMode;

namespace {

wire::Nonce seq_nonce(std::uint8_t start) {
  wire::Nonce n{};
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = static_cast<std::uint8_t>(start + i);
  return n;
}

// Values produced by tests/oracles/vectors.py.
constexpr const char* kZeroC2s = "8bfc6dcea79ae75f7297e2f0d799c5ff";
constexpr const char* kZeroS2c = "12a9a7b0981b7f21ac29e3b62d22aee9";
constexpr const char* kProofAlice =
    "4143617473cff5cdf9a87442e55b2c6570aaacc8308bd266608a4c735e085d6f";
constexpr const char* kGcmHelloCtr0 = "d05be7072b55bf78cac1ed2b592a04d6fd487a1bc5";
constexpr const char* kGcmEmptyCtr1 = "8315dfd1d930b99548a5887b9fc93d71";

}  // namespace

TEST_CASE("derived keys mirror between peers") {
  Bytes psk = testing::random_bytes(32, 7);
  auto cn = seq_nonce(0), sn = seq_nonce(16);
  auto c = secchan::derive_keys(psk, cn, sn, Role::Client);
  auto s = secchan::derive_keys(psk, cn, sn, Role::Server);
  CHECK(c.send_key == s.recv_key);
  CHECK(c.recv_key == s.send_key);
  CHECK(c.send_key != c.recv_key);

  auto again = secchan::derive_keys(psk, cn, sn, Role::Client);
  CHECK(again.send_key == c.send_key);

  auto other = secchan::derive_keys(psk, cn, seq_nonce(17), Role::Client);
  CHECK(other.send_key != c.send_key);
  CHECK(other.recv_key != c.recv_key);
}

TEST_CASE("zero psk and zero nonces give the pinned keys") {
  Bytes psk(32, 0);
  wire::Nonce zero{};
  auto c = secchan::derive_keys(psk, zero, zero, Role::Client);
  CHECK(to_hex(c.send_key) == kZeroC2s);
  CHECK(to_hex(c.recv_key) == kZeroS2c);
}

TEST_CASE("proof matches the HMAC definition") {
  Bytes psk(32, 0xa5);
  auto p = secchan::compute_proof(psk, seq_nonce(0), seq_nonce(16), "alice");
  CHECK(to_hex(p) == kProofAlice);
  auto wrong = secchan::compute_proof(psk, seq_nonce(0), seq_nonce(16), "alicf");
  CHECK(wrong != p);
}

TEST_CASE("seal uses counter nonces") {
  wire::Nonce zero{};
  auto keys = secchan::derive_keys(Bytes(32, 0), zero, zero, Role::Client);
  CHECK(to_hex(secchan::seal(to_bytes("hello"), keys)) == kGcmHelloCtr0);
  auto empty = secchan::seal({}, keys);
  CHECK(empty.size() == crypto::kAeadTagSize);
  CHECK(to_hex(empty) == kGcmEmptyCtr1);
  CHECK(keys.send_counter == 2);
}

TEST_CASE("open inverts seal for sizes up to the max payload") {
  Bytes psk = testing::random_bytes(32, 11);
  auto cn = seq_nonce(3), sn = seq_nonce(40);
  auto c = secchan::derive_keys(psk, cn, sn, Role::Client);
  auto s = secchan::derive_keys(psk, cn, sn, Role::Server);
  std::vector<std::size_t> sizes{0, 1, 15, 16, 17, 255, 4096, 65535, wire::kDefaultMaxPayload - 16};
  std::uint64_t seed = 1;
  for (auto n : sizes) {
    auto p = testing::random_bytes(n, seed++);
    auto sealed = secchan::seal(p, c);
    CHECK(sealed.size() == n + 16);
    CHECK(secchan::open(sealed, s) == p);
  }
  // Server to client uses the other key.
  auto back = secchan::seal(to_bytes("pong"), s);
  CHECK(secchan::open(back, c) == to_bytes("pong"));
}

TEST_CASE("any flipped bit fails authentication") {
  Bytes psk = testing::random_bytes(32, 12);
  auto cn = seq_nonce(0), sn = seq_nonce(1);
  auto p = testing::random_bytes(100, 3);
  auto base = secchan::derive_keys(psk, cn, sn, Role::Client);
  auto sealed = secchan::seal(p, base);
  for (std::size_t i = 0; i < sealed.size(); i += 7) {
    for (int bit : {0, 5}) {
      auto s = secchan::derive_keys(psk, cn, sn, Role::Server);
      auto bad = sealed;
      bad[i] ^= static_cast<std::uint8_t>(1u << bit);
      try {
        (void)secchan::open(bad, s);
        FAIL("tampered payload accepted");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::IntegrityFailure);
      }
    }
  }
  // Replay under the next counter also fails.
  auto s = secchan::derive_keys(psk, cn, sn, Role::Server);
  CHECK(secchan::open(sealed, s) == p);
  CHECK_THROWS_AS((void)secchan::open(sealed, s), Error);
}

TEST_CASE("exhausted counters refuse to seal") {
  auto keys = secchan::derive_keys(Bytes(32, 1), seq_nonce(0), seq_nonce(1), Role::Client);
  keys.send_counter = std::numeric_limits<std::uint64_t>::max();
  keys.recv_counter = std::numeric_limits<std::uint64_t>::max();
  try {
    (void)secchan::seal(to_bytes("x"), keys);
    FAIL("sealed with an exhausted counter");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CounterExhausted);
  }
  CHECK_THROWS_AS((void)secchan::open(Bytes(16), keys), Error);
}

TEST_CASE("sealing policy table") {
  using secchan::Sealing;
  using secchan::classify_frame;
  CHECK(classify_frame(FrameType::Chunk, SecurityMode::Secure) == Sealing::Sealed);
  CHECK(classify_frame(FrameType::Chunk, SecurityMode::SemiSecure) == Sealing::Clear);
  CHECK(classify_frame(FrameType::Chunk, SecurityMode::NonSecure) == Sealing::Clear);
  for (auto m : {SecurityMode::NonSecure, SecurityMode::Secure, SecurityMode::SemiSecure}) {
    CHECK(classify_frame(FrameType::Auth, m) == Sealing::Sealed);
    CHECK(classify_frame(FrameType::Hello, m) == Sealing::Clear);
    CHECK(classify_frame(FrameType::Welcome, m) == Sealing::Clear);
  }
  CHECK(classify_frame(FrameType::DfsReq, SecurityMode::NonSecure) == Sealing::FieldsSealed);
  CHECK(classify_frame(FrameType::DfsReq, SecurityMode::SemiSecure) == Sealing::Sealed);
  CHECK(classify_frame(FrameType::XferOffer, SecurityMode::NonSecure) == Sealing::FieldsSealed);
  CHECK(classify_frame(FrameType::AuthOk, SecurityMode::NonSecure) == Sealing::Clear);
  CHECK(classify_frame(FrameType::TaskSubmit, SecurityMode::SemiSecure) == Sealing::Sealed);

  auto dfs = secchan::sensitive_tags(FrameType::DfsReq);
  CHECK(std::find(dfs.begin(), dfs.end(), wire::dfs_tag::kPath) != dfs.end());
  CHECK(std::find(dfs.begin(), dfs.end(), wire::dfs_tag::kData) == dfs.end());
  auto xfer = secchan::sensitive_tags(FrameType::XferAccept);
  CHECK(std::find(xfer.begin(), xfer.end(), wire::xfer_tag::kProof) != xfer.end());
  CHECK(std::find(xfer.begin(), xfer.end(), wire::xfer_tag::kTicket) != xfer.end());
  CHECK(secchan::sensitive_tags(FrameType::Chunk).empty());
}

TEST_CASE("authentication outcomes") {
  testing::NodeOptions o;
  o.users["alice"] = testing::doc_with({perms::Flag::FileIOPermission});
  testing::TestNode node(o);

  SUBCASE("valid proof") {
    auto s = net::open_session(node.ep(), wire::Mode::Dfsm, node.creds("alice"), {});
    CHECK(s.params.mode == wire::Mode::Dfsm);
  }
  SUBCASE("wrong psk") {
    auto c = node.creds("alice");
    c.psk[0] ^= 1;
    try {
      (void)net::open_session(node.ep(), wire::Mode::Dfsm, c, {});
      FAIL("accepted a wrong psk");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::AuthFailed);
    }
  }
  SUBCASE("unknown user") {
    net::Credentials c{"mallory", testing::random_bytes(32, 5)};
    try {
      (void)net::open_session(node.ep(), wire::Mode::Dfsm, c, {});
      FAIL("accepted an unknown user");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::AuthFailed);
    }
  }
  SUBCASE("second AUTH is a protocol error") {
    auto s = net::open_session(node.ep(), wire::Mode::Dfsm, node.creds("alice"),
                               {SecurityMode::Secure});
    wire::FieldMap again;
    again.set_str(wire::auth_tag::kUsername, "alice");
    again.set(wire::auth_tag::kProof, ByteView(s.proof));
    s.channel.send(FrameType::Auth, again);
    try {
      (void)s.channel.recv_fields(FrameType::AuthOk);
      FAIL("second AUTH accepted");
    } catch (const Error& e) {
      CHECK((e.code() == Errc::ProtocolError || e.code() == Errc::ConnectionLost));
    }
  }
}

TEST_CASE("transcripts never carry secrets in clear") {
  for (auto mode : {SecurityMode::NonSecure, SecurityMode::SemiSecure, SecurityMode::Secure}) {
    CAPTURE(wire::security_mode_name(mode));
    auto server_tap = std::make_shared<net::TranscriptTap>();
    auto client_tap = std::make_shared<net::TranscriptTap>();
    testing::NodeOptions o;
    o.tap = server_tap;
    testing::TestNode node(o);
    net::ClientOptions copts{mode};
    copts.tap = client_tap;
    copts.streams = 2;

    const std::string dfs_path = "private-area/ledger-7f3a.bin";
    const std::string xfer_path = "private-area/upload-91c2.bin";
    auto content = testing::random_bytes(300000, 77);
    auto record = testing::random_bytes(4000, 78);

    auto dfs = dfsm::DfsClient::connect(node.ep(), node.creds(), copts);
    dfs.write(dfs_path, 0, record);
    CHECK(dfs.read(dfs_path, 0, 4000) == record);
    CHECK_FALSE(dfs.stat("private-area/missing-item").exists);
    CHECK_THROWS_AS(dfs.read("private-area/missing-item", 0, 1), Error);
    auto dfs_proof = dfs.session().proof;
    dfs.close();

    testing::TempDir tmp;
    testing::write_file(tmp / "src.bin", content);
    auto control = net::open_session(node.ep(), wire::Mode::FtsmPush, node.creds(), copts);
    ftsm::FtsmClient fc(control, node.ep(), copts);
    auto r = fc.push(tmp / "src.bin", xfer_path, {});
    CHECK(r.bytes == content.size());
    CHECK(testing::read_file(node.sandbox() / xfer_path) == content);

    for (auto* tap : {server_tap.get(), client_tap.get()}) {
      CHECK_FALSE(tap->contains(to_bytes(dfs_path)));
      CHECK_FALSE(tap->contains(to_bytes(xfer_path)));
      CHECK_FALSE(tap->contains(to_bytes("private-area")));
      CHECK_FALSE(tap->contains(node.creds().psk));
      CHECK_FALSE(tap->contains(dfs_proof));
      CHECK_FALSE(tap->contains(control.proof));
      CHECK(tap->count(FrameType::Auth, tap == client_tap.get()) == 2);
    }
    // File bytes: a window from the DFS write and one from deep in the push.
    ByteView dfs_window = ByteView(record).subspan(1000, 48);
    ByteView push_window = ByteView(content).subspan(200000, 48);
    if (mode == SecurityMode::Secure) {
      CHECK_FALSE(server_tap->contains(dfs_window));
      CHECK_FALSE(server_tap->contains(push_window));
    } else if (mode == SecurityMode::NonSecure) {
      CHECK(server_tap->contains(dfs_window));
      CHECK(server_tap->contains(push_window));
    } else {
      // Semi-secure: control frames sealed, data chunks clear.
      CHECK_FALSE(server_tap->contains(dfs_window));
      CHECK(server_tap->contains(push_window));
    }
  }
}

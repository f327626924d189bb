#include "gridfs/net/client.hpp"

#include "gridfs/secchan/crypto.hpp"
#include "gridfs/wire/tags.hpp"

namespace gridfs::net {

using wire::FieldMap;
using wire::FrameType;
namespace ht = wire::hello_tag;

namespace {

Session hello(const Endpoint& ep, wire::Mode mode, const ClientOptions& opts, FieldMap extra) {
  Channel ch(Socket::connect(ep, opts.connect_timeout), opts.tap);
  wire::SessionParams req;
  req.mode = mode;
  req.security_mode = opts.security;
  req.buffer_size = opts.buffer_size;
  req.stream_count = opts.streams;
  FieldMap hello = wire::params_to_fields(req);
  auto cn = crypto::random_array<16>();
  hello.set(ht::kNonce, ByteView(cn));
  for (const auto& [tag, value] : extra.fields()) hello.set(tag, value);
  ch.send(FrameType::Hello, hello);

  FieldMap welcome = ch.recv_fields(FrameType::Welcome);
  wire::SessionParams params = wire::params_from_fields(welcome);
  auto sn = to_array<16>(welcome.require(ht::kNonce));
  ch.socket().set_buffer_sizes(params.buffer_size);
  ch.set_max_payload(params.buffer_size + wire::kFrameSlack);
  return Session{std::move(ch), params, cn, sn, {}};
}

}  // namespace

Session open_session(const Endpoint& ep, wire::Mode mode, const Credentials& creds,
                     const ClientOptions& opts) {
  FieldMap extra;
  extra.set_str(ht::kUsername, creds.username);
  Session s = hello(ep, mode, opts, std::move(extra));
  s.channel.enable_security(
      s.params.security_mode,
      secchan::derive_keys(creds.psk, s.client_nonce, s.server_nonce, secchan::Role::Client));
  s.proof = secchan::compute_proof(creds.psk, s.client_nonce, s.server_nonce, creds.username);

  FieldMap auth;
  auth.set_str(wire::auth_tag::kUsername, creds.username);
  auth.set(wire::auth_tag::kProof, ByteView(s.proof));
  s.channel.send(FrameType::Auth, auth);

  FrameType type{};
  FieldMap reply;
  try {
    reply = s.channel.recv_any(type);
  } catch (const Error& e) {
    // A wrong psk makes the server's reply unreadable.
    if (e.code() == Errc::IntegrityFailure) throw Error(Errc::AuthFailed, "authentication failed");
    throw;
  }
  if (type == FrameType::AuthFail) throw Error(Errc::AuthFailed, "authentication failed");
  if (type == FrameType::Error) throw_remote_error(reply);
  if (type != FrameType::AuthOk) throw Error(Errc::ProtocolError, "expected AUTH_OK");
  return s;
}

std::string stream_proof_label(std::uint8_t stream_index) {
  return "stream:" + std::to_string(stream_index);
}

Session open_stream(const Endpoint& ep, wire::Mode mode, const TransferId& transfer_id,
                    std::uint8_t stream_index, const Ticket& ticket, const ClientOptions& opts) {
  FieldMap extra;
  extra.set(ht::kTransferId, ByteView(transfer_id));
  extra.set_u64(ht::kStreamIndex, stream_index);
  Session s = hello(ep, mode, opts, std::move(extra));
  s.channel.enable_security(
      s.params.security_mode,
      secchan::derive_keys(ticket, s.client_nonce, s.server_nonce, secchan::Role::Client));
  s.proof = secchan::compute_proof(ticket, s.client_nonce, s.server_nonce,
                                   stream_proof_label(stream_index));
  FieldMap attach;
  attach.set(wire::xfer_tag::kTransferId, ByteView(transfer_id));
  attach.set_u64(wire::xfer_tag::kStreamIndex, stream_index);
  attach.set(wire::xfer_tag::kProof, ByteView(s.proof));
  s.channel.send(FrameType::XferAccept, attach);
  try {
    s.channel.recv_fields(FrameType::XferAccept);
  } catch (const Error& e) {
    if (e.code() == Errc::IntegrityFailure) throw Error(Errc::AuthFailed, "stream attach refused");
    throw;
  }
  return s;
}

}  // namespace gridfs::net

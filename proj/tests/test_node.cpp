#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "gridfs/dfsm/client.hpp"
#include "gridfs/error.hpp"
#include "gridfs/ftsm/engine.hpp"
#include "gridfs/node/config.hpp"
#include "gridfs/node/server.hpp"
#include "support.hpp"

using namespace gridfs;
using namespace gridfs::node;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Ok;
}

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config defaults") {
  std::vector<std::string> warnings;
  auto c = parse_config("", "/base", &warnings);
  CHECK(warnings.empty());
  CHECK(c.host == "127.0.0.1");
  CHECK(c.port == 2525);
  CHECK(c.buffer_cap == 262144);
  CHECK(c.streams_cap == 16);
  CHECK(c.max_sessions == 128);
  CHECK(c.modes.size() == 5);
  CHECK(c.retention == std::chrono::seconds(600));
  CHECK(c.data_dir == fs::path("/base/gridfs-data"));
  CHECK(c.storage_root == fs::path("/base/gridfs-data/storage"));
  CHECK(c.accounts_dir == fs::path("/base/gridfs-data/accounts"));
  CHECK(c.credentials == fs::path("/base/gridfs-data/credentials"));
  CHECK(c.work_root == fs::path("/base/gridfs-data/work"));

  testing::TempDir dir;
  auto missing = load_config(dir / "nope.conf");
  CHECK(missing.port == 2525);
  CHECK(missing.data_dir == dir / "gridfs-data");
}

TEST_CASE("config overrides and paths") {
  std::vector<std::string> warnings;
  auto c = parse_config(
      "# node a\n"
      "port = 0\n"
      "buffer_cap = 65536   # small\n"
      "modes = dfsm, task\n"
      "data_dir = var\n"
      "credentials = /etc/gridfs/creds\n"
      "colour = blue\n"
      "max_sessions=3\n",
      "/srv", &warnings);
  CHECK(c.port == 0);
  CHECK(c.buffer_cap == 65536);
  CHECK(c.modes == std::set<wire::Mode>{wire::Mode::Dfsm, wire::Mode::Task});
  CHECK(c.data_dir == fs::path("/srv/var"));
  CHECK(c.storage_root == fs::path("/srv/var/storage"));
  CHECK(c.credentials == fs::path("/etc/gridfs/creds"));
  CHECK(c.max_sessions == 3);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("line 7") != std::string::npos);
  CHECK(warnings[0].find("colour") != std::string::npos);

  CHECK(parse_config("modes = all\n", "/").modes.size() == 5);
}

TEST_CASE("config errors name the line") {
  auto bad = [](const std::string& text) {
    return code_of([&] { (void)parse_config(text, "/"); });
  };
  CHECK(bad("port = 1\n\nstreams_cap = abc\n") == Errc::MalformedConfig);
  CHECK(error_text([] { (void)parse_config("port = 1\n\nstreams_cap = abc\n", "/"); })
            .find("line 3") != std::string::npos);
  CHECK(bad("port = 70000\n") == Errc::MalformedConfig);
  CHECK(bad("buffer_cap = 10\n") == Errc::MalformedConfig);
  CHECK(bad("modes = dfsm, teleport\n") == Errc::MalformedConfig);
  CHECK(bad("log_level = loud\n") == Errc::MalformedConfig);
  CHECK(bad("just words\n") == Errc::MalformedConfig);
  CHECK(bad("max_sessions = 0\n") == Errc::MalformedConfig);
  CHECK(bad("port = -1\n") == Errc::MalformedConfig);
}

TEST_CASE("buffer cap bounds the negotiated size") {
  testing::NodeOptions o;
  o.buffer_cap = 65536;
  testing::TestNode node(o);
  for (std::uint32_t asked : {4096u, 65536u, 262144u, 1u << 20}) {
    net::ClientOptions copts;
    copts.buffer_size = asked;
    auto c = dfsm::DfsClient::connect(node.ep(), node.creds(), copts);
    CHECK(c.buffer_size() == std::min(asked, 65536u));
  }
}

TEST_CASE("smoke: connect, stat, shut down") {
  testing::TestNode node;
  testing::write_text(node.sandbox() / "hello.txt", "hello");
  {
    auto c = dfsm::DfsClient::connect(node.ep(), node.creds());
    auto st = c.stat("hello.txt");
    CHECK(st.exists);
    CHECK(st.size == 5);
  }
  node.server().stop();
  node.server().stop();
  CHECK(node.server().active_connections() == 0);
  CHECK(code_of([&] { dfsm::DfsClient::connect(node.ep(), node.creds(), {}, {0, {}}); }) ==
        Errc::ConnectionLost);
}

TEST_CASE("second daemon on the same port") {
  testing::TestNode node;
  testing::TempDir dir;
  NodeConfig c;
  c.port = node.ep().port;
  c.data_dir = dir.path();
  c.finalize();
  NodeServer other(c);
  CHECK(code_of([&] { other.start(); }) == Errc::BindFailed);
}

TEST_CASE("disabled modes are rejected") {
  testing::NodeOptions o;
  o.modes = std::set<wire::Mode>{wire::Mode::Dfsm};
  testing::TestNode node(o);
  testing::TempDir dir;
  testing::write_text(dir / "f", "x");
  CHECK(code_of([&] {
          ftsm::push_file(node.ep(), node.creds(), {}, dir / "f", "f", {});
        }) == Errc::ModeRejected);
  CHECK(dfsm::DfsClient::connect(node.ep(), node.creds()).stat("f").exists == false);
}

TEST_CASE("session cap answers Busy") {
  testing::NodeOptions o;
  o.max_sessions = 2;
  testing::TestNode node(o);
  auto a = dfsm::DfsClient::connect(node.ep(), node.creds());
  auto b = dfsm::DfsClient::connect(node.ep(), node.creds());
  CHECK(code_of([&] { dfsm::DfsClient::connect(node.ep(), node.creds(), {}, {0, {}}); }) ==
        Errc::Busy);
  a.close();
  // The slot frees once the server has torn the connection down.
  { auto gone = std::move(a); }
  Errc last = Errc::Busy;
  for (int i = 0; i < 50 && last != Errc::Ok; ++i) {
    last = code_of([&] { dfsm::DfsClient::connect(node.ep(), node.creds(), {}, {0, {}}); });
    if (last != Errc::Ok) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  CHECK(last == Errc::Ok);
  CHECK(b.stat("x").exists == false);
}

TEST_CASE("restart serves the same files and permissions") {
  testing::NodeOptions o;
  o.users["guest"] = testing::doc_with({});
  testing::TestNode node(o);
  auto data = testing::random_bytes(300000, 31);
  {
    auto c = dfsm::DfsClient::connect(node.ep(), node.creds());
    c.write("keep/a.bin", 0, data);
    c.flush("keep/a.bin");
  }
  node.restart();
  auto c = dfsm::DfsClient::connect(node.ep(), node.creds());
  CHECK(c.read("keep/a.bin", 0, data.size() + 10) == data);
  CHECK(code_of([&] {
          dfsm::DfsClient::connect(node.ep(), node.creds("guest")).stat("keep/a.bin");
        }) == Errc::PermissionDenied);
}

TEST_CASE("file requests stay responsive during a long transfer") {
  testing::TestNode node;
  testing::TempDir dir;
  testing::write_text(node.sandbox() / "small.txt", "tiny");
  std::atomic<bool> done{false};
  // Samples at least n requests, and keeps going while `until` is unset.
  auto probe = [&](std::size_t n, const std::atomic<bool>* until) {
    auto c = dfsm::DfsClient::connect(node.ep(), node.creds());
    std::vector<double> ms;
    while (ms.size() < n || (until && !*until)) {
      auto t0 = Clock::now();
      c.stat("small.txt");
      c.read("small.txt", 0, 4);
      ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    return ms[ms.size() / 2];
  };
  double idle = probe(20, nullptr);

  auto big = testing::random_bytes(48u << 20, 32);
  testing::write_file(dir / "big.bin", big);
  std::thread push([&] {
    net::ClientOptions copts;
    copts.streams = 4;
    ftsm::TransferOptions t;
    t.streams = 4;
    ftsm::push_file(node.ep(), node.creds(), copts, dir / "big.bin", "big.bin", t);
    done = true;
  });
  double busy = probe(20, &done);
  push.join();
  MESSAGE("median request latency idle " << idle << " ms, under load " << busy << " ms");
  CHECK(busy <= std::max(25 * idle, 100.0));
  CHECK(testing::md5_hex(testing::read_file(node.sandbox() / "big.bin")) == testing::md5_hex(big));
}

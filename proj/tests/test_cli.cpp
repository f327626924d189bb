#include <doctest.h>

#include <regex>

#include "proc.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using testing::run;
using testing::RunResult;

namespace {

const std::string kBin = GRIDFS_BIN;
const std::string kAdminKey(64, 'a');

// A config directory plus a running `gridfs serve`.
struct Daemon {
  testing::TempDir dir;
  fs::path conf = dir / "gridfs.conf";
  std::map<std::string, std::string> env;
  std::unique_ptr<testing::Child> child;
  std::string node;

  explicit Daemon(const std::string& extra = "") {
    testing::write_text(conf, "port = 0\ndata_dir = data\nport_file = port\nlog_level = warn\n" +
                                  extra);
    env = {{"GRIDFS_CONFIG", conf.string()}, {"GRIDFS_PSK", ""}, {"GRIDFS_USER", ""}};
    auto r = cli({"account", "add", "admin", "--admin", "--key", kAdminKey});
    REQUIRE(r.code == 0);
  }
  ~Daemon() { stop(); }

  void start() {
    fs::remove(dir / "port");
    child = std::make_unique<testing::Child>(std::vector<std::string>{kBin, "serve"},
                                             dir / "node.log", env);
    auto port = testing::wait_for_file(dir / "port");
    REQUIRE_MESSAGE(!port.empty(), "daemon did not start");
    node = "127.0.0.1:" + port;
  }
  int stop(int sig = SIGTERM) {
    if (!child) return -1;
    int rc = child->stop(sig);
    child.reset();
    return rc;
  }

  RunResult cli(std::vector<std::string> args, const std::string& input = {}) const {
    args.insert(args.begin(), kBin);
    return run(args, env, input);
  }
  fs::path sandbox(const std::string& user = "admin") const {
    return dir / "data" / "storage" / user;
  }
};

std::uint64_t field(const std::string& text, const std::string& key) {
  std::smatch m;
  std::regex re("\\b" + key + "=([0-9.]+)");
  REQUIRE(std::regex_search(text, m, re));
  return std::stoull(m[1].str());
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  Daemon d;
  CHECK(d.cli({}).code == 2);
  CHECK(d.cli({"--help"}).code == 0);
  CHECK(d.cli({"teleport"}).code == 2);
  CHECK(d.cli({"cp", "only-one"}).code == 2);
  CHECK(d.cli({"fs", "frob", "127.0.0.1:1", "x"}).code == 2);
  CHECK(d.cli({"cp", "a", "b"}).code == 2);
  CHECK(d.cli({"crypt", "encrypt", "h:1:f", "--key", "00", "--iv", "00"}).code == 2);
  CHECK(d.cli({"account", "set-perm", "admin", "Execution"}).code == 2);
  CHECK(d.cli({"--security", "paranoid", "fs", "stat", "127.0.0.1:1", "x"}).code == 2);
}

TEST_CASE("account management") {
  Daemon d;
  auto add = d.cli({"account", "add", "alice", "--key", "00ff"});
  CHECK(add.code == 0);
  CHECK(add.out == "alice:00ff\n");
  auto show = d.cli({"account", "show", "alice"});
  CHECK(show.code == 0);
  CHECK(show.out.find("account alice (Others)") != std::string::npos);
  CHECK(show.out.find("FileIOPermission = False") != std::string::npos);

  CHECK(d.cli({"account", "set-perm", "alice", "FileIOPermission", "true"}).code == 0);
  show = d.cli({"account", "show", "alice"});
  CHECK(show.out.find("FileIOPermission = True") != std::string::npos);
  CHECK(show.out.find("Execution = False") != std::string::npos);
  CHECK(d.cli({"account", "set-perm", "alice", "Teleport", "true"}).code != 0);
  CHECK(d.cli({"account", "set-perm", "alice", "Execution", "maybe"}).code == 2);
  CHECK(d.cli({"account", "show", "nobody"}).code == 1);

  // A fresh key replaces the old line.
  d.cli({"account", "add", "alice", "--key", "0102"});
  auto creds = testing::read_file(d.dir / "data" / "credentials");
  std::string text(creds.begin(), creds.end());
  CHECK(text.find("alice:0102") != std::string::npos);
  CHECK(text.find("alice:00ff") == std::string::npos);
}

TEST_CASE("serve lifecycle") {
  Daemon d;
  d.start();
  auto st = d.cli({"fs", "stat", d.node, "nothing"});
  CHECK(st.code == 0);
  CHECK(st.out == "nothing: missing, 0 bytes\n");

  SUBCASE("second daemon on the same port fails") {
    auto port = d.node.substr(d.node.rfind(':') + 1);
    auto r = d.cli({"serve", "--port", port});
    CHECK(r.code == 1);
    CHECK(r.err.find("gridfs:") != std::string::npos);
  }
  SUBCASE("malformed config") {
    testing::TempDir other;
    testing::write_text(other / "bad.conf", "port = 0\nstreams_cap = abc\n");
    auto r = run({kBin, "--config", (other / "bad.conf").string(), "serve"});
    CHECK(r.code == 1);
    CHECK(r.err.find("line 2") != std::string::npos);
  }
  CHECK(d.stop(SIGTERM) == 0);
}

TEST_CASE("file operations") {
  Daemon d;
  d.start();
  CHECK(d.cli({"fs", "write", d.node, "notes/a.txt", "--data", "hello world"}).out ==
        "11 bytes written\n");
  CHECK(d.cli({"fs", "stat", d.node, "notes/a.txt"}).out == "notes/a.txt: exists, 11 bytes\n");
  CHECK(d.cli({"fs", "read", d.node, "notes/a.txt"}).out == "hello world");
  CHECK(d.cli({"fs", "read", d.node, "notes/a.txt", "--offset", "6", "--length", "3"}).out ==
        "wor");
  CHECK(d.cli({"fs", "write", d.node, "notes/a.txt", "--offset", "11"}, " from stdin").code == 0);
  CHECK(d.cli({"fs", "read", d.node, "notes/a.txt"}).out == "hello world from stdin");

  auto lock = d.cli({"fs", "lock", d.node, "notes/a.txt", "--offset", "0", "--length", "5"});
  CHECK(lock.code == 0);
  CHECK(std::regex_match(lock.out, std::regex("lock [0-9]+\n")));

  CHECK(d.cli({"fs", "truncate", d.node, "notes/a.txt", "--length", "5"}).code == 0);
  CHECK(testing::read_file(d.sandbox() / "notes/a.txt") == gridfs::Bytes{'h', 'e', 'l', 'l', 'o'});
  CHECK(d.cli({"fs", "truncate", d.node, "notes/a.txt"}).code == 2);

  auto out = d.dir / "copy.txt";
  CHECK(d.cli({"fs", "read", d.node, "notes/a.txt", "--output", out.string()}).code == 0);
  CHECK(testing::read_file(out).size() == 5);
  CHECK(d.cli({"fs", "read", d.node, "../escape", "--length", "1"}).code == 3);
}

TEST_CASE("denials exit 3") {
  Daemon d;
  d.cli({"account", "add", "alice", "--key", "11"});
  d.start();
  CHECK(d.cli({"--user", "alice", "fs", "stat", d.node, "x"}).code == 3);
  CHECK(d.cli({"--user", "alice", "submit", d.node, "--cmd", "true"}).code == 3);
  CHECK(d.cli({"--psk", "00", "fs", "stat", d.node, "x"}).code == 3);
  CHECK(d.cli({"--user", "mallory", "--psk", "00", "fs", "stat", d.node, "x"}).code == 3);

  // SIGHUP reloads the account store.
  d.cli({"account", "set-perm", "alice", "FileIOPermission", "true"});
  CHECK(d.cli({"--user", "alice", "fs", "stat", d.node, "x"}).code == 3);
  REQUIRE(d.child);
  d.child->signal(SIGHUP);
  int rc = 3;
  for (int i = 0; i < 50 && rc == 3; ++i) {
    rc = d.cli({"--user", "alice", "fs", "stat", d.node, "x"}).code;
    if (rc == 3) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  CHECK(rc == 0);
}

TEST_CASE("copy, partial copy and bench") {
  Daemon d;
  d.start();
  auto data = testing::random_bytes(1500000, 51);
  testing::write_file(d.dir / "src.bin", data);
  auto md5 = testing::md5_hex(data);

  auto push = d.cli({"cp", (d.dir / "src.bin").string(), d.node + ":in/src.bin", "--streams", "3"});
  REQUIRE(push.code == 0);
  CHECK(push.out.find("md5 " + md5) == 0);
  CHECK(field(push.out, "bytes") == data.size());
  CHECK(field(push.out, "stream0") + field(push.out, "stream1") + field(push.out, "stream2") ==
        data.size());
  CHECK(testing::read_file(d.sandbox() / "in/src.bin") == data);

  auto back = d.dir / "back.bin";
  auto pull = d.cli({"--security", "secure", "cp", d.node + ":in/src.bin", back.string()});
  REQUIRE(pull.code == 0);
  CHECK(testing::read_file(back) == data);

  testing::write_text(d.dir / "abc.txt", "0123456789ABCDEF");
  auto part = d.cli({"cp", (d.dir / "abc.txt").string(), d.node + ":part.txt", "--offset", "10",
                     "--length", "5"});
  REQUIRE(part.code == 0);
  auto got = testing::read_file(d.sandbox() / "part.txt");
  REQUIRE(got.size() >= 15);
  CHECK(std::string(got.begin() + 10, got.begin() + 15) == "ABCDE");
  CHECK(d.cli({"cp", (d.dir / "abc.txt").string(), d.node + ":p2", "--offset", "10"}).code == 2);

  auto bench = d.cli({"bench", d.node, "--mem", "--streams", "2", "--seconds", "0.2", "--block",
                      "1048576"});
  REQUIRE(bench.code == 0);
  auto bytes = field(bench.out, "bytes");
  CHECK(bytes % 1048576 == 0);
  CHECK(field(bench.out, "stream0") + field(bench.out, "stream1") == bytes);
  CHECK(d.cli({"bench", d.node}).code == 2);
}

TEST_CASE("tasks, pi and crypt") {
  Daemon d;
  d.start();
  testing::write_text(d.dir / "in.txt", "a\nb\nc\n");
  auto outdir = d.dir / "results";
  fs::create_directories(outdir);
  auto sub = d.cli({"submit", d.node, "--cmd", "sh -c 'wc -l < in.txt > n.txt; echo ran'", "--dep",
                    (d.dir / "in.txt").string(), "--out", "n.txt", "--out-dir", outdir.string()});
  CHECK(sub.code == 0);
  CHECK(sub.out.find("task 0: ") == 0);
  CHECK(sub.out.find("ran\n") != std::string::npos);
  auto n = testing::read_file(outdir / "n.txt");
  CHECK(std::string(n.begin(), n.end()).find('3') != std::string::npos);
  CHECK(d.cli({"submit", d.node, "--cmd", "sh -c 'exit 4'"}).code == 1);

  auto pi = d.cli({"pi", d.node, d.node, "--digits", "40"});
  REQUIRE(pi.code == 0);
  CHECK(pi.out.substr(0, 16) == "243F6A8885A308D3");
  CHECK(pi.out.size() == 41);

  auto data = testing::random_bytes(10000, 52);
  testing::write_file(d.sandbox() / "secret.bin", data);
  std::string key(32, '7'), iv(32, '3');
  auto enc = d.cli({"crypt", "encrypt", d.node + ":secret.bin", "--workers", d.node + "," + d.node,
                    "--key", key, "--iv", iv, "--block-size", "3000"});
  REQUIRE(enc.code == 0);
  CHECK(enc.out == "4 blocks, manifest secret.bin.manifest\n");
  auto out = d.dir / "plain.bin";
  auto dec = d.cli({"crypt", "decrypt", d.node + ":secret.bin", "--key", key, "--iv", iv,
                    "--output", out.string()});
  REQUIRE(dec.code == 0);
  CHECK(testing::read_file(out) == data);
  CHECK(d.cli({"crypt", "decrypt", d.node + ":secret.bin.manifest", "--key", std::string(32, '8'),
               "--iv", iv, "--output", out.string()})
            .code == 1);
  CHECK(d.cli({"crypt", "encrypt", d.node + ":secret.bin", "--workers", d.node, "--cipher", "tdes",
               "--key", key, "--iv", iv})
            .code == 2);
}

#include <doctest.h>

#include <fstream>
#include <random>
#include <thread>

#include "gridfs/error.hpp"
#include "gridfs/taskexec/builtins.hpp"
#include "gridfs/taskexec/client.hpp"
#include "gridfs/taskexec/manager.hpp"
#include "gridfs/taskexec/pi.hpp"
#include "gridfs/taskexec/process.hpp"
#include "gridfs/taskexec/spec.hpp"
#include "support.hpp"

using namespace gridfs;
using namespace gridfs::taskexec;
using namespace std::chrono_literals;

namespace {

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Ok;
}

std::string pi_fixture() {
  std::ifstream in(std::string(GRIDFS_FIXTURES) + "/pi_hex_1024.txt");
  std::string s;
  in >> s;
  return s;
}

TaskSpec pi_task(std::uint64_t start, std::uint64_t count) {
  wire::FieldMap p;
  p.set_u64(pi_param::kStart, start).set_u64(pi_param::kCount, count);
  return TaskSpec::builtin("pi_hex_digits", p);
}

TaskSpec sh(const std::string& script) { return TaskSpec::process("/bin/sh", {"-c", script}); }

std::size_t dir_entries(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) return 0;
  return static_cast<std::size_t>(std::distance(std::filesystem::directory_iterator(p), {}));
}

}  // namespace

TEST_CASE("pi digits match the arbitrary-precision oracle") {
  CHECK(pi_hex_digits(1, 16) == "243F6A8885A308D3");
  CHECK(pi_hex_digits(1, 0).empty());
  CHECK(pi_hex_digits(1, 8) + pi_hex_digits(9, 8) == pi_hex_digits(1, 16));
  auto ref = pi_fixture();
  REQUIRE(ref.size() == 1024);
  CHECK(pi_hex_digits(1, 1024) == ref);
  CHECK(pi_hex_digits(1000, 25) == ref.substr(999, 25));
}

TEST_CASE("SPMD split") {
  using R = std::vector<std::pair<std::uint64_t, std::uint64_t>>;
  CHECK(split_spmd(1000, 4) == R{{1, 250}, {251, 250}, {501, 250}, {751, 250}});
  CHECK(split_spmd(10, 3) == R{{1, 4}, {5, 4}, {9, 2}});
  CHECK(split_spmd(5, 8) == R{{1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}});
  CHECK(split_spmd(0, 3).empty());

  auto ref = pi_fixture();
  std::mt19937 rng(21);
  for (int i = 0; i < 40; ++i) {
    std::uint64_t total = 1 + rng() % 1024, w = 1 + rng() % 8;
    std::string joined;
    std::uint64_t next = 1;
    for (auto [start, count] : split_spmd(total, w)) {
      CHECK(start == next);
      next += count;
      joined += pi_hex_digits(start, count);
    }
    CHECK(joined == ref.substr(0, total));
  }
}

TEST_CASE("command splitting") {
  using V = std::vector<std::string>;
  CHECK(split_command("echo hello") == V{"echo", "hello"});
  CHECK(split_command("  sh -c 'echo a b'  ") == V{"sh", "-c", "echo a b"});
  CHECK(split_command(R"(printf "a b" 'c d' e\"f)") == V{"printf", "a b", "c d", "e\"f"});
  CHECK(code_of([] { split_command(R"(echo \q)"); }) == Errc::InvalidArgument);
  CHECK(split_command("").empty());
}

TEST_CASE("process runner") {
  testing::TempDir dir;
  auto hello = run_process("echo", {"hello"}, dir.path(), 0ms);
  CHECK(hello.exit_code == 0);
  CHECK(hello.out == "hello\n");
  CHECK_FALSE(hello.timed_out);

  auto three = run_process("/bin/sh", {"-c", "echo oops >&2; exit 3"}, dir.path(), 0ms);
  CHECK(three.exit_code == 3);
  CHECK(three.err == "oops\n");

  auto cwd = run_process("/bin/sh", {"-c", "pwd -P"}, dir.path(), 0ms);
  CHECK(cwd.out == std::filesystem::canonical(dir.path()).string() + "\n");

  auto t0 = std::chrono::steady_clock::now();
  auto slow = run_process("sleep", {"10"}, dir.path(), 1000ms);
  auto took = std::chrono::steady_clock::now() - t0;
  CHECK(slow.timed_out);
  CHECK(took < 3s);

  CHECK(code_of([&] { run_process("/nonexistent/tool", {}, dir.path(), 0ms); }) ==
        Errc::LaunchFailed);
  CHECK(code_of([&] { run_process("no-such-tool-anywhere", {}, dir.path(), 0ms); }) ==
        Errc::LaunchFailed);
}

TEST_CASE("task specs travel intact") {
  auto t = sh("true");
  t.caps.network = true;
  t.dependencies = {{"in.txt", "/local/in.txt"}};
  t.outputs = {"out.txt"};
  t.timeout_ms = 500;
  auto p = pi_task(3, 4);
  auto back = decode_tasks(encode_tasks({t, p}));
  REQUIRE(back.size() == 2);
  CHECK(back[0].command == "/bin/sh");
  CHECK(back[0].args == t.args);
  CHECK(back[0].caps == t.caps);
  CHECK(back[0].dependencies[0].name == "in.txt");
  CHECK(back[0].outputs == t.outputs);
  CHECK(back[0].timeout_ms == 500);
  CHECK(back[1].function == "pi_hex_digits");
  CHECK(back[1].params.require_u64(pi_param::kCount) == 4);

  TaskResult r;
  r.index = 2;
  r.status = TaskStatus::Timeout;
  r.exit_code = 137;
  r.out = "o";
  r.outputs = {"x"};
  r.message = "m";
  CHECK(decode_results(encode_results({r}))[0] == r);

  auto dup = sh("true");
  dup.dependencies = {{"a", "/x"}};
  CHECK(code_of([&] { validate_task_set({dup, dup}); }) == Errc::InvalidArgument);
  auto bad = sh("true");
  bad.dependencies = {{"../a", "/x"}};
  CHECK(code_of([&] { validate_task_set({bad}); }) == Errc::InvalidArgument);
}

TEST_CASE("builtin registry") {
  BuiltinRegistry reg;
  CHECK(reg.find("pi_hex_digits"));
  CHECK(reg.find("md5_file"));
  CHECK(reg.find("nope") == nullptr);
  reg.add("twice", [](const wire::FieldMap& p, const BuiltinContext&) {
    wire::FieldMap out;
    out.set_u64(1, p.require_u64(1) * 2);
    return out;
  });
  wire::FieldMap in;
  in.set_u64(1, 21);
  CHECK((*reg.find("twice"))(in, {}).require_u64(1) == 42);
}

TEST_CASE("task sets over a node") {
  testing::NodeOptions no;
  no.users["runner"] = testing::doc_with({perms::Flag::Execution});
  no.users["viewer"] = testing::doc_with({perms::Flag::FileIOPermission});
  auto tap = std::make_shared<net::TranscriptTap>();
  no.tap = tap;
  testing::TestNode node(no);
  testing::TempDir tmp;

  SUBCASE("results come back in submission order") {
    std::vector<TaskSpec> tasks{pi_task(1, 8), pi_task(9, 8), pi_task(17, 8)};
    auto res = run_tasks(node.ep(), node.creds(), {}, tasks);
    REQUIRE(res.size() == 3);
    std::string joined;
    for (std::uint32_t i = 0; i < 3; ++i) {
      CHECK(res[i].index == i);
      CHECK(res[i].status == TaskStatus::Ok);
      joined += res[i].result.get_str(pi_param::kDigits).value_or("");
    }
    CHECK(joined == pi_hex_digits(1, 24));
  }

  SUBCASE("mixed outcomes stay per index") {
    auto slow = TaskSpec::process("sleep", {"10"});
    slow.timeout_ms = 300;
    auto net_task = sh("echo net");
    net_task.caps.network = true;
    std::vector<TaskSpec> tasks{sh("echo hello"), sh("exit 3"), slow, net_task,
                                TaskSpec::builtin("no_such_builtin", {})};
    auto res = run_tasks(node.ep(), node.creds("runner"), {}, tasks);
    REQUIRE(res.size() == 5);
    CHECK(res[0].status == TaskStatus::Ok);
    CHECK(res[0].out == "hello\n");
    CHECK(res[1].status == TaskStatus::Failed);
    CHECK(res[1].exit_code == 3);
    CHECK(res[2].status == TaskStatus::Timeout);
    CHECK(res[3].status == TaskStatus::Denied);
    CHECK(res[3].message == "SocketPermission");
    CHECK(res[4].status == TaskStatus::Failed);
  }

  SUBCASE("dependencies staged, outputs returned, one AUTH per submit") {
    auto input = testing::random_bytes(300000, 5);
    testing::write_file(tmp / "input.bin", input);
    testing::write_text(tmp / "tool.sh", "#!/bin/sh\nwc -c < input.bin > count.txt\n");
    auto t1 = TaskSpec::process("./tool.sh", {});
    t1.dependencies = {{"input.bin", (tmp / "input.bin").string()},
                       {"tool.sh", (tmp / "tool.sh").string()}};
    t1.outputs = {"count.txt"};
    wire::FieldMap mp;
    mp.set_str(md5_param::kName, "input.bin");
    auto t2 = TaskSpec::builtin("md5_file", mp);
    std::vector<TaskSpec> tasks{t1, t2, pi_task(1, 4), pi_task(5, 4)};

    tap->clear();
    TaskClient client(node.ep(), node.creds());
    auto handle = client.submit(tasks);
    auto res = client.collect(handle, tmp / "out");
    REQUIRE(res.size() == 4);
    CHECK(res[0].status == TaskStatus::Ok);
    CHECK(res[1].status == TaskStatus::Ok);
    CHECK(to_hex(res[1].result.require(md5_param::kDigest)) == testing::md5_hex(input));
    auto count = testing::read_file(tmp / "out" / "count.txt");
    CHECK(std::stoul(std::string(count.begin(), count.end())) == input.size());
    CHECK(tap->count(wire::FrameType::Auth, false) == 1);
    // Collected sets leave nothing behind.
    CHECK(dir_entries(node.config().work_root) == 0);
    CHECK(code_of([&] { client.collect(handle); }) == Errc::SetExpired);
  }

  SUBCASE("Execution=false is refused before staging") {
    testing::write_text(tmp / "dep.txt", "data");
    auto t = sh("cat dep.txt");
    t.dependencies = {{"dep.txt", (tmp / "dep.txt").string()}};
    tap->clear();
    CHECK(code_of([&] { run_tasks(node.ep(), node.creds("viewer"), {}, {t}); }) ==
          Errc::PermissionDenied);
    CHECK(tap->count(wire::FrameType::XferOffer, false) == 0);
    CHECK(dir_entries(node.config().work_root) == 0);
  }

  SUBCASE("missing dependency leaves no residue") {
    auto t = sh("cat dep.txt");
    t.dependencies = {{"dep.txt", (tmp / "absent.txt").string()}};
    CHECK(code_of([&] { run_tasks(node.ep(), node.creds(), {}, {t}); }) == Errc::StagingFailed);
    std::this_thread::sleep_for(100ms);
    CHECK(dir_entries(node.config().work_root) == 0);
    CHECK(node.server().tasks().live_sets() == 0);
  }

  SUBCASE("sets are private to their owner") {
    TaskClient a(node.ep(), node.creds());
    auto h = a.submit({sh("echo secret > s.txt; sleep 0.2")});
    TaskClient b(node.ep(), node.creds("runner"));
    CHECK(code_of([&] { b.status(h); }) == Errc::SetExpired);
    CHECK(code_of([&] { b.collect(h); }) == Errc::SetExpired);
    // Names inside a set never leave its directory.
    wire::FieldMap mp;
    mp.set_str(md5_param::kName, "../" + h.set_id + "/s.txt");
    auto r = b.collect(b.submit({TaskSpec::builtin("md5_file", mp)}));
    CHECK(r[0].status == TaskStatus::Failed);
    auto out = sh("true");
    out.outputs = {"../" + h.set_id + "/s.txt"};
    CHECK(code_of([&] { b.submit({out}); }) == Errc::InvalidArgument);
    CHECK(a.collect(h)[0].status == TaskStatus::Ok);
  }
}

TEST_CASE("tasks of a set run concurrently on the worker pool") {
  testing::NodeOptions no;
  no.task_workers = 4;
  testing::TestNode node(no);
  std::vector<TaskSpec> tasks(4, TaskSpec::process("sleep", {"0.5"}));
  auto t0 = std::chrono::steady_clock::now();
  auto res = run_tasks(node.ep(), node.creds(), {}, tasks);
  auto took = std::chrono::steady_clock::now() - t0;
  for (auto& r : res) CHECK(r.status == TaskStatus::Ok);
  CHECK(took < 1500ms);
}

TEST_CASE("finished sets expire after the retention window") {
  testing::NodeOptions no;
  no.retention = std::chrono::seconds(1);
  testing::TestNode node(no);
  TaskClient c(node.ep(), node.creds());
  auto h = c.submit({pi_task(1, 4)});
  for (int i = 0; i < 200 && c.status(h).state != SetState::Done; ++i) {
    std::this_thread::sleep_for(10ms);
  }
  REQUIRE(c.status(h).state == SetState::Done);
  std::this_thread::sleep_for(1300ms);
  CHECK(code_of([&] { c.status(h); }) == Errc::SetExpired);
  CHECK(dir_entries(node.config().work_root) == 0);
}

TEST_CASE("collect survives a lost connection") {
  testing::TestNode node;
  TaskClient c(node.ep(), node.creds(), {}, {5, 50ms});
  auto h = c.submit({TaskSpec::process("sleep", {"0.3"}), pi_task(1, 8)});
  c.session().channel.socket().shutdown_both();
  auto res = c.collect(h);
  CHECK(c.reconnects() >= 1);
  REQUIRE(res.size() == 2);
  CHECK(res[1].result.get_str(pi_param::kDigits) == "243F6A88");
}

TEST_CASE("distributed pi equals the single-node result") {
  testing::TestNode a, b, c;
  auto creds = a.creds();
  // Same admin key on every node.
  std::vector<net::Endpoint> eps{a.ep(), b.ep(), c.ep()};
  auto one = distributed_pi({a.ep()}, creds, {}, 300);
  auto many = distributed_pi(eps, creds, {}, 300);
  CHECK(one == many);
  CHECK(one == pi_fixture().substr(0, 300));
}

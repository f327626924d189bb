#include <doctest.h>

#include <csignal>
#include <numeric>
#include <thread>

#include "gridfs/dfsm/client.hpp"
#include "gridfs/error.hpp"
#include "gridfs/ftsm/engine.hpp"
#include "gridfs/ftsm/state.hpp"
#include "gridfs/harness/cluster.hpp"
#include "gridfs/harness/report.hpp"
#include "gridfs/harness/scenario.hpp"
#include "gridfs/harness/topology.hpp"
#include "support.hpp"

using namespace gridfs;
using namespace gridfs::harness;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Ok;
}

ClusterOptions cluster_options() {
  ClusterOptions o;
  o.gridfs_bin = GRIDFS_BIN;
  return o;
}

}  // namespace

TEST_CASE("topology plans") {
  auto h = TopologyPlan::make(Shape::Hierarchical, 6);
  CHECK(h.distributor == 0);
  CHECK(h.workers == std::vector<std::size_t>{1, 2, 3, 4});
  REQUIRE(h.collector);
  CHECK(*h.collector == 5);

  auto m = TopologyPlan::make(Shape::MasterSlaves, 4);
  CHECK(m.distributor == 0);
  CHECK(m.workers == std::vector<std::size_t>{1, 2, 3});
  CHECK_FALSE(m.collector);

  auto one = TopologyPlan::make(Shape::CompleteGraph, 1);
  CHECK(one.workers == std::vector<std::size_t>{0});
  auto g = TopologyPlan::make(Shape::CompleteGraph, 3);
  CHECK(g.workers == std::vector<std::size_t>{0, 1, 2});
  CHECK(TopologyPlan::make(Shape::MasterSlaves, 1).workers == std::vector<std::size_t>{0});

  CHECK(code_of([] { TopologyPlan::make(Shape::Hierarchical, 2); }) == Errc::InvalidArgument);
  CHECK(code_of([] { TopologyPlan::make(Shape::MasterSlaves, 0); }) == Errc::InvalidArgument);
  CHECK(parse_shape("hier") == Shape::Hierarchical);
  CHECK(parse_shape("ms") == Shape::MasterSlaves);
  CHECK(parse_shape("graph") == Shape::CompleteGraph);
  CHECK(code_of([] { parse_shape("ring"); }) == Errc::InvalidArgument);
  CHECK_FALSE(h.describe().empty());
}

TEST_CASE("report records") {
  Record r;
  r.scenario = "transfer";
  r.params = {{"source", "mem"}, {"streams", "4"}};
  r.bytes = 16u << 20;
  r.seconds = 0.250123;
  r.mbps = 536.871;
  r.pass = true;
  r.runs = 3;
  r.stream_bytes = {1, 2, 3};
  auto line = encode_record_line(r);
  CHECK(line.find('\n') == std::string::npos);
  auto back = decode_record_line(line);
  CHECK(back == r);
  CHECK(back.param("streams") == "4");
  CHECK(back.param("nothing").empty());

  Record f;
  f.scenario = "pi";
  f.detail = "fan-out differs";
  testing::TempDir dir;
  write_records(dir / "out.records", {r, f});
  auto all = read_records(dir / "out.records");
  REQUIRE(all.size() == 2);
  CHECK(all[0] == r);
  CHECK(all[1] == f);
  auto text = render_text(all);
  CHECK(text.find("source=mem streams=4") != std::string::npos);
  CHECK(text.find("FAIL (fan-out differs)") != std::string::npos);

  CHECK(code_of([] { decode_record_line("zz"); }) != Errc::Ok);
  CHECK(code_of([] { require_pass({Record{}}); }) == Errc::ScenarioFailed);
}

TEST_CASE("spawn failure") {
  auto o = cluster_options();
  o.gridfs_bin = "/nonexistent/gridfs";
  o.startup_timeout = std::chrono::seconds(2);
  CHECK(code_of([&] { Cluster::spawn(TopologyPlan::make(Shape::MasterSlaves, 1), o); }) ==
        Errc::SpawnFailed);
}

TEST_CASE("cluster nodes are isolated and share accounts") {
  auto cl = Cluster::spawn(TopologyPlan::make(Shape::CompleteGraph, 3), cluster_options());
  REQUIRE(cl.size() == 3);
  fs::path scratch = cl.scratch();
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(cl.running(i));
    auto c = dfsm::DfsClient::connect(cl.endpoint(i), cl.credentials());
    std::string tag = "node" + std::to_string(i);
    c.write("who", 0, Bytes(tag.begin(), tag.end()));
    c.flush("who");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    auto got = testing::read_file(cl.sandbox(i) / "who");
    CHECK(std::string(got.begin(), got.end()) == "node" + std::to_string(i));
  }
  cl.teardown();
  CHECK_FALSE(fs::exists(scratch));
}

TEST_CASE("SIGTERM during a push leaves a resumable state file") {
  auto cl = Cluster::spawn(TopologyPlan::make(Shape::MasterSlaves, 1), cluster_options());
  testing::TempDir dir;
  auto data = testing::random_bytes(64u << 20, 41);
  testing::write_file(dir / "big.bin", data);
  net::ClientOptions copts;
  copts.streams = 4;
  copts.buffer_size = 65536;
  ftsm::TransferOptions t;
  t.streams = 4;

  Errc first = Errc::Ok;
  std::thread push([&] {
    first = code_of([&] {
      ftsm::push_file(cl.endpoint(0), cl.credentials(), copts, dir / "big.bin", "big.bin", t);
    });
  });
  auto dest = cl.sandbox(0) / "big.bin";
  // The receiver saves its state every few MiB; signal once some has landed.
  for (int i = 0; i < 2000; ++i) {
    std::optional<ftsm::TransferState> st;
    try {
      st = ftsm::TransferState::load(ftsm::sidecar_path(dest));
    } catch (const Error&) {
    }
    if (st && st->received_bytes() >= (8u << 20)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  cl.stop_node(0, SIGTERM);
  push.join();
  CHECK_FALSE(cl.running(0));
  CHECK(first != Errc::Ok);
  CHECK(fs::exists(ftsm::sidecar_path(dest)));

  cl.restart_node(0);
  t.resume = true;
  auto res =
      ftsm::push_file(cl.endpoint(0), cl.credentials(), copts, dir / "big.bin", "big.bin", t);
  CHECK(res.md5 == crypto::md5(data));
  CHECK(testing::md5_hex(testing::read_file(dest)) == testing::md5_hex(data));
  CHECK_FALSE(fs::exists(ftsm::sidecar_path(dest)));
  CHECK(res.bytes < data.size());
}

TEST_CASE("scenarios on a small hierarchical cluster") {
  auto cl = Cluster::spawn(TopologyPlan::make(Shape::Hierarchical, 4), cluster_options());
  ScenarioOptions o;
  o.repeats = 2;
  o.stream_counts = {1, 3};
  o.transfer_bytes = 2u << 20;
  o.worker_counts = {1, 2};
  o.ciphers = {"aes128", "tdes"};
  o.crypt_bytes = (1u << 20) + 17;
  o.block_size = 256u << 10;
  o.pi_digits = 64;
  o.resume_bytes = 8u << 20;
  auto records = run_scenario(cl, "all", o);
  INFO(render_text(records));
  REQUIRE(records.size() == 4 + 4 + 1 + 1);
  for (const auto& r : records) {
    CHECK_MESSAGE(r.pass, r.scenario << ": " << r.detail);
    CHECK(r.runs == 2);
    if (r.scenario == "transfer") {
      CHECK(std::accumulate(r.stream_bytes.begin(), r.stream_bytes.end(), std::uint64_t{0}) ==
            r.bytes);
      CHECK(r.stream_bytes.size() == std::stoul(r.param("streams")));
      CHECK(r.mbps == doctest::Approx(ftsm::throughput_report(r.bytes, r.seconds).mbps));
    }
    if (r.scenario == "crypt") CHECK(r.bytes == o.crypt_bytes);
  }
  CHECK(code_of([&] { run_scenario(cl, "nope", o); }) == Errc::InvalidArgument);

  o.worker_counts = {5};
  auto too_many = run_scenario(cl, "crypt", o);
  REQUIRE(too_many.size() == 2);
  CHECK_FALSE(too_many[0].pass);
  CHECK(code_of([&] { require_pass(too_many); }) == Errc::ScenarioFailed);
}

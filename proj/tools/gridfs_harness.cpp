// gridfs-harness: spawns a loopback cluster and runs the acceptance scenarios.
#include <unistd.h>

#include <CLI11.hpp>
#include <iostream>

#include <spdlog/spdlog.h>

#include "gridfs/error.hpp"
#include "gridfs/harness/cluster.hpp"
#include "gridfs/harness/report.hpp"
#include "gridfs/harness/scenario.hpp"

namespace fs = std::filesystem;
using namespace gridfs;

namespace {

fs::path sibling_gridfs() {
  std::error_code ec;
  fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (ec) return "gridfs";
  return self.parent_path() / "gridfs";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridfs-harness: multi-node loopback scenarios"};
  std::string topology{"hier"}, scenario{"all"}, report, bin, scratch, security{"none"};
  std::size_t nodes = 6;
  unsigned repeats = 3;
  bool text = false, keep = false;
  std::uint64_t transfer_mib = 16, crypt_mib = 8, digits = 1024;
  std::vector<unsigned> streams{1, 2, 4, 8};
  std::vector<std::size_t> workers{1, 2, 3};
  std::vector<std::string> ciphers{"aes128"};
  std::string render;

  app.add_option("--topology", topology, "master | hier | complete");
  app.add_option("--nodes", nodes)->check(CLI::Range(1, 64));
  app.add_option("--scenario", scenario)
      ->check(CLI::IsMember({"all", "transfer", "crypt", "pi", "resume"}));
  app.add_option("--report", report, "write one hex FieldMap record per line");
  app.add_flag("--report-text", text, "print a table of the records");
  app.add_option("--render", render, "print an existing report file as a table and exit");
  app.add_option("--repeats", repeats)->check(CLI::Range(1, 1000));
  app.add_option("--gridfs", bin, "path of the gridfs executable");
  app.add_option("--scratch", scratch, "cluster directory (kept afterwards)");
  app.add_flag("--keep", keep, "keep the temporary cluster directory");
  app.add_option("--security", security)->check(CLI::IsMember({"none", "secure", "semi"}));
  app.add_option("--streams", streams)->delimiter(',');
  app.add_option("--workers", workers)->delimiter(',');
  app.add_option("--ciphers", ciphers)->delimiter(',');
  app.add_option("--transfer-mib", transfer_mib);
  app.add_option("--crypt-mib", crypt_mib);
  app.add_option("--digits", digits);
  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::warn);
  try {
    if (!render.empty()) {
      std::cout << harness::render_text(harness::read_records(render));
      return 0;
    }
    auto plan = harness::TopologyPlan::make(harness::parse_shape(topology), nodes);
    harness::ClusterOptions co;
    co.gridfs_bin = bin.empty() ? sibling_gridfs() : fs::path(bin);
    co.scratch = scratch;
    co.keep_scratch = keep;
    auto cluster = harness::Cluster::spawn(plan, co);
    std::cerr << "cluster: " << plan.describe() << " under " << cluster.scratch().string() << "\n";

    harness::ScenarioOptions so;
    so.repeats = repeats;
    so.stream_counts.assign(streams.begin(), streams.end());
    so.worker_counts = workers;
    so.ciphers = ciphers;
    so.transfer_bytes = transfer_mib << 20;
    so.crypt_bytes = crypt_mib << 20;
    so.pi_digits = digits;
    so.security = wire::parse_security_mode(security);
    auto records = harness::run_scenario(cluster, scenario, so);
    if (!report.empty()) harness::write_records(report, records);
    if (text || report.empty()) std::cout << harness::render_text(records);
    harness::require_pass(records);
    return 0;
  } catch (const Error& e) {
    std::cerr << "gridfs-harness: " << e.what() << "\n";
    return e.code() == Errc::InvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "gridfs-harness: " << e.what() << "\n";
    return 1;
  }
}

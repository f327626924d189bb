#include "gridfs/harness/scenario.hpp"

#include <signal.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "gridfs/cryptengine/engine.hpp"
#include "gridfs/error.hpp"
#include "gridfs/ftsm/engine.hpp"
#include "gridfs/secchan/crypto.hpp"
#include "gridfs/taskexec/client.hpp"
#include "gridfs/taskexec/pi.hpp"

namespace fs = std::filesystem;

namespace gridfs::harness {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

crypto::Md5Digest write_random_file(const fs::path& p, std::uint64_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  crypto::Md5 md5;
  Bytes buf(1 << 20);
  for (std::uint64_t done = 0; done < size;) {
    std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), size - done));
    for (std::size_t i = 0; i < n; i += 8) {
      std::uint64_t v = rng();
      std::memcpy(buf.data() + i, &v, std::min<std::size_t>(8, n - i));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n));
    md5.update(ByteView(buf.data(), n));
    done += n;
  }
  return md5.finish();
}

crypto::Md5Digest md5_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  crypto::Md5 md5;
  Bytes buf(1 << 20);
  while (in) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    md5.update(ByteView(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return md5.finish();
}

// Accumulates the runs of one cell.
struct Cell {
  Record rec;
  double total_seconds{0};

  Cell(std::string scenario, std::vector<std::pair<std::string, std::string>> params) {
    rec.scenario = std::move(scenario);
    rec.params = std::move(params);
    rec.pass = true;
  }
  void run(double seconds, std::uint64_t bytes, std::vector<std::uint64_t> streams = {}) {
    ++rec.runs;
    total_seconds += seconds;
    rec.bytes = bytes;
    rec.stream_bytes = std::move(streams);
  }
  void fail(const std::string& why) {
    if (rec.pass) rec.detail = why;
    rec.pass = false;
  }
  Record finish() {
    if (rec.runs > 0) rec.seconds = total_seconds / rec.runs;
    rec.mbps = ftsm::throughput_report(rec.bytes, rec.seconds).mbps;
    return rec;
  }
};

net::ClientOptions client_options(const ScenarioOptions& o, std::uint8_t streams) {
  net::ClientOptions c;
  c.security = o.security;
  c.buffer_size = o.buffer_size;
  c.streams = streams;
  return c;
}

std::vector<Record> transfer(Cluster& cl, const ScenarioOptions& o) {
  std::vector<Record> out;
  auto target = cl.endpoint(cl.plan().workers.front());
  fs::path src = cl.scratch() / "transfer.src";
  auto src_md5 = write_random_file(src, o.transfer_bytes, 0x5eed);
  for (const char* source : {"mem", "disk"}) {
    for (auto n : o.stream_counts) {
      Cell cell("transfer", {{"source", source}, {"streams", std::to_string(n)},
                             {"security", wire::security_mode_name(o.security)}});
      for (unsigned r = 0; r < o.repeats; ++r) {
        try {
          auto copts = client_options(o, n);
          auto session = net::open_session(target, wire::Mode::FtsmPush, cl.credentials(), copts);
          ftsm::FtsmClient client(session, target, copts);
          ftsm::TransferOptions topts;
          topts.streams = n;
          ftsm::TransferResult res;
          if (std::string_view(source) == "mem") {
            res = client.push_memory(o.transfer_bytes, topts);
          } else {
            res = client.push(src, "sweep/disk-" + std::to_string(n) + ".bin", topts);
            if (res.md5 != src_md5) cell.fail("md5 mismatch");
          }
          auto sum = std::accumulate(res.stream_bytes.begin(), res.stream_bytes.end(),
                                     std::uint64_t{0});
          if (sum != res.bytes) cell.fail("stream bytes do not add up");
          if (res.bytes != o.transfer_bytes) cell.fail("short transfer");
          cell.run(res.seconds, res.bytes, res.stream_bytes);
        } catch (const std::exception& e) {
          cell.fail(e.what());
        }
      }
      out.push_back(cell.finish());
    }
  }
  fs::remove(src);
  return out;
}

std::vector<Record> crypt(Cluster& cl, const ScenarioOptions& o) {
  std::vector<Record> out;
  const auto& plan = cl.plan();
  auto dist = cl.endpoint(plan.distributor);
  fs::path src = cl.scratch() / "crypt.src";
  auto src_md5 = write_random_file(src, o.crypt_bytes, 0xc0ffee);
  auto copts = client_options(o, 1);
  ftsm::push_file(dist, cl.credentials(), copts, src, "crypt/source.bin", {});
  const std::uint64_t expect_blocks = (o.crypt_bytes + o.block_size - 1) / o.block_size;

  for (const auto& cipher : o.ciphers) {
    for (auto w : o.worker_counts) {
      Cell cell("crypt", {{"cipher", cipher}, {"workers", std::to_string(w)},
                          {"block_size", std::to_string(o.block_size)}});
      if (w > plan.workers.size()) {
        cell.fail("topology has only " + std::to_string(plan.workers.size()) + " workers");
        out.push_back(cell.finish());
        continue;
      }
      for (unsigned r = 0; r < o.repeats; ++r) {
        try {
          cryptengine::DistributeOptions d;
          d.distributor = dist;
          d.source = "crypt/source.bin";
          for (std::size_t i = 0; i < w; ++i) d.workers.push_back(cl.endpoint(plan.workers[i]));
          if (plan.collector) d.collector = cl.endpoint(*plan.collector);
          const auto& c = cryptengine::cipher_by_name(cipher);
          d.params.algorithm = cipher;
          d.params.key.resize(c.key_size());
          d.params.iv.resize(c.iv_size());
          crypto::random_bytes(d.params.key);
          crypto::random_bytes(d.params.iv);
          d.block_size = o.block_size;
          d.store_dir = "blocks/" + cipher + "-w" + std::to_string(w);
          d.creds = cl.credentials();
          d.client = copts;
          auto t0 = Clock::now();
          auto rep = cryptengine::distribute(d);
          fs::path back = cl.scratch() / "crypt.back";
          cryptengine::reassemble(rep.map, d.params, back, cl.credentials(), copts);
          double secs = since(t0);
          if (rep.map.blocks.size() != expect_blocks) cell.fail("block count");
          if (md5_file(back) != src_md5) cell.fail("roundtrip differs");
          fs::remove(back);
          cell.run(secs, o.crypt_bytes);
        } catch (const std::exception& e) {
          cell.fail(e.what());
        }
      }
      out.push_back(cell.finish());
    }
  }
  fs::remove(src);
  return out;
}

std::vector<Record> pi(Cluster& cl, const ScenarioOptions& o) {
  std::vector<net::Endpoint> all;
  for (std::size_t i = 0; i < cl.size(); ++i) all.push_back(cl.endpoint(i));
  Cell cell("pi", {{"digits", std::to_string(o.pi_digits)}, {"nodes", std::to_string(all.size())}});
  auto copts = client_options(o, 1);
  try {
    std::string single =
        taskexec::distributed_pi({all.front()}, cl.credentials(), copts, o.pi_digits);
    if (single.size() != o.pi_digits) cell.fail("single-node result has wrong length");
    if (single.compare(0, 16, std::string("243F6A8885A308D3"), 0,
                       std::min<std::size_t>(16, single.size())) != 0) {
      cell.fail("leading digits wrong");
    }
    for (unsigned r = 0; r < o.repeats; ++r) {
      auto t0 = Clock::now();
      std::string fan = taskexec::distributed_pi(all, cl.credentials(), copts, o.pi_digits);
      cell.run(since(t0), o.pi_digits);
      if (fan != single) cell.fail("fan-out differs from single node");
    }
  } catch (const std::exception& e) {
    cell.fail(e.what());
  }
  return {cell.finish()};
}

// Data streams drop at about half way, the receiving daemon is stopped with
// SIGTERM and restarted, and the transfer resumes from its state file.
std::vector<Record> resume(Cluster& cl, const ScenarioOptions& o) {
  std::size_t node = cl.plan().workers.front();
  Cell cell("resume", {{"bytes", std::to_string(o.resume_bytes)}, {"streams", "4"}});
  fs::path src = cl.scratch() / "resume.src";
  auto src_md5 = write_random_file(src, o.resume_bytes, 0xbeef);
  auto copts = client_options(o, 4);
  for (unsigned r = 0; r < o.repeats; ++r) {
    std::string remote = "resume/run" + std::to_string(r) + ".bin";
    try {
      ftsm::TransferOptions first;
      first.streams = 4;
      first.abort_after_bytes = o.resume_bytes / 2;
      auto t0 = Clock::now();
      bool interrupted = false;
      try {
        ftsm::push_file(cl.endpoint(node), cl.credentials(), copts, src, remote, first);
      } catch (const Error&) {
        interrupted = true;
      }
      if (!interrupted) cell.fail("first attempt was not interrupted");
      cl.restart_node(node);
      fs::path sidecar = ftsm::sidecar_path(cl.sandbox(node) / remote);
      if (!fs::exists(sidecar)) cell.fail("no transfer state after restart");
      ftsm::TransferOptions again;
      again.streams = 4;
      again.resume = true;
      auto res = ftsm::push_file(cl.endpoint(node), cl.credentials(), copts, src, remote, again);
      cell.run(since(t0), o.resume_bytes, res.stream_bytes);
      if (res.md5 != src_md5 || md5_file(cl.sandbox(node) / remote) != src_md5) {
        cell.fail("md5 mismatch after resume");
      }
      if (res.bytes >= o.resume_bytes) cell.fail("resume resent the whole file");
      if (fs::exists(sidecar)) cell.fail("state file left behind");
    } catch (const std::exception& e) {
      cell.fail(e.what());
    }
  }
  fs::remove(src);
  return {cell.finish()};
}

}  // namespace

std::vector<Record> run_scenario(Cluster& cluster, std::string_view id,
                                 const ScenarioOptions& options) {
  if (id == "all") {
    std::vector<Record> out;
    for (auto s : kScenarioIds) {
      auto part = run_scenario(cluster, s, options);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  if (id == "transfer") return transfer(cluster, options);
  if (id == "crypt") return crypt(cluster, options);
  if (id == "pi") return pi(cluster, options);
  if (id == "resume") return resume(cluster, options);
  throw Error(Errc::InvalidArgument, "unknown scenario '" + std::string(id) + "'");
}

void require_pass(const std::vector<Record>& records) {
  for (const auto& r : records) {
    if (!r.pass) {
      std::string ps;
      for (const auto& [k, v] : r.params) ps += " " + k + "=" + v;
      throw Error(Errc::ScenarioFailed, r.scenario + ps + ": " + r.detail);
    }
  }
}

}  // namespace gridfs::harness

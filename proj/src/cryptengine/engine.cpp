#include "gridfs/cryptengine/engine.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "gridfs/dfsm/client.hpp"
#include "gridfs/error.hpp"
#include "gridfs/ftsm/engine.hpp"
#include "gridfs/taskexec/client.hpp"
#include "gridfs/wire/tags.hpp"

namespace fs = std::filesystem;

namespace gridfs::cryptengine {

using wire::FieldMap;

namespace {

namespace ct {
constexpr FieldMap::Tag kCipher = 1, kKey = 2, kIv = 3, kSourceNode = 4, kSourcePath = 5,
                        kDestNode = 6, kDestPath = 7, kOffset = 8, kLength = 9, kPart = 10,
                        kUser = 11, kPsk = 12, kSecurity = 13, kBuffer = 14;
}
namespace rt {
constexpr FieldMap::Tag kPart = 1, kCipherLength = 2, kMd5 = 3;
}

std::atomic<std::size_t> g_peak{0};

void note_buffer(std::size_t bytes) {
  std::size_t cur = g_peak.load();
  while (bytes > cur && !g_peak.compare_exchange_weak(cur, bytes)) {
  }
}

}  // namespace

namespace gauge {
void reset() { g_peak.store(0); }
std::size_t peak() { return g_peak.load(); }
}  // namespace gauge

FieldMap CryptTask::to_fields() const {
  FieldMap m;
  m.set_str(ct::kCipher, params.algorithm)
      .set(ct::kKey, ByteView(params.key))
      .set(ct::kIv, ByteView(params.iv))
      .set_str(ct::kSourceNode, source_node)
      .set_str(ct::kSourcePath, source_path)
      .set_str(ct::kDestNode, dest_node)
      .set_str(ct::kDestPath, dest_path)
      .set_u64(ct::kOffset, offset)
      .set_u64(ct::kLength, length)
      .set_u64(ct::kPart, part_num)
      .set_str(ct::kUser, creds.username)
      .set(ct::kPsk, ByteView(creds.psk))
      .set_u64(ct::kSecurity, static_cast<std::uint64_t>(security))
      .set_u64(ct::kBuffer, buffer_size);
  return m;
}

CryptTask CryptTask::from_fields(const FieldMap& m) {
  CryptTask t;
  t.params.algorithm = m.require_str(ct::kCipher);
  t.params.key = m.require(ct::kKey);
  t.params.iv = m.require(ct::kIv);
  t.source_node = m.require_str(ct::kSourceNode);
  t.source_path = m.require_str(ct::kSourcePath);
  t.dest_node = m.require_str(ct::kDestNode);
  t.dest_path = m.require_str(ct::kDestPath);
  t.offset = m.require_u64(ct::kOffset);
  t.length = m.require_u64(ct::kLength);
  t.part_num = m.require_u64(ct::kPart);
  t.creds.username = m.require_str(ct::kUser);
  t.creds.psk = m.require(ct::kPsk);
  auto sec = m.u64_or(ct::kSecurity, 0);
  if (sec > 2) throw Error(Errc::ProtocolError, "unknown security mode");
  t.security = static_cast<wire::SecurityMode>(sec);
  t.buffer_size = static_cast<std::uint32_t>(m.u64_or(ct::kBuffer, wire::kDefaultBufferSize));
  return t;
}

FieldMap CryptTaskResult::to_fields() const {
  FieldMap m;
  m.set_u64(rt::kPart, part_num).set_u64(rt::kCipherLength, cipher_length).set(rt::kMd5,
                                                                                ByteView(md5));
  return m;
}

CryptTaskResult CryptTaskResult::from_fields(const FieldMap& m) {
  return CryptTaskResult{m.require_u64(rt::kPart), m.require_u64(rt::kCipherLength),
                         to_array<16>(m.require(rt::kMd5))};
}

CryptTaskResult run_crypt_task(const CryptTask& task) {
  task.params.validate();
  net::ClientOptions copts;
  copts.security = task.security;
  copts.buffer_size = task.buffer_size;
  auto src = dfsm::DfsClient::connect(net::Endpoint::parse(task.source_node), task.creds, copts);
  std::optional<dfsm::DfsClient> dst_own;
  dfsm::DfsClient* dst = &src;
  if (task.dest_node != task.source_node) {
    dst_own.emplace(dfsm::DfsClient::connect(net::Endpoint::parse(task.dest_node), task.creds, copts));
    dst = &*dst_own;
  }

  auto enc = task.params.cipher().stream(Direction::Encrypt, task.params.key, task.params.iv);
  crypto::Md5 md5;
  const std::uint64_t step = src.buffer_size();
  Bytes out;
  out.reserve(step + task.params.cipher().block_size());
  std::uint64_t pos = 0;
  std::uint64_t written = kBlockHeaderSize;
  while (pos < task.length) {
    Bytes in = src.read(task.source_path, task.offset + pos, std::min(step, task.length - pos));
    if (in.empty()) throw Error(Errc::NoSuchFile, "source ends before the block");
    md5.update(in);
    out.clear();
    enc->update(in, out);
    note_buffer(in.capacity() + out.capacity());
    if (!out.empty()) written += dst->write(task.dest_path, written, out);
    pos += in.size();
  }
  out.clear();
  enc->finish(out);
  if (!out.empty()) written += dst->write(task.dest_path, written, out);

  CryptTaskResult r{task.part_num, written - kBlockHeaderSize, md5.finish()};
  auto header = encode_block_header(BlockHeader{r.part_num, r.cipher_length, r.md5});
  dst->set_length(task.dest_path, written);
  dst->write(task.dest_path, 0, header);
  dst->flush(task.dest_path);
  return r;
}

CryptTaskResult run_remote_crypt(const net::Endpoint& worker, const net::Credentials& creds,
                                 const net::ClientOptions& copts, const CryptTask& task) {
  auto s = net::open_session(worker, wire::Mode::Crypt, creds, copts);
  FieldMap req;
  req.set_map(wire::crypt_frame_tag::kTask, task.to_fields());
  s.channel.send(wire::FrameType::CryptTask, req);
  FieldMap reply = s.channel.recv_fields(wire::FrameType::CryptTask);
  return CryptTaskResult::from_fields(reply.require_map(wire::crypt_frame_tag::kResult));
}

void register_builtins(taskexec::BuiltinRegistry& registry) {
  registry.add(std::string(kCryptBuiltin),
               [](const FieldMap& params, const taskexec::BuiltinContext&) {
                 return run_crypt_task(CryptTask::from_fields(params)).to_fields();
               });
}

DistributeReport distribute(const DistributeOptions& opts) {
  opts.params.validate();
  if (opts.workers.empty()) throw Error(Errc::NoWorkers, "no workers given");
  auto dist = dfsm::DfsClient::connect(opts.distributor, opts.creds, opts.client);
  auto st = dist.stat(opts.source);
  if (!st.exists) throw Error(Errc::NoSuchFile, opts.source);
  BlockPlan plan = plan_blocks(st.size, opts.block_size);
  fs::path src_path(opts.source);
  std::string base = src_path.filename().string();

  DistributeReport report;
  report.map.source = opts.source;
  report.map.cipher = opts.params.algorithm;
  report.map.file_size = st.size;
  report.map.block_size = opts.block_size;

  std::vector<std::size_t> alive(opts.workers.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
  std::vector<std::uint64_t> pending;
  for (const auto& b : plan.blocks) pending.push_back(b.part_num);
  std::map<std::uint64_t, Placement> placed;
  std::string last_error;

  while (!pending.empty()) {
    if (alive.empty()) throw Error(Errc::NoWorkers, "every worker failed; last: " + last_error);
    std::map<std::size_t, std::vector<std::uint64_t>> assignment;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      assignment[alive[i % alive.size()]].push_back(pending[i]);
    }
    pending.clear();

    std::mutex mu;
    std::vector<std::size_t> failed;
    std::vector<std::thread> threads;
    for (const auto& [w, parts] : assignment) {
      threads.emplace_back([&, w = w, parts = parts] {
        const net::Endpoint& worker = opts.workers[w];
        net::Endpoint holder = opts.collector.value_or(worker);
        std::vector<taskexec::TaskSpec> tasks;
        std::vector<Placement> placements;
        for (auto part : parts) {
          const auto& b = plan.blocks[part];
          CryptTask t;
          t.params = opts.params;
          t.source_node = opts.distributor.str();
          t.source_path = opts.source;
          t.dest_node = holder.str();
          t.dest_path = (fs::path(opts.store_dir) / block_file_name(base, part)).string();
          t.offset = b.offset;
          t.length = b.plain_length;
          t.part_num = part;
          t.creds = opts.creds;
          t.security = opts.client.security;
          t.buffer_size = opts.client.buffer_size;
          tasks.push_back(taskexec::TaskSpec::builtin(std::string(kCryptBuiltin), t.to_fields()));
          placements.push_back(Placement{part, holder.str(), t.dest_path, b.offset,
                                         b.plain_length, 0, {}});
        }
        std::vector<std::uint64_t> lost;
        bool worker_failed = false;
        try {
          auto results = taskexec::run_tasks(worker, opts.creds, opts.client, tasks);
          for (std::size_t i = 0; i < results.size(); ++i) {
            if (results[i].status != taskexec::TaskStatus::Ok) {
              worker_failed = true;
              lost.push_back(parts[i]);
              std::lock_guard lk(mu);
              last_error = worker.str() + ": " + results[i].message;
              continue;
            }
            auto r = CryptTaskResult::from_fields(results[i].result);
            placements[i].cipher_length = r.cipher_length;
            placements[i].md5 = r.md5;
            std::lock_guard lk(mu);
            placed[parts[i]] = placements[i];
          }
        } catch (const Error& e) {
          worker_failed = true;
          lost = parts;
          std::lock_guard lk(mu);
          last_error = worker.str() + ": " + e.what();
        }
        std::lock_guard lk(mu);
        if (worker_failed) {
          failed.push_back(w);
          spdlog::warn("worker {} failed ({}); reassigning {} block(s)", worker.str(), last_error,
                       lost.size());
        }
        pending.insert(pending.end(), lost.begin(), lost.end());
      });
    }
    for (auto& t : threads) t.join();
    for (auto w : failed) {
      alive.erase(std::remove(alive.begin(), alive.end(), w), alive.end());
      report.failed_workers.push_back(opts.workers[w].str());
    }
    std::sort(pending.begin(), pending.end());
  }

  for (auto& [part, p] : placed) report.map.blocks.push_back(p);
  report.map.validate();

  report.manifest_path = (src_path.parent_path() / manifest_name(base)).string();
  Bytes manifest = report.map.encode();
  dist.set_length(report.manifest_path, 0);
  dist.write(report.manifest_path, 0, manifest);
  dist.flush(report.manifest_path);
  return report;
}

PlacementMap read_manifest(const net::Endpoint& distributor, const std::string& path,
                           const net::Credentials& creds, const net::ClientOptions& copts) {
  auto dfs = dfsm::DfsClient::connect(distributor, creds, copts);
  auto st = dfs.stat(path);
  if (!st.exists) throw Error(Errc::NoSuchFile, path);
  return PlacementMap::decode(dfs.read(path, 0, st.size));
}

void reassemble(const PlacementMap& map, const CipherParams& params, const fs::path& destination,
                const net::Credentials& creds, const net::ClientOptions& copts) {
  params.validate();
  map.validate();
  if (map.cipher != params.algorithm) {
    throw Error(Errc::InvalidArgument, "manifest was written with " + map.cipher);
  }
  fs::path partial = destination;
  partial += ".partial";
  fs::path scratch = destination;
  scratch += ".block";
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : {partial, scratch, ftsm::sidecar_path(partial),
                          ftsm::sidecar_path(scratch)}) {
      fs::remove(p, ec);
    }
  };
  if (destination.has_parent_path()) fs::create_directories(destination.parent_path());

  try {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Internal, "cannot create " + partial.string());
    std::vector<Placement> blocks = map.blocks;
    std::sort(blocks.begin(), blocks.end(),
              [](const auto& a, const auto& b) { return a.part_num < b.part_num; });
    for (const auto& b : blocks) {
      std::string part = "part " + std::to_string(b.part_num);
      try {
        ftsm::pull_file(net::Endpoint::parse(b.holder), creds, copts, b.file, scratch, {});
      } catch (const Error& e) {
        if (e.code() == Errc::NoSuchFile) throw Error(Errc::MissingBlock, part);
        throw;
      }
      Bytes block;
      {
        std::ifstream in(scratch, std::ios::binary);
        block.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
      }
      BlockHeader h = decode_block_header(block);
      if (h.part_num != b.part_num || h.md5 != b.md5) {
        throw Error(Errc::IntegrityMismatch, part + ": header disagrees with the manifest");
      }
      Bytes plain;
      try {
        plain = decrypt_block(block, params);
      } catch (const Error& e) {
        if (e.code() == Errc::BadPadding) throw Error(Errc::IntegrityMismatch, part + ": bad padding");
        throw;
      }
      if (plain.size() != b.plain_length) {
        throw Error(Errc::IntegrityMismatch, part + ": wrong plaintext length");
      }
      out.seekp(static_cast<std::streamoff>(b.offset));
      out.write(reinterpret_cast<const char*>(plain.data()),
                static_cast<std::streamsize>(plain.size()));
      if (!out) throw Error(Errc::StorageFull, "short write on " + partial.string());
    }
    out.close();
    fs::remove(scratch);
    fs::rename(partial, destination);
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace gridfs::cryptengine

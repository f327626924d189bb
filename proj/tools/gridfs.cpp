// gridfs: node daemon and operator CLI.
#include <signal.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <optional>
#include <regex>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gridfs/cryptengine/engine.hpp"
#include "gridfs/dfsm/client.hpp"
#include "gridfs/error.hpp"
#include "gridfs/ftsm/engine.hpp"
#include "gridfs/node/config.hpp"
#include "gridfs/node/server.hpp"
#include "gridfs/perms/accounts.hpp"
#include "gridfs/secchan/crypto.hpp"
#include "gridfs/taskexec/client.hpp"
#include "gridfs/taskexec/process.hpp"

namespace fs = std::filesystem;
using namespace gridfs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDenied = 3;

struct Common {
  std::string config;
  std::string user;
  std::string psk_hex;
  std::string security{"none"};
  std::uint32_t buffer{wire::kDefaultBufferSize};
  bool verbose{false};
};

fs::path config_path(const Common& c) {
  if (!c.config.empty()) return c.config;
  if (const char* env = std::getenv("GRIDFS_CONFIG"); env && *env) return env;
  return "gridfs.conf";
}

node::NodeConfig load(const Common& c) {
  std::vector<std::string> warnings;
  auto cfg = node::load_config(config_path(c), &warnings);
  for (const auto& w : warnings) spdlog::warn("config: {}", w);
  return cfg;
}

// --user / GRIDFS_USER (default admin); --psk / GRIDFS_PSK, else the
// credential file named by the config.
net::Credentials credentials(const Common& c) {
  net::Credentials cr;
  cr.username = c.user;
  if (cr.username.empty()) {
    const char* env = std::getenv("GRIDFS_USER");
    cr.username = env && *env ? env : std::string(perms::kBuiltinAdmin);
  }
  std::string hex = c.psk_hex;
  if (hex.empty()) {
    if (const char* env = std::getenv("GRIDFS_PSK")) hex = env;
  }
  if (!hex.empty()) {
    cr.psk = from_hex(hex);
    return cr;
  }
  auto cfg = load(c);
  for (auto& line : perms::read_credentials(cfg.credentials)) {
    if (line.username == cr.username) {
      cr.psk = std::move(line.psk);
      return cr;
    }
  }
  throw Error(Errc::InvalidArgument,
              "no key for '" + cr.username + "': pass --psk or set GRIDFS_PSK");
}

net::ClientOptions client_options(const Common& c, std::uint8_t streams) {
  net::ClientOptions o;
  o.security = wire::parse_security_mode(c.security);
  o.buffer_size = c.buffer;
  o.streams = streams;
  return o;
}

// "host:port:path" or "host:path" (default port).
std::optional<std::pair<net::Endpoint, std::string>> parse_remote(const std::string& text) {
  static const std::regex with_port(R"(^([^:/]+):(\d+):(.+)$)");
  static const std::regex bare(R"(^([^:/]+):([^:].*)$)");
  std::smatch m;
  if (std::regex_match(text, m, with_port)) {
    return std::make_pair(net::Endpoint::parse(m[1].str() + ":" + m[2].str()), m[3].str());
  }
  if (std::regex_match(text, m, bare)) {
    return std::make_pair(net::Endpoint{m[1].str(), 2525}, m[2].str());
  }
  return std::nullopt;
}

std::vector<net::Endpoint> parse_endpoints(const std::vector<std::string>& items) {
  std::vector<net::Endpoint> out;
  for (const auto& s : items) out.push_back(net::Endpoint::parse(s));
  return out;
}

void print_report(const ftsm::ThroughputReport& r) { std::cout << r.to_string() << "\n"; }

int run_serve(const Common& c, std::optional<std::uint16_t> port) {
  auto cfg = load(c);
  if (port) cfg.port = *port;
  spdlog::set_level(spdlog::level::from_str(cfg.log_level));

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGHUP);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  signal(SIGPIPE, SIG_IGN);

  node::NodeServer server(cfg);
  server.start();
  for (;;) {
    int sig = 0;
    if (sigwait(&set, &sig) != 0) continue;
    if (sig == SIGHUP) {
      server.reload_accounts();
      continue;
    }
    spdlog::info("signal {}: shutting down", sig);
    server.stop();
    return kExitOk;
  }
}

int run_cp(const Common& c, const std::string& src, const std::string& dst, std::uint8_t streams,
           std::optional<std::uint64_t> offset, std::optional<std::uint64_t> length, bool resume,
           std::uint32_t chunk) {
  ftsm::TransferOptions t;
  t.streams = streams;
  t.chunk_size = chunk;
  t.resume = resume;
  if (offset || length) {
    t.region = ftsm::Region{offset.value_or(0), length.value_or(0)};
    if (!length) {
      throw Error(Errc::InvalidArgument, "--offset needs --length");
    }
  }
  auto creds = credentials(c);
  auto copts = client_options(c, streams);
  ftsm::TransferResult r;
  if (auto remote = parse_remote(dst); remote && !parse_remote(src)) {
    r = ftsm::push_file(remote->first, creds, copts, src, remote->second, t);
  } else if (auto from = parse_remote(src); from && !parse_remote(dst)) {
    r = ftsm::pull_file(from->first, creds, copts, from->second, dst, t);
  } else {
    throw Error(Errc::InvalidArgument, "exactly one of <src> and <dst> must be node:path");
  }
  std::cout << "md5 " << to_hex(r.md5) << "\n";
  print_report(r.report());
  return kExitOk;
}

int run_bench(const Common& c, const std::string& node, bool mem, std::uint8_t streams,
              double seconds, std::uint64_t block, const std::string& file) {
  if (!mem && file.empty()) throw Error(Errc::InvalidArgument, "bench needs --mem or --file");
  auto ep = net::Endpoint::parse(node);
  auto copts = client_options(c, streams);
  auto session = net::open_session(ep, wire::Mode::FtsmPush, credentials(c), copts);
  ftsm::FtsmClient client(session, ep, copts);
  ftsm::TransferOptions t;
  t.streams = streams;
  std::uint64_t bytes = 0;
  double elapsed = 0;
  std::vector<std::uint64_t> per_stream(streams, 0);
  int runs = 0;
  do {
    auto r = mem ? client.push_memory(block, t)
                 : client.push(file, "bench/" + fs::path(file).filename().string(), t);
    bytes += r.bytes;
    elapsed += r.seconds;
    for (std::size_t i = 0; i < r.stream_bytes.size() && i < per_stream.size(); ++i) {
      per_stream[i] += r.stream_bytes[i];
    }
    ++runs;
  } while (elapsed < seconds);
  std::cout << "runs " << runs << "\n";
  print_report(ftsm::throughput_report(bytes, elapsed, per_stream));
  return kExitOk;
}

Bytes read_input(const std::string& data, const std::string& input) {
  if (!data.empty()) return to_bytes(data);
  std::istreambuf_iterator<char> end;
  if (!input.empty()) {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw Error(Errc::NoSuchFile, input);
    return Bytes(std::istreambuf_iterator<char>(in), end);
  }
  return Bytes(std::istreambuf_iterator<char>(std::cin), end);
}

int run_fs(const Common& c, const std::string& op, const std::string& node, const std::string& path,
           std::optional<std::uint64_t> offset, std::optional<std::uint64_t> length,
           const std::string& data, const std::string& input, const std::string& output,
           std::uint64_t lock_id) {
  auto client = dfsm::DfsClient::connect(net::Endpoint::parse(node), credentials(c),
                                         client_options(c, 1));
  std::uint64_t off = offset.value_or(0);
  if (op == "read") {
    std::uint64_t len = 0;
    if (length) {
      len = *length;
    } else {
      auto size = client.stat(path).size;
      len = size - std::min(off, size);
    }
    Bytes b = client.read(path, off, len);
    if (output.empty()) {
      std::cout.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    } else {
      std::ofstream out(output, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    }
  } else if (op == "write") {
    Bytes b = read_input(data, input);
    std::cout << client.write(path, off, b) << " bytes written\n";
  } else if (op == "lock") {
    std::cout << "lock " << client.lock(path, off, length.value_or(dfsm::kWholeFile)) << "\n";
  } else if (op == "unlock") {
    client.unlock(lock_id);
  } else if (op == "truncate") {
    if (!length) throw Error(Errc::InvalidArgument, "truncate needs --length");
    client.set_length(path, *length);
  } else {
    auto st = client.stat(path);
    std::cout << path << ": " << (st.exists ? "exists" : "missing") << ", " << st.size
              << " bytes\n";
  }
  client.close();
  return kExitOk;
}

int run_submit(const Common& c, const std::string& node, const std::string& cmd,
               const std::vector<std::string>& deps, const std::vector<std::string>& outs,
               bool net_cap, std::uint32_t timeout_ms, const std::string& out_dir) {
  auto argv = taskexec::split_command(cmd);
  if (argv.empty()) throw Error(Errc::InvalidArgument, "--cmd is empty");
  auto spec = taskexec::TaskSpec::process(argv.front(), {argv.begin() + 1, argv.end()});
  for (const auto& d : deps) spec.dependencies.push_back({fs::path(d).filename().string(), d});
  spec.outputs = outs;
  spec.caps.network = net_cap;
  spec.timeout_ms = timeout_ms;
  auto results = taskexec::run_tasks(net::Endpoint::parse(node), credentials(c),
                                     client_options(c, 1), std::vector<taskexec::TaskSpec>{spec}, out_dir);
  int rc = kExitOk;
  for (const auto& r : results) {
    std::cout << "task " << r.index << ": " << taskexec::task_status_name(r.status) << " exit "
              << r.exit_code << (r.message.empty() ? "" : " (" + r.message + ")") << "\n";
    std::cout << r.out;
    std::cerr << r.err;
    if (r.status == taskexec::TaskStatus::Denied) rc = kExitDenied;
    else if (r.status != taskexec::TaskStatus::Ok && rc == kExitOk) rc = kExitError;
  }
  return rc;
}

int run_pi(const Common& c, const std::vector<std::string>& nodes, std::uint64_t digits) {
  std::cout << taskexec::distributed_pi(parse_endpoints(nodes), credentials(c),
                                        client_options(c, 1), digits)
            << "\n";
  return kExitOk;
}

int run_crypt(const Common& c, const std::string& op, const std::string& file,
              const std::vector<std::string>& workers, const std::string& cipher,
              const std::string& key, const std::string& iv, std::uint64_t block_size,
              const std::string& collector, const std::string& store_dir,
              const std::string& output) {
  auto remote = parse_remote(file);
  if (!remote) throw Error(Errc::InvalidArgument, "<file> must be node:path on the distributor");
  cryptengine::CipherParams params{cipher, from_hex(key), from_hex(iv)};
  params.validate();
  auto creds = credentials(c);
  auto copts = client_options(c, 1);
  if (op == "encrypt") {
    cryptengine::DistributeOptions d;
    d.distributor = remote->first;
    d.source = remote->second;
    d.workers = parse_endpoints(workers);
    if (!collector.empty()) d.collector = net::Endpoint::parse(collector);
    d.params = params;
    d.block_size = block_size;
    if (!store_dir.empty()) d.store_dir = store_dir;
    d.creds = creds;
    d.client = copts;
    auto rep = cryptengine::distribute(d);
    std::cout << rep.map.blocks.size() << " blocks, manifest " << rep.manifest_path << "\n";
    for (const auto& w : rep.failed_workers) std::cout << "worker failed: " << w << "\n";
    return kExitOk;
  }
  std::string manifest = remote->second;
  if (fs::path(manifest).extension() != ".manifest") {
    fs::path p(manifest);
    manifest = (p.parent_path() / cryptengine::manifest_name(p.filename().string())).string();
  }
  auto map = cryptengine::read_manifest(remote->first, manifest, creds, copts);
  fs::path dest = output.empty() ? fs::path(map.source).filename() : fs::path(output);
  cryptengine::reassemble(map, params, dest, creds, copts);
  std::cout << "wrote " << dest.string() << " (" << map.file_size << " bytes)\n";
  return kExitOk;
}

fs::path account_doc(const node::NodeConfig& cfg, const std::string& user) {
  return cfg.accounts_dir / (user + ".xml");
}

perms::PermissionDoc read_doc(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::NoSuchFile, "no permission document " + p.string());
  std::string xml((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return perms::parse_permissions(xml);
}

void write_doc(const fs::path& p, const perms::PermissionDoc& doc) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  out << perms::serialize_permissions(doc);
}

int run_account(const Common& c, const std::string& op, const std::string& user,
                const std::string& flag, const std::string& value, bool admin,
                const std::string& psk_hex) {
  auto cfg = load(c);
  if (op == "add") {
    auto creds = perms::read_credentials(cfg.credentials);
    Bytes psk = psk_hex.empty() ? Bytes(32) : from_hex(psk_hex);
    if (psk_hex.empty()) crypto::random_bytes(psk);
    std::erase_if(creds, [&](const auto& cr) { return cr.username == user; });
    creds.push_back({user, psk});
    if (cfg.credentials.has_parent_path()) fs::create_directories(cfg.credentials.parent_path());
    perms::write_credentials(cfg.credentials, creds);
    auto doc_path = account_doc(cfg, user);
    if (!fs::exists(doc_path)) {
      perms::PermissionDoc doc;
      doc.account_type = admin ? perms::AccountType::Administrator : perms::AccountType::Others;
      write_doc(doc_path, doc);
    }
    std::cout << user << ":" << to_hex(psk) << "\n";
    return kExitOk;
  }
  auto doc_path = account_doc(cfg, user);
  auto doc = read_doc(doc_path);
  if (op == "set-perm") {
    bool v;
    if (value == "true" || value == "True") v = true;
    else if (value == "false" || value == "False") v = false;
    else throw Error(Errc::InvalidArgument, "value must be true or false");
    doc.set(perms::parse_flag(flag), v);
    write_doc(doc_path, doc);
  }
  std::cout << "account " << user << " ("
            << (doc.account_type == perms::AccountType::Administrator ? "Administrator" : "Others")
            << ")\n";
  for (auto f : perms::kAllFlags) {
    std::cout << "  " << perms::flag_name(f) << " = " << (doc.allows(f) ? "True" : "False")
              << "\n";
  }
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::PermissionDenied:
    case Errc::AuthFailed:
      return kExitDenied;
    case Errc::InvalidArgument:
      return kExitUsage;
    default:
      return kExitError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("gridfs"));
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"gridfs: desktop grid node and client"};
  app.require_subcommand(1);
  app.fallthrough();
  Common c;
  app.add_option("--config", c.config, "config file (default $GRIDFS_CONFIG or ./gridfs.conf)");
  app.add_option("--user", c.user, "account name (default $GRIDFS_USER or admin)");
  app.add_option("--psk", c.psk_hex, "hex key (default $GRIDFS_PSK or the config's credentials)");
  app.add_option("--security", c.security, "none | secure | semi")
      ->check(CLI::IsMember({"none", "nonsecure", "secure", "semi", "semisecure"}));
  app.add_option("--buffer", c.buffer, "requested buffer size in bytes")
      ->check(CLI::Range(wire::kMinBufferSize, 1u << 26));
  app.add_flag("-v,--verbose", c.verbose, "debug logging");

  std::function<int()> action;

  auto* serve = app.add_subcommand("serve", "run a node daemon");
  auto serve_port = std::make_shared<std::optional<std::uint16_t>>();
  serve->add_option_function<std::uint16_t>("--port", [serve_port](std::uint16_t p) { *serve_port = p; },
                                            "override the configured port");
  serve->callback([&] { action = [&] { return run_serve(c, *serve_port); }; });

  auto* cp = app.add_subcommand("cp", "copy a file to or from a node over parallel streams");
  std::string cp_src, cp_dst;
  unsigned cp_streams = 4;
  std::optional<std::uint64_t> cp_off, cp_len;
  bool cp_resume = false;
  std::uint32_t cp_chunk = 0;
  cp->add_option("src", cp_src, "local path or node:path")->required();
  cp->add_option("dst", cp_dst, "node:path or local path")->required();
  cp->add_option("--streams", cp_streams)->check(CLI::Range(1, 255));
  cp->add_option("--offset", cp_off);
  cp->add_option("--length", cp_len);
  cp->add_option("--chunk", cp_chunk, "chunk size (default: buffer size)");
  cp->add_flag("--resume", cp_resume, "continue from the receiver's state file");
  cp->callback([&] {
    action = [&] {
      return run_cp(c, cp_src, cp_dst, static_cast<std::uint8_t>(cp_streams), cp_off, cp_len,
                    cp_resume, cp_chunk);
    };
  });

  auto* bench = app.add_subcommand("bench", "measure push throughput");
  std::string bench_node, bench_file;
  bool bench_mem = false;
  unsigned bench_streams = 4;
  double bench_seconds = 5;
  std::uint64_t bench_block = 64ull << 20;
  bench->add_option("node", bench_node)->required();
  bench->add_flag("--mem", bench_mem, "memory to memory (no disk on either side)");
  bench->add_option("--file", bench_file, "disk to disk from this file");
  bench->add_option("--streams", bench_streams)->check(CLI::Range(1, 255));
  bench->add_option("--seconds", bench_seconds);
  bench->add_option("--block", bench_block, "bytes per transfer in --mem mode");
  bench->callback([&] {
    action = [&] {
      return run_bench(c, bench_node, bench_mem, static_cast<std::uint8_t>(bench_streams),
                       bench_seconds, bench_block, bench_file);
    };
  });

  auto* fsc = app.add_subcommand("fs", "single file operations");
  std::string fs_op, fs_node, fs_path, fs_data, fs_input, fs_output;
  std::optional<std::uint64_t> fs_off, fs_len;
  std::uint64_t fs_lock = 0;
  fsc->add_option("op", fs_op)
      ->required()
      ->check(CLI::IsMember({"read", "write", "lock", "unlock", "truncate", "stat"}));
  fsc->add_option("node", fs_node)->required();
  fsc->add_option("path", fs_path)->required();
  fsc->add_option("--offset", fs_off);
  fsc->add_option("--length", fs_len);
  fsc->add_option("--data", fs_data, "write: literal bytes");
  fsc->add_option("--input", fs_input, "write: local file (default stdin)");
  fsc->add_option("--output", fs_output, "read: local file (default stdout)");
  fsc->add_option("--lock-id", fs_lock);
  fsc->callback([&] {
    action = [&] {
      return run_fs(c, fs_op, fs_node, fs_path, fs_off, fs_len, fs_data, fs_input, fs_output,
                    fs_lock);
    };
  });

  auto* submit = app.add_subcommand("submit", "run a command on a node");
  std::string sub_node, sub_cmd, sub_out_dir{"."};
  std::vector<std::string> sub_deps, sub_outs;
  bool sub_net = false;
  std::uint32_t sub_timeout = 0;
  submit->add_option("node", sub_node)->required();
  submit->add_option("--cmd", sub_cmd)->required();
  submit->add_option("--dep", sub_deps, "local file staged next to the command");
  submit->add_option("--out", sub_outs, "output file fetched afterwards");
  submit->add_flag("--net", sub_net, "task needs network access");
  submit->add_option("--timeout-ms", sub_timeout);
  submit->add_option("--out-dir", sub_out_dir);
  submit->callback([&] {
    action = [&] {
      return run_submit(c, sub_node, sub_cmd, sub_deps, sub_outs, sub_net, sub_timeout,
                        sub_out_dir);
    };
  });

  auto* pi = app.add_subcommand("pi", "hex digits of pi computed across nodes");
  std::vector<std::string> pi_nodes;
  std::uint64_t pi_digits = 1024;
  pi->add_option("nodes", pi_nodes)->required();
  pi->add_option("--digits", pi_digits)->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 20));
  pi->callback([&] { action = [&] { return run_pi(c, pi_nodes, pi_digits); }; });

  auto* crypt = app.add_subcommand("crypt", "block encryption spread over worker nodes");
  std::string cr_op, cr_file, cr_cipher{"aes128"}, cr_key, cr_iv, cr_collector, cr_store, cr_out;
  std::vector<std::string> cr_workers;
  std::uint64_t cr_block = cryptengine::kDefaultBlockSize;
  crypt->add_option("op", cr_op)->required()->check(CLI::IsMember({"encrypt", "decrypt"}));
  crypt->add_option("file", cr_file, "node:path of the source (encrypt) or manifest (decrypt)")
      ->required();
  crypt->add_option("--workers", cr_workers)->delimiter(',');
  crypt->add_option("--cipher", cr_cipher)->check(CLI::IsMember({"aes128", "tdes"}));
  crypt->add_option("--key", cr_key)->required();
  crypt->add_option("--iv", cr_iv)->required();
  crypt->add_option("--block-size", cr_block)->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 34));
  crypt->add_option("--collector", cr_collector);
  crypt->add_option("--store-dir", cr_store, "directory for block files (default blocks)");
  crypt->add_option("--output", cr_out, "decrypt: local destination");
  crypt->callback([&] {
    action = [&] {
      if (cr_op == "encrypt" && cr_workers.empty()) {
        throw Error(Errc::InvalidArgument, "encrypt needs --workers");
      }
      return run_crypt(c, cr_op, cr_file, cr_workers, cr_cipher, cr_key, cr_iv, cr_block,
                       cr_collector, cr_store, cr_out);
    };
  });

  auto* account = app.add_subcommand("account", "manage accounts in the configured store");
  std::string ac_op, ac_user, ac_flag, ac_value, ac_psk;
  bool ac_admin = false;
  account->add_option("op", ac_op)->required()->check(CLI::IsMember({"add", "show", "set-perm"}));
  account->add_option("user", ac_user)->required();
  account->add_option("flag", ac_flag);
  account->add_option("value", ac_value);
  account->add_flag("--admin", ac_admin, "add: Administrator account");
  account->add_option("--key", ac_psk, "add: hex key (default random)");
  account->callback([&] {
    action = [&] {
      if (ac_op == "set-perm" && (ac_flag.empty() || ac_value.empty())) {
        throw Error(Errc::InvalidArgument, "set-perm needs <flag> <true|false>");
      }
      return run_account(c, ac_op, ac_user, ac_flag, ac_value, ac_admin, ac_psk);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  if (c.verbose) spdlog::set_level(spdlog::level::debug);
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "gridfs: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "gridfs: " << e.what() << "\n";
    return kExitError;
  }
}

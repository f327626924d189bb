#include "gridfs/node/config.hpp"

#include <boost/algorithm/string.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gridfs/error.hpp"

namespace fs = std::filesystem;

namespace gridfs::node {

namespace {

template <class T>
T parse_number(const std::string& v, std::size_t line, const std::string& key, T lo, T hi) {
  unsigned long long n = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc() || p != v.data() + v.size() || n < lo || n > hi) {
    throw Error(Errc::MalformedConfig, "line " + std::to_string(line) + ": " + key + " = " + v);
  }
  return static_cast<T>(n);
}

}  // namespace

void NodeConfig::finalize() {
  if (storage_root.empty()) storage_root = data_dir / "storage";
  if (accounts_dir.empty()) accounts_dir = data_dir / "accounts";
  if (credentials.empty()) credentials = data_dir / "credentials";
  if (work_root.empty()) work_root = data_dir / "work";
}

NodeConfig parse_config(const std::string& text, const fs::path& base_dir,
                        std::vector<std::string>* warnings) {
  NodeConfig c;
  c.data_dir = base_dir / c.data_dir;
  auto path_of = [&](const std::string& v) { return fs::path(v).is_absolute() ? fs::path(v) : base_dir / v; };

  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    boost::trim(raw);
    if (raw.empty()) continue;
    auto eq = raw.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::MalformedConfig, "line " + std::to_string(line) + ": expected key = value");
    }
    std::string key = boost::trim_copy(raw.substr(0, eq));
    std::string val = boost::trim_copy(raw.substr(eq + 1));
    auto bad = [&] {
      return Error(Errc::MalformedConfig, "line " + std::to_string(line) + ": " + key + " = " + val);
    };
    if (key == "host") {
      if (val.empty()) throw bad();
      c.host = val;
    } else if (key == "port") {
      c.port = parse_number<std::uint16_t>(val, line, key, 0, 65535);
    } else if (key == "data_dir") {
      c.data_dir = path_of(val);
    } else if (key == "storage_root") {
      c.storage_root = path_of(val);
    } else if (key == "accounts_dir") {
      c.accounts_dir = path_of(val);
    } else if (key == "credentials") {
      c.credentials = path_of(val);
    } else if (key == "work_root") {
      c.work_root = path_of(val);
    } else if (key == "port_file") {
      c.port_file = path_of(val);
    } else if (key == "buffer_cap") {
      c.buffer_cap = parse_number<std::uint32_t>(val, line, key, wire::kMinBufferSize, 1u << 26);
    } else if (key == "streams_cap") {
      c.streams_cap = parse_number<std::uint8_t>(val, line, key, 1, 255);
    } else if (key == "max_sessions") {
      c.max_sessions = parse_number<std::uint32_t>(val, line, key, 1, 1u << 16);
    } else if (key == "task_workers") {
      c.task_workers = parse_number<unsigned>(val, line, key, 0, 4096);
    } else if (key == "retention") {
      c.retention = std::chrono::seconds(parse_number<std::uint32_t>(val, line, key, 0, 1u << 30));
    } else if (key == "log_level") {
      static const std::set<std::string> levels{"trace", "debug", "info", "warn", "error", "off"};
      if (!levels.count(val)) throw bad();
      c.log_level = val;
    } else if (key == "modes") {
      c.modes.clear();
      if (boost::iequals(val, "all")) {
        c.modes = NodeConfig{}.modes;
        continue;
      }
      std::vector<std::string> parts;
      boost::split(parts, val, boost::is_any_of(","));
      for (auto& p : parts) {
        boost::trim(p);
        try {
          c.modes.insert(wire::parse_mode(p));
        } catch (const Error&) {
          throw bad();
        }
      }
    } else if (warnings) {
      warnings->push_back("line " + std::to_string(line) + ": unknown key " + key);
    }
  }
  c.finalize();
  return c;
}

NodeConfig load_config(const fs::path& path, std::vector<std::string>* warnings) {
  fs::path base = path.has_parent_path() ? path.parent_path() : fs::current_path();
  std::ifstream in(path);
  if (!in) return parse_config("", base, warnings);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base, warnings);
}

}  // namespace gridfs::node

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "gridfs/wire/session.hpp"

namespace gridfs::node {

// `key = value` lines, '#' starts a comment. Relative paths are taken
// relative to the directory holding the config file.
//
//   host          listen address                 127.0.0.1
//   port          listen port (0: ephemeral)     2525
//   data_dir      base for the four paths below  ./gridfs-data
//   storage_root  per-account sandboxes          <data_dir>/storage
//   accounts_dir  <user>.xml permission files    <data_dir>/accounts
//   credentials   username:hex(psk) lines        <data_dir>/credentials
//   work_root     task set directories           <data_dir>/work
//   buffer_cap    handshake buffer ceiling       262144
//   streams_cap   parallel stream ceiling        16
//   modes         comma list or "all"            all
//   max_sessions  concurrent connections         128
//   task_workers  tasks run at once per set      0 (CPU count)
//   retention     seconds results stay around    600
//   log_level     trace|debug|info|warn|error    info
//   port_file     write the bound port here      (unset)
struct NodeConfig {
  std::string host{"127.0.0.1"};
  std::uint16_t port{2525};
  std::filesystem::path data_dir{"gridfs-data"};
  std::filesystem::path storage_root;
  std::filesystem::path accounts_dir;
  std::filesystem::path credentials;
  std::filesystem::path work_root;
  std::uint32_t buffer_cap{wire::kDefaultBufferSize};
  std::uint8_t streams_cap{16};
  std::set<wire::Mode> modes{wire::Mode::FtsmPush, wire::Mode::FtsmPull, wire::Mode::Dfsm,
                             wire::Mode::Task, wire::Mode::Crypt};
  std::uint32_t max_sessions{128};
  unsigned task_workers{0};
  std::chrono::seconds retention{600};
  std::string log_level{"info"};
  std::filesystem::path port_file;

  // Fills unset paths from data_dir.
  void finalize();
};

// A missing file yields the defaults. Throws MalformedConfig naming the line.
// Unknown keys are reported through `warnings`.
NodeConfig load_config(const std::filesystem::path& path,
                       std::vector<std::string>* warnings = nullptr);
NodeConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                        std::vector<std::string>* warnings = nullptr);

}  // namespace gridfs::node

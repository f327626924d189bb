#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace gridfs::taskexec {

struct ProcessOutcome {
  int exit_code{0};  // 128 + signal when killed by a signal
  bool timed_out{false};
  std::string out;
  std::string err;
};

// Runs command (PATH lookup unless it contains '/', then relative to workdir)
// with workdir as its current directory in its own process group. The group
// is killed at the timeout (zero disables it). Captured output is capped at
// kCaptureLimit bytes per stream. Throws LaunchFailed when the executable
// cannot be started.
ProcessOutcome run_process(const std::string& command, const std::vector<std::string>& args,
                           const std::filesystem::path& workdir,
                           std::chrono::milliseconds timeout);

inline constexpr std::size_t kCaptureLimit = 1u << 20;

// Shell-style word splitting without expansion, for `--cmd "..."`. Quotes
// are ' and ", escapes \\ \" \' and \n. Throws InvalidArgument otherwise.
std::vector<std::string> split_command(const std::string& line);

}  // namespace gridfs::taskexec

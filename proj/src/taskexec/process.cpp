#include "gridfs/taskexec/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <boost/tokenizer.hpp>
#include <cerrno>
#include <cstring>

#include "gridfs/error.hpp"

extern char** environ;

namespace gridfs::taskexec {

namespace {

struct Pipe {
  int rd{-1};
  int wr{-1};
  Pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(Errc::LaunchFailed, "pipe failed");
    rd = fds[0];
    wr = fds[1];
  }
  ~Pipe() {
    if (rd >= 0) ::close(rd);
    if (wr >= 0) ::close(wr);
  }
  void close_wr() {
    if (wr >= 0) ::close(wr);
    wr = -1;
  }
};

struct FileActions {
  posix_spawn_file_actions_t fa;
  FileActions() { posix_spawn_file_actions_init(&fa); }
  ~FileActions() { posix_spawn_file_actions_destroy(&fa); }
};

struct Attr {
  posix_spawnattr_t attr;
  Attr() { posix_spawnattr_init(&attr); }
  ~Attr() { posix_spawnattr_destroy(&attr); }
};

}  // namespace

ProcessOutcome run_process(const std::string& command, const std::vector<std::string>& args,
                           const std::filesystem::path& workdir,
                           std::chrono::milliseconds timeout) {
  if (command.empty()) throw Error(Errc::LaunchFailed, "empty command");
  std::string exe = command;
  if (command.find('/') != std::string::npos && command.front() != '/') {
    exe = (workdir / command).string();
  }

  Pipe out, err;
  int devnull = ::open("/dev/null", O_RDONLY | O_CLOEXEC);
  FileActions fa;
  posix_spawn_file_actions_addchdir_np(&fa.fa, workdir.c_str());
  if (devnull >= 0) posix_spawn_file_actions_adddup2(&fa.fa, devnull, 0);
  posix_spawn_file_actions_adddup2(&fa.fa, out.wr, 1);
  posix_spawn_file_actions_adddup2(&fa.fa, err.wr, 2);
  Attr attr;
  posix_spawnattr_setflags(&attr.attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGMASK |
                                           POSIX_SPAWN_SETSIGDEF);
  posix_spawnattr_setpgroup(&attr.attr, 0);
  sigset_t none, all;
  sigemptyset(&none);
  sigfillset(&all);
  posix_spawnattr_setsigmask(&attr.attr, &none);
  posix_spawnattr_setsigdefault(&attr.attr, &all);

  std::vector<std::string> argv_store;
  argv_store.push_back(command);
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t pid = 0;
  int rc = posix_spawnp(&pid, exe.c_str(), &fa.fa, &attr.attr, argv.data(), environ);
  if (devnull >= 0) ::close(devnull);
  if (rc != 0) throw Error(Errc::LaunchFailed, command + ": " + std::strerror(rc));
  out.close_wr();
  err.close_wr();

  ProcessOutcome result;
  auto deadline = std::chrono::steady_clock::now() + timeout;
  bool killed = false;
  std::array<pollfd, 2> pfd{pollfd{out.rd, POLLIN, 0}, pollfd{err.rd, POLLIN, 0}};
  std::array<std::string*, 2> sink{&result.out, &result.err};
  char buf[65536];
  while (pfd[0].fd >= 0 || pfd[1].fd >= 0) {
    int wait_ms = -1;
    if (timeout.count() > 0 && !killed) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      wait_ms = static_cast<int>(std::max<long long>(left.count(), 0));
    }
    int n = ::poll(pfd.data(), pfd.size(), wait_ms);
    if (n < 0 && errno == EINTR) continue;
    if (n == 0) {
      ::kill(-pid, SIGKILL);
      killed = true;
      result.timed_out = true;
      continue;
    }
    for (std::size_t i = 0; i < pfd.size(); ++i) {
      if (pfd[i].fd < 0 || !(pfd[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      ssize_t got = ::read(pfd[i].fd, buf, sizeof buf);
      if (got <= 0) {
        if (got < 0 && errno == EINTR) continue;
        pfd[i].fd = -1;
        continue;
      }
      auto room = kCaptureLimit - std::min(kCaptureLimit, sink[i]->size());
      sink[i]->append(buf, std::min<std::size_t>(room, static_cast<std::size_t>(got)));
    }
  }

  // The pipes may close before the process exits.
  int status = 0;
  for (;;) {
    pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid || (r < 0 && errno != EINTR)) break;
    if (r == 0 && timeout.count() > 0 && !killed && std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      killed = true;
      result.timed_out = true;
    }
    if (r == 0) ::usleep(2000);
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

std::vector<std::string> split_command(const std::string& line) {
  boost::escaped_list_separator<char> sep("\\", " \t", "\"'");
  boost::tokenizer<boost::escaped_list_separator<char>> tok(line, sep);
  std::vector<std::string> out;
  try {
    for (const auto& t : tok) {
      if (!t.empty()) out.push_back(t);
    }
  } catch (const boost::escaped_list_error& e) {
    throw Error(Errc::InvalidArgument, std::string("command line: ") + e.what());
  }
  return out;
}

}  // namespace gridfs::taskexec

#include "cepless/process.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <thread>

extern char** environ;

namespace cepless {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kStderrTail = 4096;

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return 255;
}

class PosixProcess final : public ProcessHandle {
 public:
  PosixProcess(pid_t pid, fs::path log) : pid_(pid), log_(std::move(log)) {}

  ~PosixProcess() override {
    if (!status_) {
      PosixProcess::kill();
    }
  }

  pid_t pid() const override { return pid_; }

  std::optional<int> exit_status() override {
    std::lock_guard lock(mutex_);
    if (!status_) {
      int status = 0;
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        status_ = decode_status(status);
      } else if (r < 0 && errno == ECHILD) {
        status_ = 255;  // reaped elsewhere
      }
    }
    return status_;
  }

  std::optional<int> wait_for(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto pause = std::chrono::microseconds(200);
    while (true) {
      if (auto s = exit_status()) return s;
      if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
      std::this_thread::sleep_for(pause);
      pause = std::min(pause * 2, std::chrono::microseconds(5000));
    }
  }

  void terminate() override {
    if (!exit_status()) ::kill(pid_, SIGTERM);
  }

  void kill() override {
    if (exit_status()) return;
    ::kill(pid_, SIGKILL);
    std::lock_guard lock(mutex_);
    int status = 0;
    if (::waitpid(pid_, &status, 0) == pid_) {
      status_ = decode_status(status);
    } else {
      status_ = 128 + SIGKILL;
    }
  }

  std::string stderr_tail() const override {
    std::ifstream in(log_, std::ios::binary | std::ios::ate);
    if (!in) return {};
    const auto size = static_cast<std::size_t>(in.tellg());
    const std::size_t n = std::min(size, kStderrTail);
    std::string out(n, '\0');
    in.seekg(static_cast<std::streamoff>(size - n));
    in.read(out.data(), static_cast<std::streamsize>(n));
    return out;
  }

 private:
  pid_t pid_;
  fs::path log_;
  mutable std::mutex mutex_;
  std::optional<int> status_;
};

}  // namespace

std::vector<std::string> resolve_command(const OperatorDescriptor& descriptor,
                                         const fs::path& package_dir) {
  static constexpr std::string_view kToken = "{package}";
  std::vector<std::string> argv;
  for (std::string arg : descriptor.command) {
    for (auto pos = arg.find(kToken); pos != std::string::npos; pos = arg.find(kToken, pos)) {
      arg.replace(pos, kToken.size(), package_dir.string());
      pos += package_dir.string().size();
    }
    argv.push_back(std::move(arg));
  }
  return argv;
}

PosixProcessBackend::PosixProcessBackend(fs::path log_dir) : log_dir_(std::move(log_dir)) {
  fs::create_directories(log_dir_);
}

std::unique_ptr<ProcessHandle> PosixProcessBackend::start(
    const FetchedOperator& op, const std::map<std::string, std::string>& env) {
  const auto argv_strings = resolve_command(op.descriptor, op.package_dir);
  if (argv_strings.empty()) throw SpawnError("empty command");

  std::map<std::string, std::string> merged;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string_view::npos) {
      merged[std::string(entry.substr(0, eq))] = std::string(entry.substr(eq + 1));
    }
  }
  for (const auto& [k, v] : env) merged[k] = v;
  std::vector<std::string> env_strings;
  for (const auto& [k, v] : merged) env_strings.push_back(k + "=" + v);

  std::vector<char*> argv;
  for (const auto& a : argv_strings) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  std::vector<char*> envp;
  for (const auto& e : env_strings) envp.push_back(const_cast<char*>(e.c_str()));
  envp.push_back(nullptr);

  const fs::path log =
      log_dir_ / (op.descriptor.name + "-" + std::to_string(::getpid()) + "-" +
                  std::to_string(++counter_) + ".log");

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, 2, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, 2, 1);

  // Default signal dispositions and mask for the child.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t all, none;
  sigfillset(&all);
  sigemptyset(&none);
  posix_spawnattr_setsigdefault(&attr, &all);
  posix_spawnattr_setsigmask(&attr, &none);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGDEF | POSIX_SPAWN_SETSIGMASK);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, argv[0], &actions, &attr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    throw SpawnError("cannot start " + argv_strings[0] + ": " + std::strerror(rc));
  }
  return std::make_unique<PosixProcess>(pid, log);
}

}  // namespace cepless

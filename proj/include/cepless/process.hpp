#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cepless/registry.hpp"

namespace cepless {

class SpawnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A launched worker. exit_status() follows the shell convention: the exit
/// code for a normal exit, 128 + signal number for a signalled one.
class ProcessHandle {
 public:
  virtual ~ProcessHandle() = default;

  virtual pid_t pid() const = 0;
  /// Non-blocking; reaps the child once it has exited.
  virtual std::optional<int> exit_status() = 0;
  /// Blocks up to `timeout` for exit.
  virtual std::optional<int> wait_for(std::chrono::milliseconds timeout) = 0;
  virtual void terminate() = 0;  // SIGTERM
  virtual void kill() = 0;       // SIGKILL, then reap
  /// Captured stderr (last few KiB).
  virtual std::string stderr_tail() const = 0;

  bool running() { return !exit_status().has_value(); }
};

/// Starts operator packages. The one method a container runtime would
/// have to provide as well.
class ProcessBackend {
 public:
  virtual ~ProcessBackend() = default;
  virtual std::unique_ptr<ProcessHandle> start(const FetchedOperator& op,
                                               const std::map<std::string, std::string>& env) = 0;
};

/// Replaces every "{package}" in the descriptor command with `package_dir`.
std::vector<std::string> resolve_command(const OperatorDescriptor& descriptor,
                                         const std::filesystem::path& package_dir);

/// posix_spawn with the parent environment plus `env`; the child's stdout
/// and stderr go to a log file under `log_dir`.
class PosixProcessBackend final : public ProcessBackend {
 public:
  explicit PosixProcessBackend(std::filesystem::path log_dir);

  std::unique_ptr<ProcessHandle> start(const FetchedOperator& op,
                                       const std::map<std::string, std::string>& env) override;

  const std::filesystem::path& log_dir() const { return log_dir_; }

 private:
  std::filesystem::path log_dir_;
  unsigned counter_ = 0;
};

}  // namespace cepless

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cepless {

inline constexpr const char* kRegistryEnv = "CEPLESS_REGISTRY";

class RegistryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NotFound : public RegistryError {
 public:
  using RegistryError::RegistryError;
};
class ConflictError : public RegistryError {
 public:
  using RegistryError::RegistryError;
};
class CorruptPackage : public RegistryError {
 public:
  using RegistryError::RegistryError;
};

/// A deployable operator. `command` is the worker argv; the token
/// "{package}" in any argument is replaced by the fetched package directory.
struct OperatorDescriptor {
  std::string name;
  std::string version;
  std::string runtime = "process";
  std::vector<std::string> command;
  std::string checksum;        // sha256 of the package contents, hex
  std::int64_t created_at = 0;  // epoch microseconds

  nlohmann::json to_json() const;
  static OperatorDescriptor from_json(const nlohmann::json& doc);

  /// Equality ignoring created_at.
  bool same_content(const OperatorDescriptor& other) const;
};

struct FetchedOperator {
  OperatorDescriptor descriptor;
  std::filesystem::path package_dir;
};

/// SHA-256 over the sorted relative paths and contents of every regular
/// file below `dir`.
std::string package_checksum(const std::filesystem::path& dir);

/// Orders versions numerically per dot/dash separated component.
int compare_versions(const std::string& a, const std::string& b);

/// Directory-backed operator registry:
///   <root>/<name>/<version>/manifest.json
///   <root>/<name>/<version>/package/...
/// All state lives in the tree; publishes are serialised by <root>/.lock.
class Registry {
 public:
  explicit Registry(std::filesystem::path root);

  /// Copies `package_dir` into the store and writes the manifest. Returns
  /// "<name>:<version>". Idempotent for identical contents; the same
  /// (name, version) with different contents throws ConflictError.
  std::string publish(OperatorDescriptor descriptor,
                      const std::filesystem::path& package_dir);

  /// Latest version when `version` is empty. Verifies the checksum.
  FetchedOperator fetch(const std::string& name,
                        const std::optional<std::string>& version = std::nullopt) const;

  /// Every descriptor, ordered by name then version.
  std::vector<OperatorDescriptor> list() const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::vector<OperatorDescriptor> versions_of(const std::string& name) const;

  std::filesystem::path root_;
};

bool is_valid_operator_name(const std::string& name);

}  // namespace cepless

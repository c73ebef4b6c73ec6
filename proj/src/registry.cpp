#include "cepless/registry.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include "cepless/canonical.hpp"

namespace cepless {

namespace fs = std::filesystem;

namespace {

class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw RegistryError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw RegistryError("cannot lock " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

bool is_valid_version(const std::string& version) {
  if (version.empty() || version.size() > 64 || version.front() == '.') return false;
  return std::all_of(version.begin(), version.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' ||
           c == '_';
  });
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RegistryError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RegistryError("cannot write " + path.string());
  out << content;
  if (!out) throw RegistryError("short write to " + path.string());
}

std::int64_t now_micros() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::optional<OperatorDescriptor> read_manifest(const fs::path& version_dir) {
  const auto manifest = version_dir / "manifest.json";
  if (!fs::is_regular_file(manifest)) return std::nullopt;
  try {
    return OperatorDescriptor::from_json(canonical::parse(read_file(manifest)));
  } catch (const std::exception& e) {
    throw CorruptPackage("unreadable manifest " + manifest.string() + ": " + e.what());
  }
}

}  // namespace

bool is_valid_operator_name(const std::string& name) {
  if (name.empty() || name.size() > 32) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

nlohmann::json OperatorDescriptor::to_json() const {
  return nlohmann::json{{"name", name},       {"version", version},
                        {"runtime", runtime}, {"command", command},
                        {"checksum", checksum}, {"created_at", created_at}};
}

OperatorDescriptor OperatorDescriptor::from_json(const nlohmann::json& doc) {
  OperatorDescriptor d;
  d.name = doc.at("name").get<std::string>();
  d.version = doc.at("version").get<std::string>();
  d.runtime = doc.at("runtime").get<std::string>();
  d.command = doc.at("command").get<std::vector<std::string>>();
  d.checksum = doc.at("checksum").get<std::string>();
  d.created_at = doc.at("created_at").get<std::int64_t>();
  return d;
}

bool OperatorDescriptor::same_content(const OperatorDescriptor& other) const {
  return name == other.name && version == other.version && runtime == other.runtime &&
         command == other.command && checksum == other.checksum;
}

std::string package_checksum(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw RegistryError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir));
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  for (const auto& rel : files) {
    const std::string name = rel.generic_string();
    const auto size = static_cast<std::uint64_t>(fs::file_size(dir / rel));
    EVP_DigestUpdate(ctx.get(), name.data(), name.size() + 1);  // includes NUL
    std::array<unsigned char, 8> size_le{};
    for (int i = 0; i < 8; ++i) size_le[i] = static_cast<unsigned char>(size >> (8 * i));
    EVP_DigestUpdate(ctx.get(), size_le.data(), size_le.size());
    std::ifstream in(dir / rel, std::ios::binary);
    if (!in) throw RegistryError("cannot read " + (dir / rel).string());
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

int compare_versions(const std::string& a, const std::string& b) {
  auto split = [](const std::string& v) {
    std::vector<std::string> parts;
    std::string cur;
    for (const char c : v) {
      if (c == '.' || c == '-' || c == '+') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    parts.push_back(cur);
    return parts;
  };
  auto is_number = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  const auto pa = split(a);
  const auto pb = split(b);
  for (std::size_t i = 0; i < std::max(pa.size(), pb.size()); ++i) {
    if (i >= pa.size()) return -1;
    if (i >= pb.size()) return 1;
    const auto& x = pa[i];
    const auto& y = pb[i];
    if (is_number(x) && is_number(y)) {
      const auto xs = x.find_first_not_of('0');
      const auto ys = y.find_first_not_of('0');
      const std::string xn = xs == std::string::npos ? "0" : x.substr(xs);
      const std::string yn = ys == std::string::npos ? "0" : y.substr(ys);
      if (xn.size() != yn.size()) return xn.size() < yn.size() ? -1 : 1;
      if (xn != yn) return xn < yn ? -1 : 1;
    } else if (is_number(x) != is_number(y)) {
      return is_number(x) ? -1 : 1;
    } else if (x != y) {
      return x < y ? -1 : 1;
    }
  }
  return 0;
}

Registry::Registry(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

std::string Registry::publish(OperatorDescriptor descriptor, const fs::path& package_dir) {
  if (!is_valid_operator_name(descriptor.name)) {
    throw RegistryError("invalid operator name '" + descriptor.name + "'");
  }
  if (!is_valid_version(descriptor.version)) {
    throw RegistryError("invalid version '" + descriptor.version + "'");
  }
  if (descriptor.command.empty() || descriptor.command.front().empty()) {
    throw RegistryError("operator command must be non-empty");
  }
  if (descriptor.runtime != "process") {
    throw RegistryError("unsupported runtime '" + descriptor.runtime + "'");
  }
  descriptor.checksum = package_checksum(package_dir);
  const std::string tag = descriptor.name + ":" + descriptor.version;

  FileLock lock(root_ / ".lock");
  const fs::path version_dir = root_ / descriptor.name / descriptor.version;
  if (const auto existing = read_manifest(version_dir)) {
    if (existing->checksum == descriptor.checksum && existing->command == descriptor.command &&
        existing->runtime == descriptor.runtime) {
      return tag;
    }
    throw ConflictError(tag + " is already published with different contents");
  }

  descriptor.created_at = now_micros();
  std::mt19937_64 rng(std::random_device{}());
  const fs::path staging =
      root_ / descriptor.name / (".staging-" + descriptor.version + "-" + std::to_string(rng()));
  fs::create_directories(staging);
  try {
    fs::copy(package_dir, staging / "package", fs::copy_options::recursive);
    write_file(staging / "manifest.json", canonical::dump(descriptor.to_json()));
    fs::rename(staging, version_dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return tag;
}

std::vector<OperatorDescriptor> Registry::versions_of(const std::string& name) const {
  std::vector<OperatorDescriptor> out;
  const fs::path dir = root_ / name;
  if (!is_valid_operator_name(name) || !fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory() || entry.path().filename().string().starts_with(".")) continue;
    if (auto d = read_manifest(entry.path())) out.push_back(std::move(*d));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const int c = compare_versions(a.version, b.version);
    return c != 0 ? c < 0 : a.created_at < b.created_at;
  });
  return out;
}

FetchedOperator Registry::fetch(const std::string& name,
                                const std::optional<std::string>& version) const {
  const auto versions = versions_of(name);
  const OperatorDescriptor* chosen = nullptr;
  if (version) {
    for (const auto& d : versions) {
      if (d.version == *version) chosen = &d;
    }
  } else if (!versions.empty()) {
    chosen = &versions.back();
  }
  if (chosen == nullptr) {
    throw NotFound("operator " + name + (version ? ":" + *version : std::string()) +
                   " not in registry");
  }
  FetchedOperator fetched{*chosen, root_ / name / chosen->version / "package"};
  if (package_checksum(fetched.package_dir) != chosen->checksum) {
    throw CorruptPackage("checksum mismatch for " + name + ":" + chosen->version);
  }
  return fetched;
}

std::vector<OperatorDescriptor> Registry::list() const {
  std::vector<std::string> names;
  if (fs::is_directory(root_)) {
    for (const auto& entry : fs::directory_iterator(root_)) {
      if (entry.is_directory()) names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  std::vector<OperatorDescriptor> out;
  for (const auto& name : names) {
    auto versions = versions_of(name);
    out.insert(out.end(), versions.begin(), versions.end());
  }
  return out;
}

}  // namespace cepless

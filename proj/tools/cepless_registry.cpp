// Operator registry client: publish, fetch and list packages.
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "cepless/canonical.hpp"
#include "cepless/registry.hpp"

using namespace cepless;

int main(int argc, char** argv) {
  CLI::App app{"CEPless operator registry"};
  app.require_subcommand(1);
  std::string root;
  if (const char* env = std::getenv(kRegistryEnv); env != nullptr) root = env;
  app.add_option("--root", root, "registry directory ($CEPLESS_REGISTRY)");

  OperatorDescriptor descriptor;
  std::string package;
  auto* publish = app.add_subcommand("publish", "store a package directory");
  publish->add_option("--name", descriptor.name)->required();
  publish->add_option("--version", descriptor.version)->required();
  publish->add_option("--package", package, "directory to store")->required()->check(
      CLI::ExistingDirectory);
  publish->add_option("--runtime", descriptor.runtime, "worker runtime");
  publish->add_option("command", descriptor.command,
                      "worker argv; {package} expands to the fetched directory")
      ->required();

  std::string name;
  std::string version;
  auto* fetch = app.add_subcommand("fetch", "verify a package and print its location");
  fetch->add_option("name", name)->required();
  fetch->add_option("--version", version, "default: latest");

  auto* list = app.add_subcommand("list", "print every descriptor");

  CLI11_PARSE(app, argc, argv);
  if (root.empty()) {
    std::cerr << "cepless-registry: --root or $" << kRegistryEnv << " is required\n";
    return 2;
  }

  try {
    Registry registry(root);
    if (*publish) {
      std::cout << registry.publish(descriptor, package) << '\n';
    } else if (*fetch) {
      const auto fetched = registry.fetch(
          name, version.empty() ? std::nullopt : std::optional<std::string>(version));
      auto doc = fetched.descriptor.to_json();
      doc["package_dir"] = fetched.package_dir.string();
      std::cout << canonical::dump(doc) << '\n';
    } else if (*list) {
      auto doc = nlohmann::json::array();
      for (const auto& d : registry.list()) doc.push_back(d.to_json());
      std::cout << canonical::dump(doc) << '\n';
    }
  } catch (const NotFound& e) {
    std::cerr << "cepless-registry: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "cepless-registry: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

// Run manifest: config snapshot, seed, code version, input digests and
// declared outputs, written before long-running work starts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "idea/config.hpp"
#include "idea/version.hpp"

namespace idea {

inline std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot digest input file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  return fnv1a64_hex(bytes);
}

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> inputs;   // path -> digest
  std::vector<std::string> outputs;            // declared output paths

  void add_input(const std::string& path) { inputs[path] = digest_file(path); }

  void write(const std::string& path) const {
    nlohmann::json j;
    j["version"] = kVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
  }
};

}  // namespace idea

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "patchstart/desk_task.hpp"

namespace patchstart::testing {

// Fresh scratch directory under the system temp dir, removed on destruction.
struct ScratchDir {
  std::filesystem::path path;

  explicit ScratchDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("patchstart_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::filesystem::path operator/(const std::string& rel) const { return path / rel; }
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// The default desk task, written to `dir`.
inline DeskTask write_desk(const std::filesystem::path& dir, std::size_t cases, std::uint64_t seed = 1) {
  DeskTaskParams p;
  p.cases = cases;
  p.seed = seed;
  DeskTask task = make_desk_task(p);
  write_desk_task(task, dir);
  return task;
}

}  // namespace patchstart::testing

#pragma once

// Scratch directory for tests that touch the filesystem.  Each instance
// creates a unique directory under the system temp root and removes it on
// destruction.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

namespace cascade_ge::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("cascade_ge_" + tag + "_" + std::to_string(::getpid()) +
                    "_" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

  // Write literal text to a file inside the directory; returns its path.
  std::string write(const std::string& name, const std::string& text) const {
    const std::string p = file(name);
    std::ofstream out(p);
    out << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace cascade_ge::testing

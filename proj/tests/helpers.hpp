#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "bedsal/image.hpp"
#include "bedsal/rng.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("bedsal-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline bedsal::RgbImage random_rgb(bedsal::Rng& rng, int w, int h) {
  bedsal::RgbImage img(w, h, 3);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline bedsal::DepthImage random_depth(bedsal::Rng& rng, int w, int h) {
  bedsal::DepthImage img(w, h);
  for (auto& v : img.data()) v = rng.uniform(0.0, 255.0);
  return img;
}

}  // namespace testing

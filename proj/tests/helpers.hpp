#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>

#include "novsal/image.hpp"
#include "novsal/rng.hpp"

namespace testutil {

inline novsal::ImageBuf random_image(std::size_t h, std::size_t w, std::uint64_t seed, double lo = 0.0,
                                     double hi = 1.0) {
  novsal::Rng rng(seed);
  novsal::ImageBuf img(h, w);
  for (std::size_t k = 0; k < img.size(); ++k) img[k] = rng.uniform(lo, hi);
  return img;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("novsal_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  std::string out;
  if (!f) return out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

}  // namespace testutil

#pragma once

#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fusemetrics/error.hpp"
#include "fusemetrics/image.hpp"

namespace testing {

using fusemetrics::ErrorCode;
using fusemetrics::GrayImage;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fusemetrics_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline GrayImage from_fn(int w, int h, const std::function<double(int, int)>& f) {
  std::vector<double> d(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) d[static_cast<std::size_t>(y) * w + x] = f(x, y);
  return GrayImage(w, h, std::move(d));
}

inline GrayImage add_noise(const GrayImage& img, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> d(img.pixels().begin(), img.pixels().end());
  for (double& v : d) v = std::clamp(v + n(rng), 0.0, 1.0);
  return GrayImage(img.width(), img.height(), std::move(d));
}

/// Runs fn and checks it throws fusemetrics::Error with the given code.
template <typename Fn>
void check_error(ErrorCode code, Fn&& fn) {
  try {
    fn();
    FAIL("expected error ", fusemetrics::to_string(code));
  } catch (const fusemetrics::Error& e) {
    CHECK_MESSAGE(e.code() == code, "got ", fusemetrics::to_string(e.code()), ": ", e.what());
  }
}

}  // namespace testing

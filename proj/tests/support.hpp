#pragma once

// Small generators shared by the property tests.

#include <algorithm>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "partseg/descriptors.hpp"
#include "partseg/pointcloud.hpp"
#include "partseg/random.hpp"

namespace partseg::test {

inline PointCloud random_cloud(Rng& rng, std::size_t n, double extent = 1.0) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                          uniform(rng, -extent, extent));
  }
  return c;
}

/// Anisotropic, skewed blob: distinct principal extents and a heavy tail on
/// every axis, so the PCA frame is well defined.
inline PointCloud skewed_blob(Rng& rng, std::size_t n) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 3.0 * normal01(rng);
    const double y = 1.5 * normal01(rng);
    const double z = 0.5 * normal01(rng);
    const double t = uniform01(rng);
    // Squared terms push mass to the positive side of each axis.
    c.points.emplace_back(x + 0.8 * t * t * 6.0, y + 0.5 * x * x / 9.0, z + 0.3 * y * y);
  }
  return c;
}

inline PointDocument random_document(Rng& rng, int vocabulary, int max_words, int max_count) {
  PointDocument d;
  d.vocabulary = vocabulary;
  const int words = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_words)));
  std::vector<int> ids(static_cast<std::size_t>(vocabulary));
  for (int i = 0; i < vocabulary; ++i) ids[static_cast<std::size_t>(i)] = i;
  shuffle(std::span(ids), rng);
  ids.resize(static_cast<std::size_t>(std::min(words, vocabulary)));
  std::sort(ids.begin(), ids.end());
  for (int id : ids) {
    d.words.push_back({id, 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_count)))});
  }
  return d;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("partseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace partseg::test

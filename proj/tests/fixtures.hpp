#pragma once

#include "modt/data.hpp"
#include "modt/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

namespace fixtures {

using modt::Dataset;
using modt::Rng;

inline std::filesystem::path data_dir() {
  if (const char* dir = std::getenv("MODT_DATA_DIR")) return dir;
  return MODT_SOURCE_DATA_DIR;
}

inline Dataset load(const std::string& name) {
  const auto dir = data_dir();
  return modt::one_hot_encode(
      modt::load_csv(dir / (name + ".csv"), modt::Schema::load(dir / (name + ".schema"))));
}

// Two gate regions split by the line a + b = 0. Below it the class follows
// the sign of a, above it the opposite sign.
inline Dataset diagonal(std::size_t n = 600, std::uint64_t seed = 42) {
  Rng rng(seed);
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), 2);
  d.y.resize(n);
  d.class_names = {"neg", "pos"};
  d.feature_names = {"a", "b"};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    d.X(static_cast<Eigen::Index>(i), 0) = a;
    d.X(static_cast<Eigen::Index>(i), 1) = b;
    d.y[i] = a + b < 0.0 ? (a > 0.0) : (a < 0.0);
  }
  return d;
}

// Three vertical bands over x0 in [0, 3). Each band has its own class rule:
// x1 > 0.5, then x0 > 1.5, then x1 < 0.3.
inline Dataset three_bands(std::size_t n = 300, std::uint64_t seed = 3) {
  Rng rng(seed);
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), 2);
  d.y.resize(n);
  d.class_names = {"c0", "c1"};
  d.feature_names = {"x0", "x1"};
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = rng.uniform(0.0, 3.0);
    const double x1 = rng.uniform(0.0, 1.0);
    d.X(static_cast<Eigen::Index>(i), 0) = x0;
    d.X(static_cast<Eigen::Index>(i), 1) = x1;
    if (x0 < 1.0) d.y[i] = x1 > 0.5;
    else if (x0 < 2.0) d.y[i] = x0 > 1.5;
    else d.y[i] = x1 < 0.3;
  }
  return d;
}

// Well separated spherical clusters centered on a line.
inline modt::Matrix blobs(std::size_t per_blob, std::size_t count, double spacing, std::uint64_t seed) {
  Rng rng(seed);
  modt::Matrix X(static_cast<Eigen::Index>(per_blob * count), 2);
  for (std::size_t b = 0; b < count; ++b) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      const auto r = static_cast<Eigen::Index>(b * per_blob + i);
      // Sum of uniforms: a bounded bell shape.
      double u = 0.0, v = 0.0;
      for (int t = 0; t < 6; ++t) {
        u += rng.uniform(-0.5, 0.5);
        v += rng.uniform(-0.5, 0.5);
      }
      X(r, 0) = spacing * static_cast<double>(b) + u * 0.4;
      X(r, 1) = spacing * static_cast<double>(b % 2) + v * 0.4;
    }
  }
  return X;
}

// Random small classification problem with `k` classes.
inline Dataset random_dataset(Rng& rng, std::size_t n, std::size_t p, int k) {
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < p; ++f)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = std::round(rng.uniform(-5.0, 5.0) * 4.0) / 4.0;
    d.y[i] = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
  }
  for (int c = 0; c < k; ++c) {
    d.y[static_cast<std::size_t>(c) % n] = c;
    d.class_names.push_back("c" + std::to_string(c));
  }
  for (std::size_t f = 0; f < p; ++f) d.feature_names.push_back("f" + std::to_string(f));
  return d;
}

}  // namespace fixtures

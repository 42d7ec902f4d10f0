// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_GEOMETRY_HPP
#define MBSS_CORE_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "common.hpp"

namespace mbss {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
  }
};

inline Vec3 azimuth_unit(double azimuth_deg) {
  const double a = azimuth_deg * kPi / 180.0;
  return {std::cos(a), std::sin(a), 0.0};
}

inline Vec3 rotate_z(const Vec3& v, double angle_deg) {
  const double a = angle_deg * kPi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

// Microphone positions in meters, relative to the array center.
struct ArrayGeometry {
  std::vector<Vec3> mic_positions;

  std::size_t num_mics() const { return mic_positions.size(); }

  void validate() const {
    MBSS_CHECK(!mic_positions.empty(), UsageError, "array needs >= 1 mic");
    for (std::size_t i = 0; i < mic_positions.size(); ++i)
      for (std::size_t j = i + 1; j < mic_positions.size(); ++j)
        MBSS_CHECK((mic_positions[i] - mic_positions[j]).norm() > 1e-9,
                   UsageError, "mic positions must be pairwise distinct");
  }

  ArrayGeometry rotated_z(double angle_deg) const {
    ArrayGeometry g;
    g.mic_positions.reserve(mic_positions.size());
    for (const auto& p : mic_positions)
      g.mic_positions.push_back(rotate_z(p, angle_deg));
    return g;
  }

  // Center mic at index 0 plus num_ring mics on a circle of the given
  // radius, spaced uniformly starting at 0 degrees.
  static ArrayGeometry circular(double radius_m = 0.0425,
                                std::size_t num_ring = 6) {
    ArrayGeometry g;
    g.mic_positions.push_back({0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < num_ring; ++i) {
      const double a = 2.0 * kPi * i / num_ring;
      g.mic_positions.push_back({radius_m * std::cos(a),
                                 radius_m * std::sin(a), 0.0});
    }
    g.validate();
    return g;
  }
};

}  // namespace mbss

#endif  // MBSS_CORE_GEOMETRY_HPP

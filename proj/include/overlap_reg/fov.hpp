#pragma once

#include <limits>
#include <string>

#include "overlap_reg/error.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

// Sensor view frustum: radial range [psi_min, psi_max] plus horizontal and
// vertical angular extents, expressed in the sensor's own frame. The sensor
// looks along +x; psi_x is the full horizontal aperture around +x and psi_y
// the full vertical aperture around the horizontal plane.
struct SensorFov {
  double psi_min = 0.0;                                   // m, >= 0
  double psi_max = std::numeric_limits<double>::infinity();  // m, > psi_min
  double psi_x = kTwoPi;                                  // rad, (0, 2*pi]
  double psi_y = kPi;                                     // rad, (0, pi]

  static SensorFov full_sphere() { return SensorFov{}; }

  // Square aperture of `aperture_deg` degrees on both axes.
  static SensorFov symmetric_deg(double aperture_deg, double min_range, double max_range) {
    SensorFov f;
    f.psi_min = min_range;
    f.psi_max = max_range;
    f.psi_x = deg_to_rad(aperture_deg);
    f.psi_y = deg_to_rad(aperture_deg);
    return f;
  }
};

inline void validate(const SensorFov& f) {
  if (!(f.psi_min >= 0.0)) fail(ErrorCode::invalid_argument, "fov: psi_min must be >= 0");
  if (!(f.psi_max > f.psi_min)) {
    fail(ErrorCode::invalid_argument, "fov: psi_max must exceed psi_min");
  }
  if (!(f.psi_x > 0.0 && f.psi_x <= kTwoPi)) {
    fail(ErrorCode::invalid_argument, "fov: psi_x outside (0, 2*pi]");
  }
  if (!(f.psi_y > 0.0 && f.psi_y <= kPi)) {
    fail(ErrorCode::invalid_argument, "fov: psi_y outside (0, pi]");
  }
}

}  // namespace overlap_reg

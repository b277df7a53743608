#pragma once

#include "rsba/geometry.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace rsba {

struct Observation {
  std::size_t cam_id = 0;
  std::size_t point_id = 0;
  Vec2 q = Vec2::Zero();       // normalized [c, r]
  std::optional<Vec2> m;       // pixel [u, v]
};

/// Prior pixel-noise covariance (pixels^2).
struct NoisePrior {
  Mat2 Sigma = Mat2::Identity();
};

/// The optimizer state theta together with the measurements that define the cost.
struct Problem {
  std::vector<RsCamera> cameras;
  std::vector<Vec3> points;
  std::vector<Observation> observations;
  NoisePrior prior;
};

/// Builds an observation from a pixel measurement, keeping q = K^-1 m.
Observation make_observation(std::size_t cam_id, std::size_t point_id, const Vec2& m,
                             const RsCamera& cam);

}  // namespace rsba

#pragma once

#include "rsba/problem.hpp"

#include <cstdint>
#include <vector>

namespace rsba {

enum class CameraLayout {
  Sphere,  // uniform random positions on the sphere, uniform random roll about the optical axis
  Ring,    // random azimuths on the horizontal great circle, image y along world z
};

struct SceneConfig {
  std::size_t n_cameras = 5;
  double sphere_radius = 20.0;
  std::size_t n_points = 56;
  double cube_side = 10.0;
  int image_w = 1280;
  int image_h = 1080;
  double focal = 1000.0;
  double angular_speed_deg = 10.0;  // per frame
  double linear_speed = 1.0;        // scene units per frame
  double noise_sigma = 1.0;         // pixels, applied by add_noise
  std::vector<double> readout_angle_deg;  // per camera; missing entries mean 0
  CameraLayout layout = CameraLayout::Sphere;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<RsCamera> cameras;
  std::vector<Vec3> points;
  std::vector<Observation> observations;  // noiseless
};

struct Scene {
  Problem problem;  // theta at ground truth, noiseless observations
  GroundTruth truth;
};

/// Normalized-row velocity magnitudes for per-frame speeds: one frame spans
/// image_h / focal normalized rows.
double angular_speed_per_row(const SceneConfig& config);
double linear_speed_per_row(const SceneConfig& config);

/// Surface lattice of a cube centered at the origin. The 56-point default is
/// the 4x4x4 lattice; other counts are drawn uniformly on the surface.
std::vector<Vec3> cube_points(std::size_t n, double side, std::uint64_t seed);

/// Throws InvalidArgument for invalid configs and GenerationFailure when a
/// camera cannot see every point after 1000 redraws.
Scene generate_scene(const SceneConfig& config);

/// Gaussian pixel noise on m, then q is re-normalized. Observations without m
/// get their noise through q.
Problem add_noise(const Problem& problem, double sigma_px, std::uint64_t seed);

struct PerturbationMagnitudes {
  double rotation_deg = 1.0;
  double translation = 0.1;
  double velocity_fraction = 0.1;
  double point = 0.1;
};

/// Moves every camera and point by the given magnitude in a seeded random direction.
Problem perturb_initialization(const Problem& problem, const PerturbationMagnitudes& magnitudes,
                               std::uint64_t seed);

/// Exact inverse of perturb_initialization for the same magnitudes and seed.
Problem remove_perturbation(const Problem& perturbed, const PerturbationMagnitudes& magnitudes,
                            std::uint64_t seed);

/// Static scene with ring cameras (all image y axes along world z) and pixel noise.
struct DegeneracyScene {
  Problem ground_truth;  // theta at ground truth, noisy observations
  Problem collapsed;     // planar collapsed solution for the same observations
};

DegeneracyScene make_degeneracy_scene(std::size_t n_cameras, double noise_sigma,
                                      std::uint64_t seed);

/// Planar collapse of a problem whose cameras all have image y along world z:
/// points flattened onto z = 0 and per-camera velocities chosen so that every
/// point projects onto its measured row.
Problem planar_collapse(const Problem& problem);

/// theta(s) = (1 - s) a + s b on points, t0, omega and d; rotations are taken from a.
Problem interpolate(const Problem& a, const Problem& b, double s);

}  // namespace rsba

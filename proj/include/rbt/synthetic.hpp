#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbt/eval.hpp"
#include "rbt/image.hpp"
#include "rbt/ssm.hpp"

namespace rbt {

struct Photometric {
  double gain = 1.0;
  double bias = 0.0;
};

// Frame t is the source inverse-warped by trajectory[t], then g*I + b plus
// Gaussian noise. Trajectory warps act in source image coordinates.
struct SyntheticSpec {
  GrayImage source;
  CornersBox init_box;
  std::vector<WarpParams> trajectory;
  std::vector<Photometric> photometric;  // empty, or one entry per frame
  double noise_sigma = 0.0;
};

struct Sequence {
  std::vector<GrayImage> frames;
  GroundTruth gt;
};

Sequence generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Four octaves of value noise in [0, 255]; the coarsest lattice cell is
// `coarsest_cell` px and each further octave halves it. Smaller cells give
// more detail and a narrower basin of convergence.
GrayImage procedural_texture(int width, int height, std::uint64_t seed, int coarsest_cell = 48);

enum class MotionKind { Static, RandomWalk, Jump };

// Compact description of a synthetic sequence, readable from a key = value
// file (see README).
struct SyntheticScript {
  std::string texture = "procedural";  // or an image path
  int width = 320;
  int height = 240;
  std::uint64_t texture_seed = 1;
  int texture_scale = 48;  // coarsest lattice cell of the procedural texture
  int frames = 100;
  CornersBox box = CornersBox::rect(110.0, 70.0, 100.0, 100.0);
  MotionKind motion = MotionKind::RandomWalk;
  double step = 1.0;  // per-corner std-dev (random walk) or jump length in px
  double gain_min = 1.0, gain_max = 1.0;
  double bias_min = 0.0, bias_max = 0.0;
  double noise = 0.0;
};

MotionKind motion_from_string(const std::string& name);
std::string to_string(MotionKind kind);

// Homography trajectory and photometric draws for a script; `source` is the
// already-loaded texture.
SyntheticSpec make_spec(const SyntheticScript& script, GrayImage source, std::uint64_t seed);

// Random-walk corners (mean-reverting towards the init box), as a
// homography trajectory of `frames` entries starting at identity.
std::vector<WarpParams> random_walk_trajectory(const CornersBox& init, int frames, double step, std::uint64_t seed);

// Translation cycling around a square of side `jump`, so every inter-frame
// displacement has length `jump`; a small random projective wiggle of
// `wiggle` px per corner is layered on top.
std::vector<WarpParams> jump_trajectory(const CornersBox& init, int frames, double jump, double wiggle,
                                        std::uint64_t seed);

}  // namespace rbt

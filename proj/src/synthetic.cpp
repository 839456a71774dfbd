#include "rbt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "rbt/error.hpp"

namespace rbt {

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Homography warp taking `init` onto `target`.
WarpParams homography_between(const CornersBox& init, const CornersBox& target) {
  return params_from_points(SSMKind::Homography, corners_as_coords(init), corners_as_coords(target), init);
}

bool is_valid_quad(const CornersBox& box) {
  try {
    unit_square_homography(box);
    return true;
  } catch (const GeometryError&) {
    return false;
  }
}

}  // namespace

GrayImage procedural_texture(int width, int height, std::uint64_t seed, int coarsest_cell) {
  if (width < 2 || height < 2) throw InvalidInput("texture must be at least 2x2");
  if (coarsest_cell < 2) throw InvalidInput("texture cell size must be at least 2 px");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> acc(static_cast<std::size_t>(width) * height, 0.0);
  const double weights[] = {1.0, 0.7, 0.45, 0.25};
  for (int o = 0; o < 4; ++o) {
    const int c = std::max(coarsest_cell >> o, 1);
    const int gw = width / c + 2;
    const int gh = height / c + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (double& v : lattice) v = u(rng);
    for (int y = 0; y < height; ++y) {
      const double fy = static_cast<double>(y) / c;
      const int y0 = static_cast<int>(fy);
      const double ty = smoothstep(fy - y0);
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / c;
        const int x0 = static_cast<int>(fx);
        const double tx = smoothstep(fx - x0);
        auto l = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * gw + i]; };
        const double top = l(x0, y0) * (1.0 - tx) + l(x0 + 1, y0) * tx;
        const double bot = l(x0, y0 + 1) * (1.0 - tx) + l(x0 + 1, y0 + 1) * tx;
        acc[static_cast<std::size_t>(y) * width + x] += weights[o] * (top * (1.0 - ty) + bot * ty);
      }
    }
  }
  const auto [mn, mx] = std::minmax_element(acc.begin(), acc.end());
  const double lo = *mn;
  const double span = std::max(*mx - lo, 1e-12);
  for (double& v : acc) v = 255.0 * (v - lo) / span;
  return GrayImage(width, height, std::move(acc));
}

Sequence generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.source.empty()) throw InvalidInput("synthetic source image is empty");
  if (spec.trajectory.empty()) throw InvalidInput("synthetic trajectory is empty");
  if (!spec.photometric.empty() && spec.photometric.size() != spec.trajectory.size())
    throw InvalidInput("photometric perturbation must have one entry per frame");
  if (!(spec.noise_sigma >= 0.0)) throw InvalidInput("noise sigma must be non-negative");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int w = spec.source.width();
  const int h = spec.source.height();
  Sequence seq;
  for (std::size_t t = 0; t < spec.trajectory.size(); ++t) {
    const WarpParams& p = spec.trajectory[t];
    const WarpMatrix m = to_matrix(p);
    if (!m.allFinite() || std::abs(m.determinant()) < 1e-12)
      throw GeometryError("synthetic trajectory warp " + std::to_string(t) + " is degenerate");
    const CornersBox gt = params_to_corners(p, spec.init_box);
    if (!is_valid_quad(gt)) throw GeometryError("synthetic trajectory warp " + std::to_string(t) + " folds the box");
    const WarpMatrix inv = m.inverse();
    const Photometric ph = spec.photometric.empty() ? Photometric{} : spec.photometric[t];
    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Eigen::Vector3d q = inv * Eigen::Vector3d(x, y, 1.0);
        double v = sample_bilinear(spec.source, q.head<2>() / q.z());
        v = ph.gain * v + ph.bias;
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
        px[static_cast<std::size_t>(y) * w + x] = v;
      }
    }
    seq.frames.emplace_back(w, h, std::move(px));
    seq.gt.push_back(gt);
  }
  return seq;
}

MotionKind motion_from_string(const std::string& name) {
  if (name == "static") return MotionKind::Static;
  if (name == "random") return MotionKind::RandomWalk;
  if (name == "jump") return MotionKind::Jump;
  throw InvalidInput("unknown motion '" + name + "' (expected static, random or jump)");
}

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::Static: return "static";
    case MotionKind::RandomWalk: return "random";
    case MotionKind::Jump: return "jump";
  }
  return "?";
}

std::vector<WarpParams> random_walk_trajectory(const CornersBox& init, int frames, double step, std::uint64_t seed) {
  if (frames < 1) throw InvalidInput("trajectory needs at least one frame");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<WarpParams> out{identity_params(SSMKind::Homography, init)};
  CornersBox cur = init;
  for (int t = 1; t < frames; ++t) {
    CornersBox next;
    int tries = 0;
    do {
      next = cur;
      for (int c = 0; c < 4; ++c)
        for (int r = 0; r < 2; ++r) next.pts(r, c) += step * n(rng) + 0.05 * (init.pts(r, c) - cur.pts(r, c));
    } while (!is_valid_quad(next) && ++tries < 100);
    if (!is_valid_quad(next)) throw GeometryError("could not draw a valid random-walk frame");
    cur = next;
    out.push_back(homography_between(init, cur));
  }
  return out;
}

std::vector<WarpParams> jump_trajectory(const CornersBox& init, int frames, double jump, double wiggle,
                                        std::uint64_t seed) {
  if (frames < 1) throw InvalidInput("trajectory needs at least one frame");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const double cycle[4][2] = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  std::vector<WarpParams> out{identity_params(SSMKind::Homography, init)};
  for (int t = 1; t < frames; ++t) {
    CornersBox target;
    int tries = 0;
    do {
      target = init;
      for (int c = 0; c < 4; ++c) {
        target.pts(0, c) += jump * cycle[t % 4][0] + wiggle * n(rng);
        target.pts(1, c) += jump * cycle[t % 4][1] + wiggle * n(rng);
      }
    } while (!is_valid_quad(target) && ++tries < 100);
    if (!is_valid_quad(target)) throw GeometryError("could not draw a valid jump frame");
    out.push_back(homography_between(init, target));
  }
  return out;
}

SyntheticSpec make_spec(const SyntheticScript& script, GrayImage source, std::uint64_t seed) {
  if (script.frames < 2) throw InvalidInput("a synthetic sequence needs at least 2 frames");
  if (script.gain_min > script.gain_max || script.bias_min > script.bias_max)
    throw InvalidInput("photometric range has min > max");
  SyntheticSpec spec;
  spec.source = std::move(source);
  spec.init_box = script.box;
  spec.noise_sigma = script.noise;
  switch (script.motion) {
    case MotionKind::Static:
      spec.trajectory.assign(static_cast<std::size_t>(script.frames), identity_params(SSMKind::Homography, script.box));
      break;
    case MotionKind::RandomWalk:
      spec.trajectory = random_walk_trajectory(script.box, script.frames, script.step, seed);
      break;
    case MotionKind::Jump:
      spec.trajectory = jump_trajectory(script.box, script.frames, script.step, 0.5, seed);
      break;
  }
  if (script.gain_min != 1.0 || script.gain_max != 1.0 || script.bias_min != 0.0 || script.bias_max != 0.0) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> g(script.gain_min, script.gain_max);
    std::uniform_real_distribution<double> b(script.bias_min, script.bias_max);
    spec.photometric.push_back({});  // the template frame is unperturbed
    for (int t = 1; t < script.frames; ++t) {
      const double gain = g(rng);
      spec.photometric.push_back({gain, b(rng)});
    }
  }
  return spec;
}

}  // namespace rbt

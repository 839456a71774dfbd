#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rbt/error.hpp"
#include "rbt/sm.hpp"

namespace rbt {

namespace {

// Smooth then keep every second pixel; pixel (x, y) of the result sits at
// (2x, 2y) of the input.
GrayImage downsample2(const GrayImage& img) {
  if (img.width() < 4 || img.height() < 4) throw InvalidInput("image too small to downsample");
  const GrayImage s = gaussian_smooth(img);
  return GrayImage::generate((img.width() + 1) / 2, (img.height() + 1) / 2,
                             [&](int x, int y) { return s.at(2 * x, 2 * y); });
}

// Level 0 is `img` itself.
std::vector<GrayImage> image_pyramid(const GrayImage& img, int levels) {
  if (levels < 1) throw InvalidInput("pyramid needs at least one level");
  std::vector<GrayImage> out{img};
  for (int l = 1; l < levels; ++l) out.push_back(downsample2(out.back()));
  return out;
}

bool box_is_valid(const CornersBox& box) {
  if (!box.allFinite()) return false;
  try {
    unit_square_homography(box);
  } catch (const GeometryError&) {
    return false;
  }
  return true;
}

Eigen::Matrix2Xd columns(const PixelCoords& pts, const std::vector<int>& idx) {
  Eigen::Matrix2Xd out(2, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts.col(idx[i]);
  return out;
}

std::vector<int> inliers_of(const WarpParams& p, const PixelCoords& src, const PixelCoords& dst,
                            double threshold) {
  std::vector<int> in;
  const PixelCoords proj = warp_points(p, src);
  for (Eigen::Index k = 0; k < src.cols(); ++k)
    if ((proj.col(k) - dst.col(k)).norm() < threshold) in.push_back(static_cast<int>(k));
  return in;
}

}  // namespace

Eigen::VectorXd sampler_sigmas(SSMKind kind, const CornersBox& box, double corner_sigma) {
  const WarpParams id = identity_params(kind, box);
  const WarpJacobian j = warp_jacobian(id, corners_as_coords(box));
  const int s = dof(kind);
  Eigen::VectorXd sig(s);
  for (int i = 0; i < s; ++i) {
    const double rms = std::sqrt(j.col(i).squaredNorm() / 4.0);
    sig[i] = rms > 0.0 ? corner_sigma / (rms * std::sqrt(static_cast<double>(s))) : 0.0;
  }
  return sig;
}

WarpParams sample_warp(SSMKind kind, const CornersBox& box, const Eigen::VectorXd& sigmas, std::mt19937_64& rng,
                       int max_retries) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const WarpParams id = identity_params(kind, box);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    WarpParams p = id;
    for (Eigen::Index i = 0; i < sigmas.size(); ++i) p.values[i] += sigmas[i] * normal(rng);
    try {
      if (box_is_valid(params_to_corners(p, box))) return p;
    } catch (const Error&) {
    }
  }
  return id;
}

NNIndex nn_build_index(const TrackerState& state, const NNConfig& cfg, std::mt19937_64& rng) {
  if (cfg.samples < 1) throw InvalidInput("nn needs at least one sample");
  const SSMKind kind = state.params.kind;
  const Eigen::VectorXd sig = sampler_sigmas(kind, state.init_box, cfg.corner_sigma);
  NNIndex index;
  index.samples.reserve(static_cast<std::size_t>(cfg.samples));
  index.patches.reserve(static_cast<std::size_t>(cfg.samples));
  for (int i = 0; i < cfg.samples; ++i) {
    WarpParams dp = i == 0 ? identity_params(kind, state.init_box)
                           : sample_warp(kind, state.init_box, sig, rng, cfg.max_retries);
    index.patches.push_back(extract_patch(*state.template_frame, warp_points(dp, state.grid)).values);
    index.samples.push_back(std::move(dp));
  }
  return index;
}

std::size_t nn_best_match(const TrackerState& state, const NNIndex& index, const Eigen::VectorXd& patch) {
  std::size_t best = 0;
  double best_f = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < index.patches.size(); ++i) {
    const double f = similarity(state.am, index.patches[i], patch);
    if (f > best_f) {
      best_f = f;
      best = i;
    }
  }
  return best;
}

StepResult nn_track_frame(TrackerState& state, const NNIndex& index, const GrayImage& img) {
  const Eigen::VectorXd patch = extract_patch(img, warp_points(state.params, state.grid)).values;
  const std::size_t best = nn_best_match(state, index, patch);
  StepResult res{state.params, 1, false};
  try {
    set_params(state, compose(state.params, invert(index.samples[best])));
    res.params = state.params;
  } catch (const GeometryError&) {
    res.flagged = true;
  }
  return res;
}

ParticleSet pf_init(const TrackerState& state, const PFConfig& cfg) {
  if (cfg.particles < 1) throw InvalidInput("pf needs at least one particle");
  ParticleSet set;
  set.particles.assign(static_cast<std::size_t>(cfg.particles), state.params);
  set.weights = Eigen::VectorXd::Constant(cfg.particles, 1.0 / cfg.particles);
  return set;
}

WarpParams pf_estimate(const ParticleSet& set) {
  if (set.particles.empty()) throw InvalidInput("empty particle set");
  WarpParams est = set.particles.front();
  est.values.setZero();
  for (std::size_t i = 0; i < set.size(); ++i)
    est.values += set.weights[static_cast<Eigen::Index>(i)] * set.particles[i].values;
  return est;
}

double effective_sample_size(const Eigen::VectorXd& weights) { return 1.0 / weights.squaredNorm(); }

void systematic_resample(ParticleSet& set, std::mt19937_64& rng) {
  const std::size_t n = set.size();
  std::uniform_real_distribution<double> uni(0.0, 1.0 / static_cast<double>(n));
  const double start = uni(rng);
  std::vector<WarpParams> out;
  out.reserve(n);
  double cumulative = set.weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = start + static_cast<double>(i) / static_cast<double>(n);
    while (u > cumulative && j + 1 < n) cumulative += set.weights[static_cast<Eigen::Index>(++j)];
    out.push_back(set.particles[j]);
  }
  set.particles = std::move(out);
  set.weights.setConstant(1.0 / static_cast<double>(n));
}

StepResult pf_track_frame(TrackerState& state, ParticleSet& set, const GrayImage& img, const PFConfig& cfg,
                          std::mt19937_64& rng) {
  const SSMKind kind = state.params.kind;
  const Eigen::VectorXd sig = sampler_sigmas(kind, state.init_box, cfg.corner_sigma);
  const bool noisy = cfg.corner_sigma > 0.0;
  const double f_perfect = perfect_similarity(state.am, state.templ);
  const double scale = similarity_scale(state.am, state.templ);
  const std::size_t n = set.size();
  StepResult res{state.params, 1, false};

  Eigen::VectorXd logw(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = set.particles[i];
    if (noisy) {
      try {
        p = compose(p, sample_warp(kind, state.init_box, sig, rng));
      } catch (const GeometryError&) {
      }
    }
    double lw = -std::numeric_limits<double>::infinity();
    try {
      const Eigen::VectorXd patch = extract_patch(img, warp_points(p, state.grid)).values;
      const double f = similarity(state.am, state.templ, patch);
      lw = std::log(set.weights[static_cast<Eigen::Index>(i)]) + cfg.beta * (f - f_perfect) / scale;
    } catch (const GeometryError&) {
    }
    logw[static_cast<Eigen::Index>(i)] = lw;
  }

  const double m = logw.maxCoeff();
  if (!std::isfinite(m)) {
    set.weights.setConstant(1.0 / static_cast<double>(n));
    res.flagged = true;
  } else {
    set.weights = (logw.array() - m).exp().matrix();
    const double total = set.weights.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
      set.weights.setConstant(1.0 / static_cast<double>(n));
      res.flagged = true;
    } else {
      set.weights /= total;
    }
  }

  try {
    set_params(state, pf_estimate(set));
  } catch (const GeometryError&) {
    res.flagged = true;
  }
  res.params = state.params;

  if (effective_sample_size(set.weights) < cfg.resample_fraction * static_cast<double>(n))
    systematic_resample(set, rng);
  return res;
}

SubtrackerGrid ransac_init_grid(const TrackerState& state, const RansacConfig& cfg) {
  if (cfg.grid_x < 1 || cfg.grid_y < 1) throw InvalidInput("ransac grid must be at least 1x1");
  const auto& c = state.init_box.pts;
  const double width = 0.5 * ((c.col(1) - c.col(0)).norm() + (c.col(2) - c.col(3)).norm());
  const double height = 0.5 * ((c.col(3) - c.col(0)).norm() + (c.col(2) - c.col(1)).norm());
  const double cell = 0.5 * (width / cfg.grid_x + height / cfg.grid_y);
  const double side = std::max(cfg.sub_patch_cells * cell, 2.0);
  const Eigen::Matrix3d to_box = unit_square_homography(state.init_box);
  if (cfg.sub_levels < 1) throw InvalidInput("ransac subtrackers need at least one pyramid level");
  std::vector<std::shared_ptr<const GrayImage>> pyramid;
  for (auto& level : image_pyramid(*state.template_frame, cfg.sub_levels))
    pyramid.push_back(std::make_shared<const GrayImage>(std::move(level)));

  SubtrackerGrid grid;
  grid.trackers.reserve(static_cast<std::size_t>(cfg.grid_x * cfg.grid_y));
  for (int j = 0; j < cfg.grid_y; ++j)
    for (int i = 0; i < cfg.grid_x; ++i) {
      const Eigen::Vector3d q =
          to_box * Eigen::Vector3d((i + 0.5) / cfg.grid_x, (j + 0.5) / cfg.grid_y, 1.0);
      const Eigen::Vector2d center = q.head<2>() / q.z();
      SubTracker st{{}, center};
      for (int l = 0; l < cfg.sub_levels; ++l) {
        const double f = std::ldexp(1.0, -l);
        const CornersBox sub =
            CornersBox::rect(f * (center.x() - side / 2), f * (center.y() - side / 2), f * side, f * side);
        st.levels.push_back(make_state(state.am, SSMKind::Translation, pyramid[static_cast<std::size_t>(l)], sub,
                                       cfg.sub_resolution, cfg.sub_resolution, cfg.sub_gd.gradient));
      }
      grid.trackers.push_back(std::move(st));
    }
  return grid;
}

std::vector<std::vector<int>> draw_hypotheses(int n, int set_size, int count, std::mt19937_64& rng) {
  if (set_size > n) throw InvalidInput("hypothesis set larger than the population");
  std::vector<std::vector<int>> hyps;
  hyps.reserve(static_cast<std::size_t>(count));
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int h = 0; h < count; ++h) {
    std::iota(pool.begin(), pool.end(), 0);
    // partial Fisher-Yates
    for (int i = 0; i < set_size; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    hyps.emplace_back(pool.begin(), pool.begin() + set_size);
  }
  return hyps;
}

RansacFit ransac_fit(SSMKind kind, const PixelCoords& src, const PixelCoords& dst,
                     const std::vector<std::vector<int>>& hypotheses, double threshold,
                     const std::optional<CornersBox>& anchor) {
  RansacFit best;
  std::size_t best_count = 0;
  for (const auto& h : hypotheses) {
    WarpParams p;
    try {
      p = params_from_points(kind, columns(src, h), columns(dst, h), anchor);
      auto in = inliers_of(p, src, dst, threshold);
      if (in.size() > best_count) {
        best_count = in.size();
        best.params = std::move(p);
        best.inliers = std::move(in);
      }
    } catch (const Error&) {
      continue;
    }
  }
  if (best_count < static_cast<std::size_t>(minimal_points(kind))) return RansacFit{};
  try {
    best.params = params_from_points(kind, columns(src, best.inliers), columns(dst, best.inliers), anchor);
  } catch (const Error&) {
    // keep the hypothesis model
  }
  best.ok = true;
  return best;
}

StepResult ransac_track_frame(TrackerState& state, SubtrackerGrid& grid, const GrayImage& img,
                              const RansacConfig& cfg, std::mt19937_64& rng) {
  StepResult res{state.params, 0, false};
  std::vector<Eigen::Vector2d> src, dst;
  int max_iters = 0;
  const int levels = grid.trackers.empty() ? 1 : static_cast<int>(grid.trackers.front().levels.size());
  const std::vector<GrayImage> pyramid = image_pyramid(img, levels);
  for (auto& sub : grid.trackers) {
    Eigen::Vector2d shift;
    try {
      shift = warp_point(state.params, sub.reference_center) - sub.reference_center;
    } catch (const Error&) {
      continue;
    }
    if (!shift.allFinite()) continue;
    bool lost = false;
    int iters = 0;
    for (int l = levels - 1; l >= 0; --l) {
      TrackerState& ls = sub.levels[static_cast<std::size_t>(l)];
      WarpParams t = identity_params(SSMKind::Translation);
      t.values = std::ldexp(1.0, -l) * shift;
      set_params(ls, t);
      const StepResult r = gd_track_frame(ls, GDVariant::FCLK, pyramid[static_cast<std::size_t>(l)], cfg.sub_gd);
      iters += r.iterations;
      lost = r.flagged || !ls.params.values.allFinite();
      if (!lost) shift = std::ldexp(1.0, l) * ls.params.values;
    }
    max_iters = std::max(max_iters, iters);
    if (lost) continue;
    src.push_back(sub.reference_center);
    dst.push_back(sub.reference_center + shift);
  }
  res.iterations = max_iters;

  const SSMKind kind = state.params.kind;
  const int m = static_cast<int>(src.size());
  if (m < minimal_points(kind)) {
    res.flagged = true;
    return res;
  }
  PixelCoords s(2, m), d(2, m);
  for (int k = 0; k < m; ++k) {
    s.col(k) = src[static_cast<std::size_t>(k)];
    d.col(k) = dst[static_cast<std::size_t>(k)];
  }
  const auto hyps = draw_hypotheses(m, minimal_points(kind), cfg.max_hypotheses, rng);
  const RansacFit fit = ransac_fit(kind, s, d, hyps, cfg.inlier_threshold, state.init_box);
  if (!fit.ok) {
    res.flagged = true;
    return res;
  }
  try {
    set_params(state, fit.params);
  } catch (const GeometryError&) {
    res.flagged = true;
  }
  res.params = state.params;
  return res;
}

}  // namespace rbt

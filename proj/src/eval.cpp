#include "rbt/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "rbt/error.hpp"

namespace rbt {

namespace {

double corner_cost(const WarpParams& p, const CornersBox& init, const CornersBox& target) {
  return (params_to_corners(p, init).pts - target.pts).squaredNorm();
}

bool needs_projection(const EvalOptions& opts) { return opts.projection && dof(*opts.projection) < 8; }

CornersBox reference_box(const EvalOptions& opts, const CornersBox& init, const CornersBox& gt_box) {
  if (!needs_projection(opts)) return gt_box;
  return project_ground_truth({gt_box}, *opts.projection, init).boxes.front();
}

}  // namespace

double alignment_error(const CornersBox& gt, const CornersBox& tracked) {
  return std::sqrt((gt.pts - tracked.pts).colwise().squaredNorm().sum() / 4.0);
}

double success_rate(std::span<const double> errors, double tp) {
  if (errors.empty()) throw InvalidInput("success rate of an empty error list");
  if (!(tp >= 0.0)) throw InvalidInput("threshold must be non-negative");
  const auto hits = std::count_if(errors.begin(), errors.end(), [tp](double e) { return e < tp; });
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 40; ++i) t.push_back(0.5 * i);
  return t;
}

SRCurve sr_curve(std::span<const double> errors) {
  const auto t = default_thresholds();
  return sr_curve(errors, t);
}

SRCurve sr_curve(std::span<const double> errors, std::span<const double> thresholds) {
  if (thresholds.empty()) throw InvalidInput("empty threshold grid");
  SRCurve c;
  c.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) c.rates.push_back(success_rate(errors, t));
  double sum = 0.0;
  for (double r : c.rates) sum += r;
  c.auc = sum / static_cast<double>(c.rates.size());
  return c;
}

SRCurve average_sr_curves(const std::vector<SRCurve>& curves) {
  if (curves.empty()) throw InvalidInput("no curves to average");
  SRCurve out;
  out.thresholds = curves.front().thresholds;
  out.rates.assign(out.thresholds.size(), 0.0);
  for (const auto& c : curves) {
    if (c.thresholds != out.thresholds) throw InvalidInput("curves use different threshold grids");
    for (std::size_t i = 0; i < c.rates.size(); ++i) out.rates[i] += c.rates[i];
    out.auc += c.auc;
  }
  for (double& r : out.rates) r /= static_cast<double>(curves.size());
  out.auc /= static_cast<double>(curves.size());
  return out;
}

SRCurve pooled_sr_curve(const std::vector<std::vector<double>>& per_sequence_errors) {
  std::vector<double> all;
  for (const auto& e : per_sequence_errors) all.insert(all.end(), e.begin(), e.end());
  return sr_curve(all);
}

std::vector<double> pooled_errors(const std::vector<RunResult>& runs) {
  std::vector<double> all;
  for (const auto& r : runs) all.insert(all.end(), r.errors.begin(), r.errors.end());
  return all;
}

std::vector<int> multi_init_frames(int length, int runs) {
  if (length < 1) throw InvalidInput("sequence is empty");
  std::vector<int> out;
  if (length <= runs) {
    for (int f = 0; f < length; ++f) out.push_back(f);
    return out;
  }
  for (int j = 0; j < runs; ++j)
    out.push_back(static_cast<int>((static_cast<long long>(j) * (length - 1)) / runs));
  return out;
}

RunResult run_single(const TrackerFactory& factory, const std::vector<GrayImage>& frames, const GroundTruth& gt,
                     int init_frame, const EvalOptions& opts) {
  const int length = static_cast<int>(frames.size());
  if (gt.size() != frames.size()) throw InvalidInput("ground truth length differs from frame count");
  if (init_frame < 0 || init_frame >= length) throw InvalidInput("init frame out of range");
  auto tracker = factory();
  RunResult res;
  res.tracker = tracker->name();
  res.init_frame = init_frame;
  const CornersBox init = gt[static_cast<std::size_t>(init_frame)];
  tracker->initialize(frames[static_cast<std::size_t>(init_frame)], init);
  using clock = std::chrono::steady_clock;
  for (int f = init_frame + 1; f < length; ++f) {
    const auto t0 = clock::now();
    const FrameResult fr = tracker->update(frames[static_cast<std::size_t>(f)]);
    const auto t1 = clock::now();
    res.frames.push_back(f);
    res.corners.push_back(fr.corners);
    res.iterations.push_back(fr.iterations);
    res.millis.push_back(opts.timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0);
    res.errors.push_back(alignment_error(reference_box(opts, init, gt[static_cast<std::size_t>(f)]), fr.corners));
  }
  return res;
}

std::vector<RunResult> run_multi_init(const TrackerFactory& factory, const std::vector<GrayImage>& frames,
                                      const GroundTruth& gt, const EvalOptions& opts, int runs) {
  std::vector<RunResult> out;
  for (int f : multi_init_frames(static_cast<int>(frames.size()), runs))
    out.push_back(run_single(factory, frames, gt, f, opts));
  return out;
}

ReinitResult run_reinit(const TrackerFactory& factory, const std::vector<GrayImage>& frames, const GroundTruth& gt,
                        double fail_threshold, int skip, const EvalOptions& opts) {
  const int length = static_cast<int>(frames.size());
  if (gt.size() != frames.size()) throw InvalidInput("ground truth length differs from frame count");
  if (length < 1) throw InvalidInput("sequence is empty");
  auto tracker = factory();
  ReinitResult out;
  out.run.tracker = tracker->name();
  int init = 0;
  CornersBox init_box = gt.front();
  tracker->initialize(frames.front(), init_box);
  using clock = std::chrono::steady_clock;
  int f = init + 1;
  while (f < length) {
    const auto t0 = clock::now();
    const FrameResult fr = tracker->update(frames[static_cast<std::size_t>(f)]);
    const auto t1 = clock::now();
    const double e = alignment_error(reference_box(opts, init_box, gt[static_cast<std::size_t>(f)]), fr.corners);
    out.run.frames.push_back(f);
    out.run.corners.push_back(fr.corners);
    out.run.iterations.push_back(fr.iterations);
    out.run.millis.push_back(opts.timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0);
    out.run.errors.push_back(e);
    if (e > fail_threshold) {
      ++out.reinit_count;
      init = f + skip;
      if (init >= length) break;
      init_box = gt[static_cast<std::size_t>(init)];
      tracker->initialize(frames[static_cast<std::size_t>(init)], init_box);
      f = init + 1;
    } else {
      ++f;
    }
  }
  return out;
}

bool refine_corner_fit(WarpParams& p, const CornersBox& init, const CornersBox& target, int max_iters) {
  const PixelCoords pts = corners_as_coords(init);
  double cost = corner_cost(p, init, target);
  double lambda = 1e-6;
  for (int it = 0; it < max_iters; ++it) {
    const WarpJacobian j = warp_jacobian(p, pts);
    const Eigen::Matrix<double, 2, 4> diff = params_to_corners(p, init).pts - target.pts;
    const Eigen::Matrix<double, 8, 1> r = Eigen::Map<const Eigen::Matrix<double, 8, 1>>(diff.data());
    const Eigen::VectorXd g = j.transpose() * r;
    if (g.norm() < 1e-12 * (1.0 + std::sqrt(cost)) || cost < 1e-24) return true;
    const Eigen::MatrixXd h = j.transpose() * j;
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Eigen::MatrixXd damped = h;
      damped.diagonal() *= (1.0 + lambda);
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      WarpParams cand = p;
      cand.values += step;
      double c = std::numeric_limits<double>::infinity();
      try {
        c = corner_cost(cand, init, target);
      } catch (const Error&) {
      }
      if (c <= cost) {
        const bool tiny = cost - c <= 1e-15 * cost || step.norm() <= 1e-14 * (1.0 + p.values.norm());
        p = cand;
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
        if (tiny) return true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) return true;  // no descent direction left: at a minimum
  }
  return false;
}

ProjectionResult project_ground_truth(const GroundTruth& gt, SSMKind kind, const CornersBox& init) {
  ProjectionResult out;
  const PixelCoords src = corners_as_coords(init);
  for (const auto& box : gt) {
    if (!box.allFinite()) throw InvalidInput("ground truth contains non-finite corners");
    WarpParams p = params_from_points(kind, src, corners_as_coords(box), init);
    bool converged = true;
    if (kind != SSMKind::Translation && kind != SSMKind::Affine) converged = refine_corner_fit(p, init, box);
    out.boxes.push_back(params_to_corners(p, init));
    out.params.push_back(std::move(p));
    out.flagged.push_back(!converged);
  }
  return out;
}

}  // namespace rbt

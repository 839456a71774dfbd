#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbt/image.hpp"
#include "rbt/sm.hpp"
#include "rbt/ssm.hpp"

// Evaluation protocol: alignment error, success-rate curves, multi-start and
// reinitialization runs, and projection of 8-DOF ground truth onto lower-DOF
// state spaces.
//
// Alignment error E_AL is the root mean square of the four corner-to-corner
// distances between the tracked and the ground-truth box. All thresholds
// (success-rate grid, 20 px reinitialization limit) are in these units.
namespace rbt {

using GroundTruth = std::vector<CornersBox>;

struct RunResult {
  std::string tracker;
  int init_frame = 0;
  std::vector<int> frames;
  std::vector<double> errors;
  std::vector<CornersBox> corners;
  std::vector<int> iterations;
  std::vector<double> millis;

  std::size_t size() const { return errors.size(); }
};

struct SRCurve {
  std::vector<double> thresholds;
  std::vector<double> rates;
  double auc = 0.0;  // mean SR over the grid, in [0, 1]
};

double alignment_error(const CornersBox& gt, const CornersBox& tracked);

// Fraction of errors strictly below tp.
double success_rate(std::span<const double> errors, double tp);

// 0, 0.5, ..., 20
std::vector<double> default_thresholds();

SRCurve sr_curve(std::span<const double> errors);
SRCurve sr_curve(std::span<const double> errors, std::span<const double> thresholds);

// Reducers over several sequences: per-sequence average (default reporting)
// and pooling all frames into one list.
SRCurve average_sr_curves(const std::vector<SRCurve>& curves);
SRCurve pooled_sr_curve(const std::vector<std::vector<double>>& per_sequence_errors);

std::vector<double> pooled_errors(const std::vector<RunResult>& runs);

using TrackerFactory = std::function<std::unique_ptr<Tracker>()>;

struct EvalOptions {
  // When set to a kind with fewer than 8 DOF, errors are measured against
  // ground truth projected onto that kind relative to each run's init box.
  std::optional<SSMKind> projection;
  bool timing = false;
};

// Init frames floor(j (L-1) / runs) for j < runs; every frame when L <= runs.
std::vector<int> multi_init_frames(int length, int runs = 10);

// Tracks frames init+1 .. L-1 after initializing from gt[init].
RunResult run_single(const TrackerFactory& factory, const std::vector<GrayImage>& frames, const GroundTruth& gt,
                     int init_frame, const EvalOptions& opts = {});

std::vector<RunResult> run_multi_init(const TrackerFactory& factory, const std::vector<GrayImage>& frames,
                                      const GroundTruth& gt, const EvalOptions& opts = {}, int runs = 10);

struct ReinitResult {
  int reinit_count = 0;
  RunResult run;
};

// Whenever E_AL exceeds fail_threshold the tracker is re-seeded from ground
// truth `skip` frames later; skipped frames carry no error entries.
ReinitResult run_reinit(const TrackerFactory& factory, const std::vector<GrayImage>& frames, const GroundTruth& gt,
                        double fail_threshold = 20.0, int skip = 5, const EvalOptions& opts = {});

struct ProjectionResult {
  GroundTruth boxes;
  std::vector<WarpParams> params;
  std::vector<bool> flagged;  // Gauss-Newton did not converge
};

// Per frame, the kind's parameters minimizing the summed squared corner
// distance between the warped init box and the 8-DOF ground truth.
ProjectionResult project_ground_truth(const GroundTruth& gt, SSMKind kind, const CornersBox& init);

// Gauss-Newton refinement of a corner fit; returns false when not converged
// within max_iters (p then holds the best iterate).
bool refine_corner_fit(WarpParams& p, const CornersBox& init, const CornersBox& target, int max_iters = 100);

}  // namespace rbt

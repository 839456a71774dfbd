#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rbt/am.hpp"
#include "rbt/image.hpp"
#include "rbt/ssm.hpp"

// Search methods. Each is generic over the appearance model and the
// state-space model held by a TrackerState.
namespace rbt {

enum class SMKind { ICLK, FCLK, FALK, IALK, ESM, NN, PF, RANSAC, NNIC, PFFC, RKLT };

inline constexpr std::array<SMKind, 11> kAllSMKinds = {
    SMKind::ICLK, SMKind::FCLK,   SMKind::FALK, SMKind::IALK, SMKind::ESM, SMKind::NN,
    SMKind::PF,   SMKind::RANSAC, SMKind::NNIC, SMKind::PFFC, SMKind::RKLT};

std::string_view to_string(SMKind kind);
SMKind sm_from_string(std::string_view name);

enum class GDVariant { ICLK, FCLK, FALK, IALK, ESM };

std::string_view to_string(GDVariant v);

enum class HessianMode {
  Self,         // second derivative at perfect alignment
  GaussNewton,  // d2f/dI2 at the current pair; ssd only
};

struct GDConfig {
  int max_iters = 30;
  double stop_norm = 1e-4;         // L2 norm of the 8-vector of corner changes
  double max_corner_step = 50.0;   // px per iteration
  HessianMode hessian = HessianMode::Self;
  GradientConfig gradient;
};

struct NNConfig {
  int samples = 1000;
  double corner_sigma = 6.0;  // px of rms corner displacement per sample
  int max_retries = 10;
};

struct PFConfig {
  int particles = 500;
  double beta = 50.0;
  double corner_sigma = 2.0;
  double resample_fraction = 0.5;  // resample when ESS < fraction * count
};

struct RansacConfig {
  int grid_x = 10;
  int grid_y = 10;
  int sub_resolution = 25;
  int sub_levels = 3;            // coarse-to-fine pyramid levels per subtracker
  double sub_patch_cells = 2.0;  // sub-patch side in grid cells
  double inlier_threshold = 2.0;
  int max_hypotheses = 50;
  GDConfig sub_gd;
};

// Precomputed template-side quantities for the inverse variants.
struct InverseCache {
  Eigen::MatrixXd steepest;  // N x S, grad I0 * dw/dp at identity
  Eigen::MatrixXd hessian;   // S x S, ICLK self hessian
};

struct TrackerState {
  AMKind am = AMKind::SSD;
  CornersBox init_box;
  PixelCoords grid;  // template grid in the initialization frame
  Eigen::VectorXd templ;
  PatchGradient templ_gradient;  // N x 2
  WarpJacobian identity_jacobian;  // dw(x0, p)/dp at identity
  std::shared_ptr<const GrayImage> template_frame;
  WarpParams params;
  CornersBox corners;
  std::optional<InverseCache> inverse_cache;
};

TrackerState make_state(AMKind am, SSMKind ssm, std::shared_ptr<const GrayImage> frame,
                        const CornersBox& box, int res_x, int res_y,
                        const GradientConfig& grad = {});

void set_params(TrackerState& state, const WarpParams& p);

struct StepResult {
  WarpParams params;
  int iterations = 0;
  bool flagged = false;  // lost step / underflow / too few inliers
};

// Solves H dp = -J^T. H must be negative definite for a maximization step;
// otherwise its eigenvalues are reflected and floored before solving.
Eigen::VectorXd newton_step(const Eigen::RowVectorXd& jacobian, const Eigen::MatrixXd& hessian);

// Interpolates between the identity warp (alpha = 0) and dp (alpha = 1).
WarpParams scale_step(const WarpParams& dp, double alpha);

// The S x S ICLK hessian and N x S steepest-descent images, built once.
const InverseCache& inverse_cache(TrackerState& state, const GDConfig& cfg);

// Jacobian and hessian of one Newton iteration, exposed for inspection.
struct NewtonSystem {
  Eigen::RowVectorXd jacobian;
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd forward_hessian;  // ESM parts
  Eigen::MatrixXd inverse_hessian;
};
NewtonSystem assemble_newton_system(TrackerState& state, GDVariant variant, const GrayImage& img,
                                    const GDConfig& cfg);

StepResult gd_track_frame(TrackerState& state, GDVariant variant, const GrayImage& img,
                          const GDConfig& cfg = {});

// Per-parameter standard deviations giving ~corner_sigma px rms corner motion.
Eigen::VectorXd sampler_sigmas(SSMKind kind, const CornersBox& box, double corner_sigma);

// identity + sigma .* xi, redrawn while the warped box is degenerate.
WarpParams sample_warp(SSMKind kind, const CornersBox& box, const Eigen::VectorXd& sigmas,
                       std::mt19937_64& rng, int max_retries = 10);

struct NNIndex {
  std::vector<WarpParams> samples;  // samples[0] is the identity
  std::vector<Eigen::VectorXd> patches;
};

NNIndex nn_build_index(const TrackerState& state, const NNConfig& cfg, std::mt19937_64& rng);
// Index of the stored sample most similar to `patch` under the state's AM.
std::size_t nn_best_match(const TrackerState& state, const NNIndex& index, const Eigen::VectorXd& patch);
StepResult nn_track_frame(TrackerState& state, const NNIndex& index, const GrayImage& img);

struct ParticleSet {
  std::vector<WarpParams> particles;
  Eigen::VectorXd weights;

  std::size_t size() const { return particles.size(); }
};

ParticleSet pf_init(const TrackerState& state, const PFConfig& cfg);
WarpParams pf_estimate(const ParticleSet& set);
double effective_sample_size(const Eigen::VectorXd& weights);
// Systematic resampling; weights become uniform.
void systematic_resample(ParticleSet& set, std::mt19937_64& rng);
StepResult pf_track_frame(TrackerState& state, ParticleSet& set, const GrayImage& img,
                          const PFConfig& cfg, std::mt19937_64& rng);

// Translation tracker run coarse-to-fine; levels[l] works on pyramid level l
// (coordinates divided by 2^l).
struct SubTracker {
  std::vector<TrackerState> levels;
  Eigen::Vector2d reference_center;
};

struct SubtrackerGrid {
  std::vector<SubTracker> trackers;
};

SubtrackerGrid ransac_init_grid(const TrackerState& state, const RansacConfig& cfg);

struct RansacFit {
  WarpParams params;
  std::vector<int> inliers;
  bool ok = false;
};

std::vector<std::vector<int>> draw_hypotheses(int n, int set_size, int count, std::mt19937_64& rng);

RansacFit ransac_fit(SSMKind kind, const PixelCoords& src, const PixelCoords& dst,
                     const std::vector<std::vector<int>>& hypotheses, double threshold,
                     const std::optional<CornersBox>& anchor = std::nullopt);

StepResult ransac_track_frame(TrackerState& state, SubtrackerGrid& grid, const GrayImage& img,
                              const RansacConfig& cfg, std::mt19937_64& rng);

// Tracker interface used by the evaluation protocol. Frames are expected to
// be preprocessed (smoothed) by the caller.
struct FrameResult {
  CornersBox corners;
  int iterations = 0;
  bool flagged = false;
};

class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual void initialize(const GrayImage& frame, const CornersBox& box) = 0;
  virtual FrameResult update(const GrayImage& frame) = 0;
  virtual std::string name() const = 0;
};

struct TrackerConfig {
  AMKind am = AMKind::SSIM;
  SSMKind ssm = SSMKind::Homography;
  SMKind sm = SMKind::ESM;
  int res_x = 50;
  int res_y = 50;
  GDConfig gd;
  NNConfig nn;
  PFConfig pf;
  RansacConfig ransac;
  std::uint64_t seed = 0;
};

// (am, ssm, sm) registration tracker.
class RegistrationTracker final : public Tracker {
 public:
  explicit RegistrationTracker(TrackerConfig cfg);

  void initialize(const GrayImage& frame, const CornersBox& box) override;
  FrameResult update(const GrayImage& frame) override;
  std::string name() const override;

  const TrackerState& state() const { return state_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  StepResult run_stochastic(const GrayImage& frame);

  TrackerConfig cfg_;
  TrackerState state_;
  std::mt19937_64 rng_;
  std::optional<NNIndex> nn_index_;
  std::optional<ParticleSet> particles_;
  std::optional<SubtrackerGrid> subtrackers_;
  bool initialized_ = false;
};

std::unique_ptr<Tracker> make_tracker(const TrackerConfig& cfg);

}  // namespace rbt

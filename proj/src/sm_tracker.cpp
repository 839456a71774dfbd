#include <string>

#include "rbt/error.hpp"
#include "rbt/sm.hpp"

namespace rbt {

namespace {

std::optional<GDVariant> gd_variant(SMKind sm) {
  switch (sm) {
    case SMKind::ICLK: return GDVariant::ICLK;
    case SMKind::FCLK: return GDVariant::FCLK;
    case SMKind::FALK: return GDVariant::FALK;
    case SMKind::IALK: return GDVariant::IALK;
    case SMKind::ESM: return GDVariant::ESM;
    default: return std::nullopt;
  }
}

// GD stage that refines the stochastic estimate of a composite SM.
GDVariant refinement_stage(SMKind sm) { return sm == SMKind::NNIC ? GDVariant::ICLK : GDVariant::FCLK; }

bool uses_nn(SMKind sm) { return sm == SMKind::NN || sm == SMKind::NNIC; }
bool uses_pf(SMKind sm) { return sm == SMKind::PF || sm == SMKind::PFFC; }
bool uses_ransac(SMKind sm) { return sm == SMKind::RANSAC || sm == SMKind::RKLT; }
bool is_composite(SMKind sm) { return sm == SMKind::NNIC || sm == SMKind::PFFC || sm == SMKind::RKLT; }

}  // namespace

RegistrationTracker::RegistrationTracker(TrackerConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.res_x < 2 || cfg_.res_y < 2) throw InvalidInput("sampling resolution must be at least 2x2");
  if (cfg_.gd.hessian == HessianMode::GaussNewton && cfg_.am != AMKind::SSD)
    throw InvalidInput("the Gauss-Newton hessian is only offered for ssd");
}

std::string RegistrationTracker::name() const {
  return std::string(to_string(cfg_.am)) + "/" + std::string(to_string(cfg_.ssm)) + "/" +
         std::string(to_string(cfg_.sm));
}

void RegistrationTracker::initialize(const GrayImage& frame, const CornersBox& box) {
  state_ = make_state(cfg_.am, cfg_.ssm, std::make_shared<const GrayImage>(frame), box, cfg_.res_x, cfg_.res_y,
                      cfg_.gd.gradient);
  rng_.seed(cfg_.seed);
  nn_index_.reset();
  particles_.reset();
  subtrackers_.reset();
  if (uses_nn(cfg_.sm)) nn_index_ = nn_build_index(state_, cfg_.nn, rng_);
  if (uses_pf(cfg_.sm)) particles_ = pf_init(state_, cfg_.pf);
  if (uses_ransac(cfg_.sm)) subtrackers_ = ransac_init_grid(state_, cfg_.ransac);
  initialized_ = true;
}

StepResult RegistrationTracker::run_stochastic(const GrayImage& frame) {
  if (uses_nn(cfg_.sm)) return nn_track_frame(state_, *nn_index_, frame);
  if (uses_pf(cfg_.sm)) return pf_track_frame(state_, *particles_, frame, cfg_.pf, rng_);
  return ransac_track_frame(state_, *subtrackers_, frame, cfg_.ransac, rng_);
}

FrameResult RegistrationTracker::update(const GrayImage& frame) {
  if (!initialized_) throw InvalidInput("tracker used before initialize()");
  StepResult r;
  if (const auto v = gd_variant(cfg_.sm)) {
    r = gd_track_frame(state_, *v, frame, cfg_.gd);
  } else {
    r = run_stochastic(frame);
    if (is_composite(cfg_.sm)) {
      const WarpParams stochastic = state_.params;
      const StepResult refined = gd_track_frame(state_, refinement_stage(cfg_.sm), frame, cfg_.gd);
      if (refined.flagged) set_params(state_, stochastic);
      r.iterations += refined.iterations;
    }
  }
  return {state_.corners, r.iterations, r.flagged};
}

std::unique_ptr<Tracker> make_tracker(const TrackerConfig& cfg) { return std::make_unique<RegistrationTracker>(cfg); }

}  // namespace rbt

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "rbt/error.hpp"
#include "rbt/sm.hpp"
#include "rbt/synthetic.hpp"
#include "support.hpp"

using namespace rbt;
namespace rt = rbt::testing;

namespace {

const GrayImage& texture() {
  static const GrayImage img = gaussian_smooth(procedural_texture(256, 256, 3, 24));
  return img;
}

// Fine-grained texture whose gradient basin is only a few pixels wide.
const GrayImage& fine_texture() {
  static const GrayImage img = gaussian_smooth(procedural_texture(256, 256, 5, 6));
  return img;
}

const CornersBox kBox = CornersBox::rect(80, 80, 96, 96);

std::shared_ptr<const GrayImage> shared(const GrayImage& img) { return std::make_shared<const GrayImage>(img); }

Eigen::Matrix<double, 2, 4> moved_corners(const Eigen::Matrix3d& h, const CornersBox& box) {
  Eigen::Matrix<double, 2, 4> out;
  for (int k = 0; k < 4; ++k) out.col(k) = rt::apply_h(h, box.pts.col(k));
  return out;
}

const std::array<GDVariant, 5> kVariants = {GDVariant::ICLK, GDVariant::FCLK, GDVariant::FALK, GDVariant::IALK,
                                            GDVariant::ESM};

Eigen::Matrix3d random_homography(std::mt19937_64& rng, double jitter, const CornersBox& box) {
  return rt::homography_8x8(box.pts, rt::jittered_rect(box.pts(0, 0), box.pts(1, 0), box.pts(0, 1) - box.pts(0, 0),
                                                       box.pts(1, 2) - box.pts(1, 1), jitter, rng));
}

}  // namespace

TEST(NewtonStep, TrivialExamples) {
  const Eigen::VectorXd dp = newton_step(Eigen::RowVector2d(2, 4), -2.0 * Eigen::Matrix2d::Identity());
  EXPECT_NEAR(dp[0], 1.0, 1e-15);
  EXPECT_NEAR(dp[1], 2.0, 1e-15);
  EXPECT_EQ(newton_step(Eigen::RowVector3d::Zero(), -Eigen::Matrix3d::Identity()), Eigen::Vector3d::Zero());
}

TEST(NewtonStep, SolvesNegativeDefiniteSystems) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(8, 8, [&] { return std::normal_distribution<>()(rng); });
    const Eigen::MatrixXd h = -(a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(8, 8));
    const Eigen::RowVectorXd j = rt::random_vector(8, rng, -10, 10).transpose();
    const Eigen::VectorXd dp = newton_step(j, h);
    EXPECT_LT((h * dp + j.transpose()).norm(), 1e-9);
  }
}

TEST(NewtonStep, IndefiniteHessianStillAscends) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(5, 5, [&] { return std::normal_distribution<>()(rng); });
    const Eigen::MatrixXd h = a + a.transpose();
    const Eigen::RowVectorXd j = rt::random_vector(5, rng, -1, 1).transpose();
    EXPECT_GT(j * newton_step(j, h), 0.0);
  }
  EXPECT_THROW(newton_step(Eigen::RowVector2d(1, 1), Eigen::Matrix2d::Zero()), StepError);
  EXPECT_THROW(newton_step(Eigen::RowVector2d(1, 1), Eigen::Matrix3d::Identity()), InvalidInput);
}

TEST(GradientDescent, FclkSsdRecoversTranslation) {
  const GrayImage moved = rt::warp_image(texture(), rt::translation_h(3, 0));
  TrackerState s = make_state(AMKind::SSD, SSMKind::Translation, shared(texture()), kBox, 50, 50);
  const StepResult r = gd_track_frame(s, GDVariant::FCLK, moved);
  EXPECT_FALSE(r.flagged);
  EXPECT_LE(r.iterations, 30);
  EXPECT_NEAR(s.params.values[0], 3.0, 0.05);
  EXPECT_NEAR(s.params.values[1], 0.0, 0.05);
}

TEST(GradientDescent, AllVariantsRecoverWithSsimHomography) {
  const GrayImage moved = rt::warp_image(texture(), rt::translation_h(3, 0));
  const auto truth = moved_corners(rt::translation_h(3, 0), kBox);
  for (GDVariant v : kVariants) {
    TrackerState s = make_state(AMKind::SSIM, SSMKind::Homography, shared(texture()), kBox, 50, 50);
    const StepResult r = gd_track_frame(s, v, moved);
    EXPECT_FALSE(r.flagged) << to_string(v);
    EXPECT_LT(rt::rms_corner_distance(s.corners.pts, truth), 0.5) << to_string(v);
  }
}

TEST(GradientDescent, AllVariantsRecoverProjectiveMotion) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 5; ++t) {
    const Eigen::Matrix3d h = random_homography(rng, 3.0, kBox);
    const GrayImage moved = rt::warp_image(texture(), h);
    const auto truth = moved_corners(h, kBox);
    for (GDVariant v : kVariants) {
      TrackerState s = make_state(AMKind::SSIM, SSMKind::Homography, shared(texture()), kBox, 50, 50);
      gd_track_frame(s, v, moved);
      EXPECT_LT(rt::rms_corner_distance(s.corners.pts, truth), 0.5) << to_string(v) << " trial " << t;
    }
  }
}

TEST(GradientDescent, StationaryAtPerfectMatch) {
  for (AMKind am : kAllAMKinds)
    for (GDVariant v : kVariants) {
      TrackerState s = make_state(am, SSMKind::Homography, shared(texture()), kBox, 30, 30);
      const NewtonSystem sys = assemble_newton_system(s, v, texture(), GDConfig{});
      EXPECT_LT(newton_step(sys.jacobian, sys.hessian).norm(), 1e-6) << to_string(am) << " " << to_string(v);
      const StepResult r = gd_track_frame(s, v, texture());
      EXPECT_EQ(r.iterations, 1);
      EXPECT_LT((s.corners.pts - kBox.pts).norm(), GDConfig{}.stop_norm);
    }
}

TEST(GradientDescent, StationaryAwayFromIdentity) {
  // the template is sampled at the init box; track a frame where the object
  // has moved by h and start exactly there
  std::mt19937_64 rng(4);
  const Eigen::Matrix3d h = random_homography(rng, 4.0, kBox);
  const GrayImage moved = rt::warp_image(texture(), h);
  for (GDVariant v : kVariants) {
    TrackerState s = make_state(AMKind::SSIM, SSMKind::Homography, shared(texture()), kBox, 30, 30);
    set_params(s, from_matrix(SSMKind::Homography, h, kBox));
    const NewtonSystem sys = assemble_newton_system(s, v, moved, GDConfig{});
    // residual comes only from double bilinear interpolation
    EXPECT_LT(newton_step(sys.jacobian, sys.hessian).norm(), 0.05) << to_string(v);
  }
}

TEST(GradientDescent, CornerStepIsClamped) {
  const GrayImage moved = rt::warp_image(texture(), rt::translation_h(6, -4));
  GDConfig cfg;
  cfg.max_iters = 1;
  cfg.max_corner_step = 1.5;
  for (GDVariant v : kVariants) {
    TrackerState s = make_state(AMKind::SSD, SSMKind::Homography, shared(texture()), kBox, 40, 40);
    for (int i = 0; i < 15; ++i) {
      const CornersBox before = s.corners;
      gd_track_frame(s, v, moved, cfg);
      EXPECT_LE((s.corners.pts - before.pts).colwise().norm().maxCoeff(), 1.5 + 1e-9) << to_string(v);
    }
  }
}

TEST(GradientDescent, IclkCacheIsReusedBitForBit) {
  std::mt19937_64 rng(5);
  TrackerState s = make_state(AMKind::NCC, SSMKind::Homography, shared(texture()), kBox, 30, 30);
  TrackerState fresh = s;
  const InverseCache reference = inverse_cache(fresh, GDConfig{});
  for (int f = 0; f < 4; ++f) {
    gd_track_frame(s, GDVariant::ICLK, rt::warp_image(texture(), random_homography(rng, 2.0, kBox)));
    ASSERT_TRUE(s.inverse_cache.has_value());
    EXPECT_TRUE(s.inverse_cache->steepest == reference.steepest);
    EXPECT_TRUE(s.inverse_cache->hessian == reference.hessian);
  }
}

TEST(GradientDescent, EsmHessianIsForwardPlusInverse) {
  std::mt19937_64 rng(6);
  for (AMKind am : {AMKind::SSD, AMKind::SSIM, AMKind::SCV}) {
    for (int t = 0; t < 5; ++t) {
      const Eigen::Matrix3d h = random_homography(rng, 3.0, kBox);
      const GrayImage moved = rt::warp_image(texture(), h);
      TrackerState s = make_state(am, SSMKind::Homography, shared(texture()), kBox, 30, 30);
      set_params(s, from_matrix(SSMKind::Homography, random_homography(rng, 2.0, kBox), kBox));
      const NewtonSystem esm = assemble_newton_system(s, GDVariant::ESM, moved, GDConfig{});
      const NewtonSystem fc = assemble_newton_system(s, GDVariant::FCLK, moved, GDConfig{});
      const NewtonSystem ic = assemble_newton_system(s, GDVariant::ICLK, moved, GDConfig{});
      EXPECT_LT(rt::rel_err(esm.hessian, fc.hessian + ic.hessian), 1e-12);
      EXPECT_LT(rt::rel_err(esm.jacobian, fc.jacobian - ic.jacobian), 1e-12);
    }
  }
}

TEST(GradientDescent, EsmWithSsdUsesMeanOfBothGradients) {
  // at identity the classic form is J = -2 e^T (G_t + G_0) dw/dp with
  // e = It - I0, i.e. twice the residual against the averaged gradient
  const GrayImage moved = rt::warp_image(texture(), rt::translation_h(1.5, -1));
  TrackerState s = make_state(AMKind::SSD, SSMKind::Homography, shared(texture()), kBox, 30, 30);
  const NewtonSystem esm = assemble_newton_system(s, GDVariant::ESM, moved, GDConfig{});
  const Eigen::VectorXd it = extract_patch(moved, s.grid).values;
  const Eigen::VectorXd e = it - s.templ;
  const PatchGradient gt = image_gradient(moved, s.grid);
  const PatchGradient g0 = image_gradient(texture(), s.grid);
  Eigen::RowVectorXd expect = Eigen::RowVectorXd::Zero(8);
  for (Eigen::Index k = 0; k < e.size(); ++k)
    expect += -2.0 * e[k] * (gt.row(k) + g0.row(k)) * s.identity_jacobian.block(2 * k, 0, 2, 8);
  EXPECT_LT(rt::rel_err(esm.jacobian, expect), 1e-10);
}

TEST(GradientDescent, GaussNewtonMatchesSelfHessianForSsd) {
  const GrayImage moved = rt::warp_image(texture(), rt::translation_h(1, 1));
  TrackerState s = make_state(AMKind::SSD, SSMKind::Affine, shared(texture()), kBox, 30, 30);
  GDConfig gn;
  gn.hessian = HessianMode::GaussNewton;
  const NewtonSystem a = assemble_newton_system(s, GDVariant::FCLK, moved, GDConfig{});
  const NewtonSystem b = assemble_newton_system(s, GDVariant::FCLK, moved, gn);
  EXPECT_LT(rt::rel_err(a.hessian, b.hessian), 1e-12);
  TrackerConfig cfg;
  cfg.am = AMKind::NCC;
  cfg.gd.hessian = HessianMode::GaussNewton;
  EXPECT_THROW(RegistrationTracker{cfg}, InvalidInput);
}

TEST(NearestNeighbour, IndexHoldsIdentityAndFindsTemplate) {
  // integer box corners with a 3 px lattice so grid samples are pixel exact
  const CornersBox box = CornersBox::rect(60, 60, 99, 99);
  const TrackerState s = make_state(AMKind::SSD, SSMKind::Homography, shared(texture()), box, 34, 34);
  std::mt19937_64 rng(7);
  NNConfig cfg;
  cfg.samples = 300;
  const NNIndex index = nn_build_index(s, cfg, rng);
  ASSERT_EQ(index.samples.size(), 300u);
  EXPECT_TRUE(index.samples[0].values == identity_params(SSMKind::Homography, box).values);
  EXPECT_EQ(nn_best_match(s, index, s.templ), 0u);
  for (std::size_t k : {5u, 77u, 299u}) EXPECT_EQ(nn_best_match(s, index, index.patches[k]), k);
}

TEST(NearestNeighbour, SsdWinnerMatchesBruteForce) {
  const TrackerState s = make_state(AMKind::SSD, SSMKind::Similitude, shared(texture()), kBox, 20, 20);
  std::mt19937_64 rng(8);
  NNConfig cfg;
  cfg.samples = 200;
  const NNIndex index = nn_build_index(s, cfg, rng);
  for (int t = 0; t < 30; ++t) {
    const Eigen::VectorXd q = s.templ + rt::random_vector(s.templ.size(), rng, -40, 40);
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < index.patches.size(); ++i) {
      const double d = (index.patches[i] - q).squaredNorm();
      if (d < best_d) best_d = d, best = i;
    }
    EXPECT_EQ(nn_best_match(s, index, q), best);
  }
}

TEST(NearestNeighbour, TrackFrameInvertsTheWinningSample) {
  const CornersBox box = CornersBox::rect(60, 60, 99, 99);
  TrackerState s = make_state(AMKind::SSIM, SSMKind::Homography, shared(texture()), box, 34, 34);
  std::mt19937_64 rng(9);
  NNConfig cfg;
  cfg.samples = 300;
  const NNIndex index = nn_build_index(s, cfg, rng);

  TrackerState still = s;
  nn_track_frame(still, index, texture());
  EXPECT_TRUE(still.params.values == s.params.values);

  const std::size_t k = 123;
  // frame content at x equals the template frame at w_k(x)
  const GrayImage moved = rt::warp_image(texture(), to_matrix(index.samples[k]).inverse());
  nn_track_frame(s, index, moved);
  const auto expect = moved_corners(to_matrix(index.samples[k]).inverse(), box);
  EXPECT_LT(rt::rms_corner_distance(s.corners.pts, expect), 1e-6);
}

TEST(ParticleFilter, WeightedEstimate) {
  const TrackerState s = make_state(AMKind::NCC, SSMKind::Affine, shared(texture()), kBox, 20, 20);
  ParticleSet set = pf_init(s, PFConfig{});
  ASSERT_EQ(set.size(), 500u);
  ParticleSet two;
  two.particles = {s.params, s.params};
  two.particles[0].values << 1, 2, 0.01, 0, 0, -0.02;
  two.weights = Eigen::Vector2d(1, 0);
  EXPECT_TRUE(pf_estimate(two).values == two.particles[0].values);
  two.weights = Eigen::Vector2d(0.25, 0.75);
  EXPECT_LT((pf_estimate(two).values - 0.25 * two.particles[0].values - 0.75 * two.particles[1].values).norm(),
            1e-15);
}

TEST(ParticleFilter, StaticSceneWithoutNoiseStaysPut) {
  TrackerState s = make_state(AMKind::NCC, SSMKind::Homography, shared(texture()), kBox, 20, 20);
  PFConfig cfg;
  cfg.corner_sigma = 0.0;
  ParticleSet set = pf_init(s, cfg);
  std::mt19937_64 rng(10);
  const WarpParams start = s.params;
  for (int f = 0; f < 3; ++f) {
    const StepResult r = pf_track_frame(s, set, texture(), cfg, rng);
    EXPECT_FALSE(r.flagged);
    EXPECT_LT((s.params.values - start.values).norm(), 1e-12);
  }
}

TEST(ParticleFilter, WeightsStayNormalizedAndCountPreserved) {
  std::mt19937_64 rng(11);
  for (AMKind am : kAllAMKinds) {
    TrackerState s = make_state(am, SSMKind::Similitude, shared(texture()), kBox, 20, 20);
    PFConfig cfg;
    cfg.particles = 100;
    ParticleSet set = pf_init(s, cfg);
    for (int f = 1; f <= 6; ++f) {
      pf_track_frame(s, set, rt::warp_image(texture(), rt::translation_h(0.5 * f, 0.3 * f)), cfg, rng);
      EXPECT_EQ(set.size(), 100u);
      EXPECT_NEAR(set.weights.sum(), 1.0, 1e-12) << to_string(am);
    }
  }
}

TEST(ParticleFilter, SystematicResampleKeepsOnlyWeightedParticles) {
  const TrackerState s = make_state(AMKind::SSD, SSMKind::Translation, shared(texture()), kBox, 10, 10);
  ParticleSet set;
  for (int i = 0; i < 4; ++i) {
    WarpParams p = s.params;
    p.values << i, -i;
    set.particles.push_back(p);
  }
  set.weights = Eigen::Vector4d(0, 0.5, 0, 0.5);
  std::mt19937_64 rng(12);
  systematic_resample(set, rng);
  ASSERT_EQ(set.size(), 4u);
  int ones = 0, threes = 0;
  for (const auto& p : set.particles) (p.values[0] == 1.0 ? ones : threes) += 1;
  EXPECT_EQ(ones, 2);
  EXPECT_EQ(threes, 2);
  EXPECT_TRUE(set.weights.isApproxToConstant(0.25));
  EXPECT_NEAR(effective_sample_size(Eigen::Vector4d(0.25, 0.25, 0.25, 0.25)), 4.0, 1e-12);
}

TEST(ParticleFilter, TracksTranslationSequence) {
  const int frames = 51;
  std::vector<WarpParams> traj;
  std::mt19937_64 walk(13);
  std::normal_distribution<double> step(0.0, 1.0);
  Eigen::Vector2d t(0, 0);
  for (int f = 0; f < frames; ++f) {
    if (f > 0) t += Eigen::Vector2d(step(walk), step(walk));
    WarpParams p = identity_params(SSMKind::Translation);
    p.values = t;
    traj.push_back(p);
  }
  SyntheticSpec spec{texture(), kBox, traj, {}, 0.0};
  const Sequence seq = generate_synthetic(spec, 1);

  TrackerConfig cfg;
  cfg.am = AMKind::NCC;
  cfg.ssm = SSMKind::Translation;
  cfg.sm = SMKind::PF;
  cfg.seed = 42;
  RegistrationTracker tracker(cfg);
  tracker.initialize(seq.frames[0], seq.gt[0]);
  std::vector<double> err;
  for (int f = 1; f < frames; ++f)
    err.push_back(rt::rms_corner_distance(tracker.update(seq.frames[f]).corners.pts, seq.gt[f].pts));
  std::nth_element(err.begin(), err.begin() + 25, err.end());
  EXPECT_LT(err[25], 2.0);
}

TEST(Ransac, ExactCorrespondencesFitExactly) {
  std::mt19937_64 rng(14);
  const Eigen::Matrix3d h = random_homography(rng, 10.0, kBox);
  PixelCoords src(2, 100), dst(2, 100);
  std::uniform_real_distribution<double> u(80, 176);
  for (int k = 0; k < 100; ++k) {
    src.col(k) << u(rng), u(rng);
    dst.col(k) = rt::apply_h(h, src.col(k));
  }
  const auto hyps = draw_hypotheses(100, 4, 50, rng);
  const RansacFit fit = ransac_fit(SSMKind::Homography, src, dst, hyps, 2.0);
  ASSERT_TRUE(fit.ok);
  EXPECT_EQ(fit.inliers.size(), 100u);
  EXPECT_LT((warp_points(fit.params, src) - dst).colwise().norm().maxCoeff(), 1e-6);
}

TEST(Ransac, RejectsGrossOutliers) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Matrix3d h = random_homography(rng, 10.0, kBox);
    PixelCoords src(2, 100), dst(2, 100);
    std::uniform_real_distribution<double> u(80, 176), ux(0, 320), uy(0, 240);
    std::normal_distribution<double> jitter(0.0, 0.2);
    for (int k = 0; k < 100; ++k) {
      src.col(k) << u(rng), u(rng);
      dst.col(k) = rt::apply_h(h, src.col(k)) + Eigen::Vector2d(jitter(rng), jitter(rng));
    }
    for (int k = 0; k < 100; k += 10)
      for (int o : {0, 3, 7}) dst.col(k + o) << ux(rng), uy(rng);
    const RansacFit fit = ransac_fit(SSMKind::Homography, src, dst, draw_hypotheses(100, 4, 50, rng), 2.0);
    ASSERT_TRUE(fit.ok);
    for (int k = 0; k < 100; ++k) {
      if (k % 10 == 0 || k % 10 == 3 || k % 10 == 7) continue;
      EXPECT_LT((warp_point(fit.params, src.col(k)) - rt::apply_h(h, src.col(k))).norm(), 0.5);
    }
  }
}

TEST(Ransac, InvariantToCorrespondenceOrder) {
  std::mt19937_64 rng(16);
  const Eigen::Matrix3d h = random_homography(rng, 8.0, kBox);
  const int n = 60;
  PixelCoords src(2, n), dst(2, n);
  std::uniform_real_distribution<double> u(80, 176);
  for (int k = 0; k < n; ++k) {
    src.col(k) << u(rng), u(rng);
    dst.col(k) = rt::apply_h(h, src.col(k));
    if (k % 4 == 0) dst.col(k) += Eigen::Vector2d(30, -20);
  }
  const auto hyps = draw_hypotheses(n, 4, 50, rng);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> where(n);
  PixelCoords ps(2, n), pd(2, n);
  for (int i = 0; i < n; ++i) {
    ps.col(i) = src.col(perm[i]);
    pd.col(i) = dst.col(perm[i]);
    where[perm[i]] = i;
  }
  auto moved_hyps = hyps;
  for (auto& hy : moved_hyps)
    for (int& i : hy) i = where[i];
  const RansacFit a = ransac_fit(SSMKind::Homography, src, dst, hyps, 2.0);
  const RansacFit b = ransac_fit(SSMKind::Homography, ps, pd, moved_hyps, 2.0);
  ASSERT_TRUE(a.ok && b.ok);
  std::vector<int> ia = a.inliers, ib;
  for (int i : b.inliers) ib.push_back(perm[i]);
  std::sort(ib.begin(), ib.end());
  EXPECT_EQ(ia, ib);
  EXPECT_LT((warp_points(a.params, src) - warp_points(b.params, src)).norm(), 1e-9);
}

TEST(Ransac, TooFewSubtrackersFlagsFrame) {
  TrackerState s = make_state(AMKind::SSD, SSMKind::Homography, shared(texture()), kBox, 30, 30);
  RansacConfig cfg;
  cfg.grid_x = 3;
  cfg.grid_y = 1;
  SubtrackerGrid grid = ransac_init_grid(s, cfg);
  ASSERT_EQ(grid.trackers.size(), 3u);
  std::mt19937_64 rng(17);
  const WarpParams before = s.params;
  const StepResult r = ransac_track_frame(s, grid, texture(), cfg, rng);
  EXPECT_TRUE(r.flagged);
  EXPECT_TRUE(s.params.values == before.values);
  EXPECT_FALSE(ransac_fit(SSMKind::Homography, PixelCoords::Random(2, 3), PixelCoords::Random(2, 3),
                          draw_hypotheses(3, 3, 5, rng), 2.0)
                   .ok);
}

TEST(Ransac, TracksSmallMotion) {
  TrackerState s = make_state(AMKind::SSD, SSMKind::Homography, shared(texture()), kBox, 30, 30);
  RansacConfig cfg;
  SubtrackerGrid grid = ransac_init_grid(s, cfg);
  ASSERT_EQ(grid.trackers.size(), 100u);
  std::mt19937_64 rng(18);
  const Eigen::Matrix3d h = rt::translation_h(4, 2);
  ransac_track_frame(s, grid, rt::warp_image(texture(), h), cfg, rng);
  EXPECT_LT(rt::rms_corner_distance(s.corners.pts, moved_corners(h, kBox)), 0.5);
}

TEST(Composite, NoOpOnStaticScene) {
  for (SMKind sm : {SMKind::NNIC, SMKind::PFFC, SMKind::RKLT}) {
    TrackerConfig cfg;
    cfg.sm = sm;
    cfg.ssm = SSMKind::Homography;
    cfg.am = AMKind::SSIM;
    cfg.nn.samples = 200;
    cfg.pf.particles = 100;
    cfg.seed = 3;
    RegistrationTracker tracker(cfg);
    tracker.initialize(texture(), kBox);
    const FrameResult r = tracker.update(texture());
    EXPECT_FALSE(r.flagged) << to_string(sm);
    EXPECT_LT(rt::rms_corner_distance(r.corners.pts, kBox.pts), 0.05) << to_string(sm);
  }
}

TEST(Composite, NnicRecoversJumpBeyondGradientBasin) {
  const Eigen::Matrix3d h = rt::translation_h(15, 0);
  const GrayImage moved = rt::warp_image(fine_texture(), h);
  const auto truth = moved_corners(h, kBox);

  TrackerConfig cfg;
  cfg.am = AMKind::SSIM;
  cfg.ssm = SSMKind::Homography;
  cfg.sm = SMKind::FCLK;
  RegistrationTracker gd(cfg);
  gd.initialize(fine_texture(), kBox);
  ASSERT_GT(rt::rms_corner_distance(gd.update(moved).corners.pts, truth), 1.0);

  cfg.sm = SMKind::NNIC;
  cfg.nn.corner_sigma = 15.0;
  cfg.seed = 1;
  RegistrationTracker nnic(cfg);
  nnic.initialize(fine_texture(), kBox);
  EXPECT_LT(rt::rms_corner_distance(nnic.update(moved).corners.pts, truth), 1.0);
}

TEST(Composite, RkltIsRansacThenFclk) {
  std::mt19937_64 rng(19);
  const GrayImage moved = rt::warp_image(texture(), random_homography(rng, 4.0, kBox));
  TrackerConfig cfg;
  cfg.am = AMKind::NCC;
  cfg.ssm = SSMKind::Homography;
  cfg.sm = SMKind::RKLT;
  cfg.seed = 77;
  RegistrationTracker tracker(cfg);
  tracker.initialize(texture(), kBox);
  tracker.update(moved);

  TrackerState s = make_state(cfg.am, cfg.ssm, shared(texture()), kBox, cfg.res_x, cfg.res_y, cfg.gd.gradient);
  SubtrackerGrid grid = ransac_init_grid(s, cfg.ransac);
  std::mt19937_64 staged(cfg.seed);
  ransac_track_frame(s, grid, moved, cfg.ransac, staged);
  const WarpParams stochastic = s.params;
  if (gd_track_frame(s, GDVariant::FCLK, moved, cfg.gd).flagged) set_params(s, stochastic);
  EXPECT_TRUE(tracker.state().params.values == s.params.values);
}

TEST(Tracker, RejectsBadConfigAndUninitializedUse) {
  TrackerConfig cfg;
  cfg.res_x = 1;
  EXPECT_THROW(RegistrationTracker{cfg}, InvalidInput);
  cfg.res_x = 10;
  RegistrationTracker t(cfg);
  EXPECT_THROW(t.update(texture()), InvalidInput);
  EXPECT_EQ(t.name(), "ssim/homography/esm");
  EXPECT_EQ(sm_from_string("rklt"), SMKind::RKLT);
  EXPECT_THROW(sm_from_string("lk"), InvalidInput);
}

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rbt/error.hpp"
#include "rbt/sm.hpp"

namespace rbt {

namespace {

// Rows g_k * J_k where g is N x 2 and J is 2N x S.
Eigen::MatrixXd steepest_descent(const Eigen::MatrixX2d& g, const Eigen::MatrixXd& j) {
  const Eigen::Index n = g.rows();
  Eigen::MatrixXd out(n, j.cols());
  for (Eigen::Index k = 0; k < n; ++k)
    out.row(k) = g.row(k) * j.block(2 * k, 0, 2, j.cols());
  return out;
}

// Image gradient carried through dw/dx: gradient of I(w(x, p)) w.r.t. x.
Eigen::MatrixX2d chain_point_jacobian(const Eigen::MatrixX2d& g, const Eigen::MatrixX2d& dwdx) {
  Eigen::MatrixX2d out(g.rows(), 2);
  for (Eigen::Index k = 0; k < g.rows(); ++k) out.row(k) = g.row(k) * dwdx.block<2, 2>(2 * k, 0);
  return out;
}

// Warp whose parameters are identity + delta.
WarpParams offset_from_identity(const WarpParams& like, const Eigen::VectorXd& delta) {
  WarpParams id = identity_params(like.kind, like.anchor);
  id.values += delta;
  return id;
}

double max_corner_displacement(const CornersBox& a, const CornersBox& b) {
  return (a.pts - b.pts).colwise().norm().maxCoeff();
}

StructuredHessian candidate_hessian(AMKind am, const Eigen::VectorXd& i0, const Eigen::VectorXd& it,
                                    const GDConfig& cfg) {
  if (cfg.hessian == HessianMode::GaussNewton) {
    if (am != AMKind::SSD) throw InvalidInput("the Gauss-Newton hessian is only offered for ssd");
    (void)i0;
    StructuredHessian h;
    h.diag = Eigen::VectorXd::Constant(it.size(), -2.0);
    return h;
  }
  return self_hessian(am, it);
}

}  // namespace

std::string_view to_string(SMKind kind) {
  switch (kind) {
    case SMKind::ICLK: return "iclk";
    case SMKind::FCLK: return "fclk";
    case SMKind::FALK: return "falk";
    case SMKind::IALK: return "ialk";
    case SMKind::ESM: return "esm";
    case SMKind::NN: return "nn";
    case SMKind::PF: return "pf";
    case SMKind::RANSAC: return "ransac";
    case SMKind::NNIC: return "nnic";
    case SMKind::PFFC: return "pffc";
    case SMKind::RKLT: return "rklt";
  }
  return "?";
}

SMKind sm_from_string(std::string_view name) {
  for (SMKind k : kAllSMKinds)
    if (to_string(k) == name) return k;
  throw InvalidInput("unknown search method '" + std::string(name) + "'");
}

std::string_view to_string(GDVariant v) {
  switch (v) {
    case GDVariant::ICLK: return "iclk";
    case GDVariant::FCLK: return "fclk";
    case GDVariant::FALK: return "falk";
    case GDVariant::IALK: return "ialk";
    case GDVariant::ESM: return "esm";
  }
  return "?";
}

TrackerState make_state(AMKind am, SSMKind ssm, std::shared_ptr<const GrayImage> frame, const CornersBox& box,
                        int res_x, int res_y, const GradientConfig& grad) {
  if (!frame || frame->empty()) throw InvalidInput("tracker needs a non-empty initialization frame");
  TrackerState s;
  s.am = am;
  s.init_box = box;
  s.grid = sampling_grid(box, res_x, res_y);
  s.templ = extract_patch(*frame, s.grid).values;
  s.templ_gradient = image_gradient(*frame, s.grid, grad);
  s.template_frame = std::move(frame);
  s.params = identity_params(ssm, box);
  s.identity_jacobian = warp_jacobian(s.params, s.grid);
  s.corners = box;
  return s;
}

void set_params(TrackerState& state, const WarpParams& p) {
  state.corners = params_to_corners(p, state.init_box);
  state.params = p;
}

Eigen::VectorXd newton_step(const Eigen::RowVectorXd& jacobian, const Eigen::MatrixXd& hessian) {
  const Eigen::Index s = hessian.rows();
  if (hessian.cols() != s || jacobian.size() != s) throw InvalidInput("newton_step: dimension mismatch");
  if (!hessian.allFinite() || !jacobian.allFinite()) throw StepError("non-finite jacobian or hessian");
  if (jacobian.isZero(0.0)) return Eigen::VectorXd::Zero(s);

  // Jacobi scaling keeps mixed-unit parameters (pixels vs. projective
  // entries) well conditioned.
  Eigen::VectorXd d(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    const double h = std::abs(hessian(i, i));
    d[i] = h > 0.0 ? 1.0 / std::sqrt(h) : 1.0;
  }
  Eigen::MatrixXd hs = d.asDiagonal() * hessian * d.asDiagonal();
  hs = 0.5 * (hs + hs.transpose()).eval();
  const Eigen::VectorXd js = d.cwiseProduct(jacobian.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hs);
  if (eig.info() != Eigen::Success) throw StepError("eigen decomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double max_abs = lambda.cwiseAbs().maxCoeff();
  if (!(max_abs > 0.0) || !std::isfinite(max_abs)) throw StepError("singular hessian");
  const double floor = 1e-10 * max_abs;
  for (Eigen::Index i = 0; i < s; ++i) lambda[i] = -std::max(std::abs(lambda[i]), floor);

  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::VectorXd step = -(v * (v.transpose() * js).cwiseQuotient(lambda));
  const Eigen::VectorXd dp = d.cwiseProduct(step);
  if (!dp.allFinite()) throw StepError("non-finite newton step");
  return dp;
}

WarpParams scale_step(const WarpParams& dp, double alpha) {
  const WarpParams id = identity_params(dp.kind, dp.anchor);
  WarpParams out = dp;
  out.values = id.values + alpha * (dp.values - id.values);
  return out;
}

const InverseCache& inverse_cache(TrackerState& state, const GDConfig& cfg) {
  if (!state.inverse_cache) {
    InverseCache c;
    c.steepest = steepest_descent(state.templ_gradient, state.identity_jacobian);
    const StructuredHessian h = cfg.hessian == HessianMode::GaussNewton
                                    ? candidate_hessian(state.am, state.templ, state.templ, cfg)
                                    : self_hessian(state.am, state.templ);
    c.hessian = h.project(c.steepest);
    state.inverse_cache = std::move(c);
  }
  return *state.inverse_cache;
}

NewtonSystem assemble_newton_system(TrackerState& state, GDVariant variant, const GrayImage& img,
                                    const GDConfig& cfg) {
  const PixelCoords pts = warp_points(state.params, state.grid);
  const Eigen::VectorXd it = extract_patch(img, pts).values;
  const Eigen::VectorXd& i0 = state.templ;
  NewtonSystem sys;

  auto forward_steepest = [&]() {
    const Eigen::MatrixX2d g = image_gradient(img, pts, cfg.gradient);
    const Eigen::MatrixX2d warped = chain_point_jacobian(g, point_jacobian(state.params, state.grid));
    return steepest_descent(warped, state.identity_jacobian);
  };

  switch (variant) {
    case GDVariant::FCLK: {
      const Eigen::MatrixXd g = forward_steepest();
      sys.jacobian = gradient(state.am, i0, it, PatchSide::Candidate) * g;
      sys.hessian = candidate_hessian(state.am, i0, it, cfg).project(g);
      break;
    }
    case GDVariant::ICLK: {
      const InverseCache& c = inverse_cache(state, cfg);
      sys.jacobian = gradient(state.am, i0, it, PatchSide::Template) * c.steepest;
      sys.hessian = c.hessian;
      break;
    }
    case GDVariant::FALK: {
      const Eigen::MatrixX2d g = image_gradient(img, pts, cfg.gradient);
      const Eigen::MatrixXd sd = steepest_descent(g, warp_jacobian(state.params, state.grid));
      sys.jacobian = gradient(state.am, i0, it, PatchSide::Candidate) * sd;
      sys.hessian = candidate_hessian(state.am, i0, it, cfg).project(sd);
      break;
    }
    case GDVariant::IALK: {
      // Candidate-image gradient estimated from the template gradient moved
      // through the inverse point Jacobian of the current warp.
      const Eigen::MatrixX2d dwdx = point_jacobian(state.params, state.grid);
      Eigen::MatrixX2d g(state.grid.cols(), 2);
      for (Eigen::Index k = 0; k < g.rows(); ++k)
        g.row(k) = state.templ_gradient.row(k) * dwdx.block<2, 2>(2 * k, 0).inverse();
      const Eigen::MatrixXd sd = steepest_descent(g, warp_jacobian(state.params, state.grid));
      sys.jacobian = gradient(state.am, i0, it, PatchSide::Candidate) * sd;
      sys.hessian = candidate_hessian(state.am, i0, it, cfg).project(sd);
      break;
    }
    case GDVariant::ESM: {
      const InverseCache& c = inverse_cache(state, cfg);
      const Eigen::MatrixXd g = forward_steepest();
      const Eigen::RowVectorXd j_fc = gradient(state.am, i0, it, PatchSide::Candidate) * g;
      const Eigen::RowVectorXd j_ic = gradient(state.am, i0, it, PatchSide::Template) * c.steepest;
      sys.jacobian = j_fc - j_ic;
      sys.forward_hessian = candidate_hessian(state.am, i0, it, cfg).project(g);
      sys.inverse_hessian = c.hessian;
      sys.hessian = sys.forward_hessian + sys.inverse_hessian;
      break;
    }
  }
  return sys;
}

StepResult gd_track_frame(TrackerState& state, GDVariant variant, const GrayImage& img, const GDConfig& cfg) {
  if (cfg.max_iters < 1 || !(cfg.stop_norm > 0.0)) throw InvalidInput("invalid gradient-descent config");
  const WarpParams entry = state.params;
  StepResult res{entry, 0, false};
  const bool additive = variant == GDVariant::FALK || variant == GDVariant::IALK;
  try {
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
      const NewtonSystem sys = assemble_newton_system(state, variant, img, cfg);
      const Eigen::VectorXd dp = newton_step(sys.jacobian, sys.hessian);

      auto candidate_for = [&](double alpha) {
        if (additive) {
          WarpParams p = state.params;
          p.values += alpha * dp;
          return p;
        }
        const WarpParams step = scale_step(offset_from_identity(state.params, dp), alpha);
        return variant == GDVariant::ICLK ? compose(state.params, invert(step)) : compose(state.params, step);
      };

      double alpha = 1.0;
      WarpParams next = candidate_for(alpha);
      CornersBox next_corners = params_to_corners(next, state.init_box);
      for (int halve = 0; halve < 40 && max_corner_displacement(next_corners, state.corners) > cfg.max_corner_step;
           ++halve) {
        alpha *= 0.5;
        next = candidate_for(alpha);
        next_corners = params_to_corners(next, state.init_box);
      }
      const double change = (next_corners.pts - state.corners.pts).norm();
      state.params = next;
      state.corners = next_corners;
      res.iterations = iter;
      if (change < cfg.stop_norm) break;
    }
    res.params = state.params;
  } catch (const StepError&) {
    set_params(state, entry);
    res.params = entry;
    res.flagged = true;
  } catch (const GeometryError&) {
    set_params(state, entry);
    res.params = entry;
    res.flagged = true;
  }
  return res;
}

}  // namespace rbt

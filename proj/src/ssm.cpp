#include "rbt/ssm.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "rbt/error.hpp"

namespace rbt {

namespace {

void require_anchor(const std::optional<CornersBox>& anchor) {
  if (!anchor) throw InvalidInput("corners kind requires an anchor box");
}

Eigen::Matrix<double, 2, 4> unit_square() {
  Eigen::Matrix<double, 2, 4> s;
  s << 0, 1, 1, 0,  //
      0, 0, 1, 1;
  return s;
}

WarpMatrix normalized(const WarpMatrix& m) {
  if (!(std::abs(m(2, 2)) > 1e-12 * m.norm()))
    throw GeometryError("homography with h33 ~ 0 cannot be normalized");
  return m / m(2, 2);
}

WarpMatrix corners_matrix(const WarpParams& p) {
  require_anchor(p.anchor);
  CornersBox target;
  for (int i = 0; i < 4; ++i) target.pts.col(i) = p.values.segment<2>(2 * i);
  const WarpMatrix to_target = unit_square_homography(target);
  const WarpMatrix to_anchor = unit_square_homography(*p.anchor);
  return normalized(to_target * to_anchor.inverse());
}

Eigen::Matrix3d sl3_algebra(const Eigen::VectorXd& v) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  const auto& g = sl3_generators();
  for (int i = 0; i < 8; ++i) a += v[i] * g[i];
  return a;
}

// d pi(X) / dX for the perspective division pi(X) = (X1/X3, X2/X3).
Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& X) {
  Eigen::Matrix<double, 2, 3> d;
  const double iz = 1.0 / X.z();
  d << iz, 0.0, -X.x() * iz * iz,  //
      0.0, iz, -X.y() * iz * iz;
  return d;
}

// dw/dh for the 8-entry homography parameterization at one point.
Eigen::Matrix<double, 2, 8> homography_entry_jacobian(const WarpMatrix& h, const Eigen::Vector2d& x) {
  const double den = h(2, 0) * x.x() + h(2, 1) * x.y() + h(2, 2);
  const double u = (h(0, 0) * x.x() + h(0, 1) * x.y() + h(0, 2)) / den;
  const double v = (h(1, 0) * x.x() + h(1, 1) * x.y() + h(1, 2)) / den;
  Eigen::Matrix<double, 2, 8> j = Eigen::Matrix<double, 2, 8>::Zero();
  j(0, 0) = x.x() / den;
  j(0, 1) = x.y() / den;
  j(0, 2) = 1.0 / den;
  j(1, 3) = x.x() / den;
  j(1, 4) = x.y() / den;
  j(1, 5) = 1.0 / den;
  j(0, 6) = -u * x.x() / den;
  j(0, 7) = -u * x.y() / den;
  j(1, 6) = -v * x.x() / den;
  j(1, 7) = -v * x.y() / den;
  return j;
}

// Similarity transform (Hartley) moving the centroid to the origin with
// mean distance sqrt(2).
Eigen::Matrix3d hartley_normalizer(const PixelCoords& pts) {
  const Eigen::Vector2d c = pts.rowwise().mean();
  const double mean_dist = (pts.colwise() - c).colwise().norm().mean();
  if (!(mean_dist > 1e-12)) throw FitError("all points coincide");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x(),  //
      0, s, -s * c.y(),   //
      0, 0, 1;
  return t;
}

PixelCoords apply(const Eigen::Matrix3d& t, const PixelCoords& pts) {
  return (t * pts.colwise().homogeneous()).colwise().hnormalized();
}

// Second singular value of the centered point cloud relative to the first:
// ~0 means the points are collinear.
double collinearity_ratio(const PixelCoords& pts) {
  const Eigen::Matrix2Xd c = pts.colwise() - pts.rowwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c * c.transpose());
  const auto sv = svd.singularValues();
  if (!(sv[0] > 0)) return 0.0;
  return std::sqrt(sv[1] / sv[0]);
}

}  // namespace

const std::array<Eigen::Matrix3d, 8>& sl3_generators() {
  static const std::array<Eigen::Matrix3d, 8> gens = [] {
    std::array<Eigen::Matrix3d, 8> g;
    for (auto& m : g) m.setZero();
    g[0](0, 2) = 1;  // x translation
    g[1](1, 2) = 1;  // y translation
    g[2](0, 1) = 1;
    g[3](1, 0) = 1;
    g[4](0, 0) = 1;
    g[4](1, 1) = -1;
    g[5](1, 1) = -1;
    g[5](2, 2) = 1;
    g[6](2, 0) = 1;
    g[7](2, 1) = 1;
    return g;
  }();
  return gens;
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd b = a / std::ldexp(1.0, squarings);
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k < 40; ++k) {
    term = term * b / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

int dof(SSMKind kind) {
  switch (kind) {
    case SSMKind::Translation: return 2;
    case SSMKind::Isometry: return 3;
    case SSMKind::Similitude: return 4;
    case SSMKind::Affine: return 6;
    case SSMKind::Homography:
    case SSMKind::SL3:
    case SSMKind::Corners: return 8;
  }
  return 0;
}

std::string_view to_string(SSMKind kind) {
  switch (kind) {
    case SSMKind::Translation: return "translation";
    case SSMKind::Isometry: return "isometry";
    case SSMKind::Similitude: return "similitude";
    case SSMKind::Affine: return "affine";
    case SSMKind::Homography: return "homography";
    case SSMKind::SL3: return "sl3";
    case SSMKind::Corners: return "corners";
  }
  return "?";
}

SSMKind ssm_from_string(std::string_view name) {
  for (SSMKind k : kAllSSMKinds)
    if (to_string(k) == name) return k;
  throw InvalidInput("unknown state-space model '" + std::string(name) + "'");
}

int minimal_points(SSMKind kind) {
  switch (kind) {
    case SSMKind::Translation: return 1;
    case SSMKind::Isometry:
    case SSMKind::Similitude: return 2;
    case SSMKind::Affine: return 3;
    default: return 4;
  }
}

void validate(const WarpParams& p) {
  if (p.values.size() != dof(p.kind))
    throw InvalidInput("parameter vector of length " + std::to_string(p.values.size()) + " for " +
                       std::string(to_string(p.kind)) + " (expects " +
                       std::to_string(dof(p.kind)) + ")");
  if (!p.values.allFinite()) throw InvalidInput("non-finite warp parameters");
  if (p.kind == SSMKind::Corners) require_anchor(p.anchor);
}

WarpParams identity_params(SSMKind kind, const std::optional<CornersBox>& anchor) {
  WarpParams p{kind, Eigen::VectorXd::Zero(dof(kind)), std::nullopt};
  switch (kind) {
    case SSMKind::Homography:
      p.values[0] = 1.0;
      p.values[4] = 1.0;
      break;
    case SSMKind::Corners:
      require_anchor(anchor);
      p.anchor = anchor;
      for (int i = 0; i < 4; ++i) p.values.segment<2>(2 * i) = anchor->pts.col(i);
      break;
    default: break;
  }
  return p;
}

WarpMatrix to_matrix(const WarpParams& p) {
  validate(p);
  const auto& v = p.values;
  WarpMatrix m = WarpMatrix::Identity();
  switch (p.kind) {
    case SSMKind::Translation:
      m(0, 2) = v[0];
      m(1, 2) = v[1];
      break;
    case SSMKind::Isometry:
    case SSMKind::Similitude: {
      const double theta = p.kind == SSMKind::Isometry ? v[2] : v[3];
      const double scale = p.kind == SSMKind::Isometry ? 1.0 : std::exp(v[2]);
      const double c = scale * std::cos(theta), s = scale * std::sin(theta);
      m << c, -s, v[0],  //
          s, c, v[1],    //
          0, 0, 1;
      break;
    }
    case SSMKind::Affine:
      m << 1 + v[2], v[3], v[0],  //
          v[4], 1 + v[5], v[1],   //
          0, 0, 1;
      break;
    case SSMKind::Homography:
      m << v[0], v[1], v[2],  //
          v[3], v[4], v[5],   //
          v[6], v[7], 1.0;
      break;
    case SSMKind::SL3: m = matrix_exp(sl3_algebra(v)); break;
    case SSMKind::Corners: m = corners_matrix(p); break;
  }
  return m;
}

WarpParams from_matrix(SSMKind kind, const WarpMatrix& m_in, const std::optional<CornersBox>& anchor) {
  if (!m_in.allFinite()) throw GeometryError("non-finite warp matrix");
  if (!(std::abs(m_in.determinant()) > 1e-14 * std::pow(m_in.norm(), 3)))
    throw GeometryError("warp matrix is not invertible");
  WarpParams p{kind, Eigen::VectorXd::Zero(dof(kind)), std::nullopt};
  auto& v = p.values;
  switch (kind) {
    case SSMKind::Translation: {
      const WarpMatrix m = normalized(m_in);
      v << m(0, 2), m(1, 2);
      break;
    }
    case SSMKind::Isometry: {
      const WarpMatrix m = normalized(m_in);
      v << m(0, 2), m(1, 2), std::atan2(m(1, 0), m(0, 0));
      break;
    }
    case SSMKind::Similitude: {
      const WarpMatrix m = normalized(m_in);
      v << m(0, 2), m(1, 2), std::log(std::hypot(m(0, 0), m(1, 0))), std::atan2(m(1, 0), m(0, 0));
      break;
    }
    case SSMKind::Affine: {
      const WarpMatrix m = normalized(m_in);
      v << m(0, 2), m(1, 2), m(0, 0) - 1, m(0, 1), m(1, 0), m(1, 1) - 1;
      break;
    }
    case SSMKind::Homography: {
      const WarpMatrix m = normalized(m_in);
      v << m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1);
      break;
    }
    case SSMKind::SL3: {
      const double det = m_in.determinant();
      const WarpMatrix unit = m_in / std::cbrt(det);
      if (det < 0) throw GeometryError("orientation-reversing matrix has no sl3 logarithm");
      const Eigen::Matrix3d a = unit.log();
      if (!a.allFinite()) throw GeometryError("matrix logarithm failed");
      v << a(0, 2), a(1, 2), a(0, 1), a(1, 0), a(0, 0), a(2, 2), a(2, 0), a(2, 1);
      break;
    }
    case SSMKind::Corners: {
      require_anchor(anchor);
      p.anchor = anchor;
      const Eigen::Matrix<double, 3, 4> h = m_in * anchor->pts.colwise().homogeneous();
      for (int i = 0; i < 4; ++i) {
        if (!(std::abs(h(2, i)) > 1e-12)) throw GeometryError("corner mapped to infinity");
        v.segment<2>(2 * i) = h.col(i).head<2>() / h(2, i);
      }
      break;
    }
  }
  return p;
}

Eigen::Vector2d warp_point(const WarpParams& p, const Eigen::Vector2d& x) {
  const Eigen::Vector3d q = to_matrix(p) * x.homogeneous();
  if (!(std::abs(q.z()) > 1e-12)) throw GeometryError("point mapped to the plane at infinity");
  return q.head<2>() / q.z();
}

PixelCoords warp_points(const WarpParams& p, const PixelCoords& x) {
  if (!x.allFinite()) throw InvalidInput("non-finite coordinates");
  const WarpMatrix m = to_matrix(p);
  PixelCoords out(2, x.cols());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const Eigen::Vector3d q = m * x.col(k).homogeneous();
    if (!(std::abs(q.z()) > 1e-12)) throw GeometryError("point mapped to the plane at infinity");
    out.col(k) = q.head<2>() / q.z();
  }
  return out;
}

WarpParams compose(const WarpParams& p, const WarpParams& dp) {
  if (p.kind != dp.kind) throw InvalidInput("compose: mismatched state-space kinds");
  validate(p);
  validate(dp);
  if (p.kind == SSMKind::Translation) return {p.kind, p.values + dp.values, std::nullopt};
  return from_matrix(p.kind, to_matrix(p) * to_matrix(dp), p.anchor);
}

WarpParams invert(const WarpParams& dp) {
  validate(dp);
  switch (dp.kind) {
    case SSMKind::Translation: return {dp.kind, -dp.values, std::nullopt};
    case SSMKind::SL3: return {dp.kind, -dp.values, std::nullopt};
    default: break;
  }
  const WarpMatrix m = to_matrix(dp);
  if (!(std::abs(m.determinant()) > 1e-14 * std::pow(m.norm(), 3)))
    throw GeometryError("warp is not invertible");
  return from_matrix(dp.kind, m.inverse(), dp.anchor);
}

WarpJacobian warp_jacobian(const WarpParams& p, const PixelCoords& x) {
  validate(p);
  const Eigen::Index n = x.cols();
  const int s = dof(p.kind);
  WarpJacobian j = WarpJacobian::Zero(2 * n, s);
  const auto& v = p.values;

  switch (p.kind) {
    case SSMKind::Translation:
      for (Eigen::Index k = 0; k < n; ++k) j.block<2, 2>(2 * k, 0).setIdentity();
      break;
    case SSMKind::Isometry:
    case SSMKind::Similitude: {
      const bool sim = p.kind == SSMKind::Similitude;
      const double theta = sim ? v[3] : v[2];
      const double scale = sim ? std::exp(v[2]) : 1.0;
      const double c = scale * std::cos(theta), sn = scale * std::sin(theta);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double px = x(0, k), py = x(1, k);
        j(2 * k, 0) = 1;
        j(2 * k + 1, 1) = 1;
        // d(sR x)/dtheta
        const double rx = -sn * px - c * py, ry = c * px - sn * py;
        const int ti = sim ? 3 : 2;
        j(2 * k, ti) = rx;
        j(2 * k + 1, ti) = ry;
        if (sim) {
          j(2 * k, 2) = c * px - sn * py;
          j(2 * k + 1, 2) = sn * px + c * py;
        }
      }
      break;
    }
    case SSMKind::Affine:
      for (Eigen::Index k = 0; k < n; ++k) {
        j(2 * k, 0) = 1;
        j(2 * k + 1, 1) = 1;
        j(2 * k, 2) = x(0, k);
        j(2 * k, 3) = x(1, k);
        j(2 * k + 1, 4) = x(0, k);
        j(2 * k + 1, 5) = x(1, k);
      }
      break;
    case SSMKind::Homography: {
      const WarpMatrix m = to_matrix(p);
      for (Eigen::Index k = 0; k < n; ++k) j.block<2, 8>(2 * k, 0) = homography_entry_jacobian(m, x.col(k));
      break;
    }
    case SSMKind::SL3: {
      // d exp(A + eps G)/d eps via the block-triangular exponential.
      const Eigen::Matrix3d a = sl3_algebra(v);
      const auto& g = sl3_generators();
      std::array<Eigen::Matrix3d, 8> dexp;
      Eigen::MatrixXd big = Eigen::MatrixXd::Zero(6, 6);
      big.topLeftCorner<3, 3>() = a;
      big.bottomRightCorner<3, 3>() = a;
      Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
      for (int i = 0; i < 8; ++i) {
        big.topRightCorner<3, 3>() = g[i];
        const Eigen::MatrixXd e = matrix_exp(big);
        dexp[i] = e.topRightCorner<3, 3>();
        if (i == 0) h = e.topLeftCorner<3, 3>();
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Vector3d xh = x.col(k).homogeneous();
        const auto dpi = projection_jacobian(h * xh);
        for (int i = 0; i < 8; ++i) j.block<2, 1>(2 * k, i) = dpi * (dexp[i] * xh);
      }
      break;
    }
    case SSMKind::Corners: {
      // w(x) = pi(Hc(c) q), q = Ha^-1 x, with Hc the unit-square-to-corners
      // homography. Differentiate Hc's 8 entries through its exact 4-point
      // linear system A h = b: dh/dc_i = A^-1 e_i (1 + h31 X + h32 Y).
      require_anchor(p.anchor);
      CornersBox target;
      for (int i = 0; i < 4; ++i) target.pts.col(i) = v.segment<2>(2 * i);
      const WarpMatrix hc = normalized(unit_square_homography(target));
      const WarpMatrix ha_inv = unit_square_homography(*p.anchor).inverse();
      const auto sq = unit_square();
      Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
      Eigen::Matrix<double, 8, 8> rhs = Eigen::Matrix<double, 8, 8>::Zero();
      for (int i = 0; i < 4; ++i) {
        const double X = sq(0, i), Y = sq(1, i);
        const double u = target.pts(0, i), w = target.pts(1, i);
        a.row(2 * i) << X, Y, 1, 0, 0, 0, -u * X, -u * Y;
        a.row(2 * i + 1) << 0, 0, 0, X, Y, 1, -w * X, -w * Y;
        const double f = 1.0 + hc(2, 0) * X + hc(2, 1) * Y;
        rhs(2 * i, 2 * i) = f;
        rhs(2 * i + 1, 2 * i + 1) = f;
      }
      const Eigen::Matrix<double, 8, 8> dh = a.fullPivLu().solve(rhs);
      for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Vector3d qh = ha_inv * x.col(k).homogeneous();
        const Eigen::Vector2d q = qh.head<2>() / qh.z();
        j.block<2, 8>(2 * k, 0) = homography_entry_jacobian(hc, q) * dh;
      }
      break;
    }
  }
  return j;
}

Eigen::MatrixX2d point_jacobian(const WarpParams& p, const PixelCoords& x) {
  const WarpMatrix m = to_matrix(p);
  Eigen::MatrixX2d out(2 * x.cols(), 2);
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const Eigen::Vector3d q = m * x.col(k).homogeneous();
    out.block<2, 2>(2 * k, 0) = projection_jacobian(q) * m.leftCols<2>();
  }
  return out;
}

WarpMatrix fit_homography_dlt(const PixelCoords& src, const PixelCoords& dst) {
  const Eigen::Index n = src.cols();
  if (n < 4 || dst.cols() != n) throw FitError("homography fit needs >= 4 correspondences");
  if (collinearity_ratio(src) < 1e-9 || collinearity_ratio(dst) < 1e-9)
    throw FitError("degenerate configuration: collinear points");
  const Eigen::Matrix3d ts = hartley_normalizer(src);
  const Eigen::Matrix3d td = hartley_normalizer(dst);
  const PixelCoords s = apply(ts, src);
  const PixelCoords d = apply(td, dst);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double x = s(0, k), y = s(1, k), u = d(0, k), v = d(1, k);
    a.row(2 * k) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
    a.row(2 * k + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y, -v;
  }
  Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ata);
  const auto& ev = eig.eigenvalues();
  // A one-dimensional null space is required; a second near-zero eigenvalue
  // means the correspondences do not pin down the homography.
  if (!(ev[1] > 1e-14 * ev[8])) throw FitError("degenerate configuration for homography fit");
  const Eigen::VectorXd h = eig.eigenvectors().col(0);
  Eigen::Matrix3d hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  const Eigen::Matrix3d out = td.inverse() * hn * ts;
  return normalized(out);
}

WarpParams params_from_points(SSMKind kind, const PixelCoords& src, const PixelCoords& dst,
                              const std::optional<CornersBox>& anchor) {
  const Eigen::Index n = src.cols();
  if (dst.cols() != n) throw InvalidInput("params_from_points: src/dst size mismatch");
  if (n < minimal_points(kind))
    throw FitError(std::string(to_string(kind)) + " fit needs at least " +
                   std::to_string(minimal_points(kind)) + " points");
  if (!src.allFinite() || !dst.allFinite()) throw InvalidInput("non-finite correspondences");

  const Eigen::Vector2d ms = src.rowwise().mean();
  const Eigen::Vector2d md = dst.rowwise().mean();
  const Eigen::Matrix2Xd cs = src.colwise() - ms;
  const Eigen::Matrix2Xd cd = dst.colwise() - md;

  WarpParams p{kind, Eigen::VectorXd::Zero(dof(kind)), std::nullopt};
  switch (kind) {
    case SSMKind::Translation: p.values = md - ms; return p;
    case SSMKind::Isometry:
    case SSMKind::Similitude: {
      const double spread = cs.squaredNorm();
      if (!(spread > 1e-18)) throw FitError("degenerate configuration: coincident points");
      // sum of x.x' and x cross x' over centered pairs
      double dot = 0.0, cross = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        dot += cs(0, k) * cd(0, k) + cs(1, k) * cd(1, k);
        cross += cs(0, k) * cd(1, k) - cs(1, k) * cd(0, k);
      }
      const double theta = std::atan2(cross, dot);
      double scale = 1.0;
      if (kind == SSMKind::Similitude) {
        scale = std::hypot(dot, cross) / spread;
        if (!(scale > 1e-12)) throw FitError("degenerate configuration: zero scale");
      }
      Eigen::Matrix2d r;
      r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
      const Eigen::Vector2d t = md - scale * r * ms;
      if (kind == SSMKind::Isometry) p.values << t, theta;
      else p.values << t, std::log(scale), theta;
      return p;
    }
    case SSMKind::Affine: {
      if (collinearity_ratio(src) < 1e-9) throw FitError("degenerate configuration: collinear points");
      const Eigen::Matrix2d sxx = cs * cs.transpose();
      const Eigen::Matrix2d sxy = cd * cs.transpose();
      const Eigen::Matrix2d a = sxy * sxx.inverse();
      const Eigen::Vector2d t = md - a * ms;
      p.values << t, a(0, 0) - 1, a(0, 1), a(1, 0), a(1, 1) - 1;
      return p;
    }
    case SSMKind::Homography:
    case SSMKind::SL3:
    case SSMKind::Corners: {
      const WarpMatrix h = fit_homography_dlt(src, dst);
      return from_matrix(kind, h, anchor);
    }
  }
  return p;
}

PixelCoords corners_as_coords(const CornersBox& box) { return box.pts; }

CornersBox coords_as_corners(const PixelCoords& pts) {
  if (pts.cols() != 4) throw InvalidInput("expected exactly 4 corner points");
  return CornersBox(Eigen::Matrix<double, 2, 4>(pts));
}

CornersBox params_to_corners(const WarpParams& p, const CornersBox& init) {
  return coords_as_corners(warp_points(p, corners_as_coords(init)));
}

}  // namespace rbt

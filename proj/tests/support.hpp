#pragma once

// Independent oracles and fixtures shared by the test binaries. Nothing here
// calls into the code under test except where a fixture (not an expected
// value) is being built.

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "rbt/image.hpp"
#include "rbt/ssm.hpp"

namespace rbt::testing {

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.norm(), 1e-12);
  return (a - b).norm() / scale;
}

// Central differences of a scalar function of a vector.
inline Eigen::RowVectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                      const Eigen::VectorXd& x, double h) {
  Eigen::RowVectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Second-order central differences of a scalar function.
inline Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                  double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hm(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      auto at = [&](double di, double dj) {
        Eigen::VectorXd y = x;
        y[i] += di;
        y[j] += dj;
        return f(y);
      };
      const double v = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
      hm(i, j) = hm(j, i) = v;
    }
  return hm;
}

// Jacobian of a vector function by central differences, columns per input.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

// Values that cluster into a few intensity bins while staying >= 0.1 away
// from the rounding knots at k + 0.5, so finite differences never change a
// bin.
inline Eigen::VectorXd clustered_patch(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> level(20, 235);
  std::uniform_real_distribution<double> off(-0.4, 0.4);
  std::vector<int> levels(8);
  for (int& l : levels) l = level(rng);
  std::uniform_int_distribution<std::size_t> pick(0, levels.size() - 1);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = levels[pick(rng)] + off(rng);
  return v;
}

// Keeps every value >= 0.1 away from the knots.
inline Eigen::VectorXd away_from_knots(Eigen::VectorXd v) {
  for (double& x : v) {
    const double f = x - std::floor(x);
    if (std::abs(f - 0.5) < 0.1) x += (f < 0.5 ? -0.1 : 0.1);
  }
  return v;
}

// A patch pair typical of tracking: the candidate is a perturbed copy.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> patch_pair(Eigen::Index n, std::mt19937_64& rng) {
  const Eigen::VectorXd i0 = clustered_patch(n, rng);
  std::uniform_real_distribution<double> g(0.8, 1.2), b(-10, 10);
  const Eigen::VectorXd noise = random_vector(n, rng, -6, 6);
  Eigen::VectorXd it = (g(rng) * i0).array() + b(rng);
  it += noise;
  return {i0, away_from_knots(it.cwiseMax(1.0).cwiseMin(254.0))};
}

// Homography with h33 = 1 mapping four points exactly, by solving the plain
// 8x8 linear system (no normalization, no SVD).
inline Eigen::Matrix3d homography_8x8(const Eigen::Matrix<double, 2, 4>& src, const Eigen::Matrix<double, 2, 4>& dst) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int k = 0; k < 4; ++k) {
    const double x = src(0, k), y = src(1, k), u = dst(0, k), v = dst(1, k);
    a.row(2 * k) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * k + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b[2 * k] = u;
    b[2 * k + 1] = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0;
  return m;
}

inline Eigen::Vector2d apply_h(const Eigen::Matrix3d& h, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = h * p.homogeneous();
  return q.head<2>() / q.z();
}

// Image whose pixel x shows src at H^-1 x, i.e. the content moved by H.
inline GrayImage warp_image(const GrayImage& src, const Eigen::Matrix3d& h) {
  const Eigen::Matrix3d inv = h.inverse();
  return GrayImage::generate(src.width(), src.height(), [&](int x, int y) {
    return sample_bilinear(src, apply_h(inv, Eigen::Vector2d(x, y)));
  });
}

inline Eigen::Matrix3d translation_h(double tx, double ty) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h(0, 2) = tx;
  h(1, 2) = ty;
  return h;
}

// RMS corner distance, written out independently of the evaluation module.
inline double rms_corner_distance(const Eigen::Matrix<double, 2, 4>& a, const Eigen::Matrix<double, 2, 4>& b) {
  return std::sqrt((a - b).colwise().squaredNorm().sum() / 4.0);
}

// Smooth, non-periodic test image with plenty of gradient in every direction.
inline GrayImage smooth_image(int w, int h, double phase = 0.0) {
  return GrayImage::generate(w, h, [&](int x, int y) {
    return 128.0 + 50.0 * std::sin(0.11 * x + phase) * std::cos(0.07 * y) + 30.0 * std::sin(0.05 * (x + 2 * y) + 1.3) +
           20.0 * std::cos(0.13 * y - 0.04 * x);
  });
}

// Random convex quad: the rectangle with each corner jittered by <= jitter.
inline Eigen::Matrix<double, 2, 4> jittered_rect(double x, double y, double w, double h, double jitter,
                                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  Eigen::Matrix<double, 2, 4> m;
  m << x, x + w, x + w, x, y, y, y + h, y + h;
  for (int i = 0; i < 8; ++i) m(i % 2, i / 2) += u(rng);
  return m;
}

inline PixelCoords random_points(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 200.0);
  PixelCoords p(2, n);
  for (int k = 0; k < n; ++k) p.col(k) << u(rng), u(rng);
  return p;
}

// Random parameters of moderate size for each kind.
inline WarpParams random_params(SSMKind kind, std::mt19937_64& rng, const CornersBox& anchor) {
  std::uniform_real_distribution<double> t(-15, 15), a(-0.15, 0.15), pr(-4e-4, 4e-4), c(-8, 8);
  WarpParams p = identity_params(kind, anchor);
  auto& v = p.values;
  switch (kind) {
    case SSMKind::Translation: v << t(rng), t(rng); break;
    case SSMKind::Isometry: v << t(rng), t(rng), a(rng); break;
    case SSMKind::Similitude: v << t(rng), t(rng), a(rng), a(rng); break;
    case SSMKind::Affine: v << t(rng), t(rng), a(rng), a(rng), a(rng), a(rng); break;
    case SSMKind::Homography:
      v << 1 + a(rng), a(rng), t(rng), a(rng), 1 + a(rng), t(rng), pr(rng), pr(rng);
      break;
    case SSMKind::SL3: v << t(rng), t(rng), a(rng), a(rng), a(rng), a(rng), pr(rng), pr(rng); break;
    case SSMKind::Corners:
      for (int i = 0; i < 8; ++i) v[i] += c(rng);
      break;
  }
  return p;
}

inline double action_gap(const WarpParams& p, const WarpParams& q, const PixelCoords& x) {
  return (warp_points(p, x) - warp_points(q, x)).cwiseAbs().maxCoeff();
}

}  // namespace rbt::testing

#include "rbt/am.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rbt/error.hpp"

namespace rbt {

namespace {

constexpr double kFlatStddev = 1e-12;

void check_pair(const Eigen::VectorXd& i0, const Eigen::VectorXd& it, Eigen::Index min_n = 1) {
  if (i0.size() != it.size())
    throw InvalidInput("patch size mismatch: " + std::to_string(i0.size()) + " vs " +
                       std::to_string(it.size()));
  if (i0.size() < min_n)
    throw InvalidInput("patch needs at least " + std::to_string(min_n) + " values");
}

Eigen::Index min_size(AMKind kind) {
  switch (kind) {
    case AMKind::SSD:
    case AMKind::SPSS:
    case AMKind::SCV:
    case AMKind::RSCV: return 1;
    default: return 2;
  }
}

StructuredHessian scaled_identity(Eigen::Index n, double s) {
  StructuredHessian h;
  h.diag = Eigen::VectorXd::Constant(n, s);
  return h;
}

// Residual of the conditional-variance models: the deviation of d = It - I0
// from its mean over the pixels sharing a bin. Bins come from I0 for SCV and
// from It for RSCV.
Eigen::VectorXd conditional_residual(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  const Eigen::VectorXd& binned = kind == AMKind::SCV ? i0 : it;
  const Eigen::VectorXd d = it - i0;
  std::array<double, 256> sum{};
  std::array<int, 256> cnt{};
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const int b = intensity_bin(binned[k]);
    sum[b] += d[k];
    ++cnt[b];
  }
  Eigen::VectorXd r(d.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const int b = intensity_bin(binned[k]);
    r[k] = d[k] - sum[b] / cnt[b];
  }
  return r;
}

struct NccParts {
  Eigen::VectorXd ct, c0;  // centered patches
  double nt = 0, n0 = 0;   // their L2 norms
  double f = 0;
  bool flat = false;
};

NccParts ncc_parts(const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  NccParts p;
  p.ct = it.array() - it.mean();
  p.c0 = i0.array() - i0.mean();
  p.nt = p.ct.norm();
  p.n0 = p.c0.norm();
  const double scale = std::sqrt(static_cast<double>(it.size() - 1));
  p.flat = p.nt / scale < kFlatStddev || p.n0 / scale < kFlatStddev;
  p.f = p.flat ? 0.0 : p.ct.dot(p.c0) / (p.nt * p.n0);
  return p;
}

Eigen::RowVectorXd ncc_gradient_candidate(const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  const NccParts p = ncc_parts(i0, it);
  if (p.flat) return Eigen::RowVectorXd::Zero(it.size());
  return (p.c0 / (p.nt * p.n0) - p.f * p.ct / (p.nt * p.nt)).transpose();
}

Eigen::RowVectorXd ssim_gradient_candidate(const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  const SSIMIntermediates s = ssim_intermediates(i0, it);
  const double n = static_cast<double>(s.n);
  const Eigen::VectorXd g =
      (2.0 / (s.c * s.d)) *
      ((s.a * s.centered_0 - s.c * s.f * s.centered_t) / (n - 1.0) +
       Eigen::VectorXd::Constant(s.n, (s.mu_0 * s.b - s.mu_t * s.f * s.d) / n));
  return g.transpose();
}

Eigen::RowVectorXd spss_gradient_candidate(const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  const double c1 = SSIMConstants{}.c1();
  Eigen::RowVectorXd g(it.size());
  for (Eigen::Index k = 0; k < it.size(); ++k) {
    const double t = it[k], o = i0[k];
    const double den = t * t + o * o + c1;
    const double fk = (2.0 * t * o + c1) / den;
    g[k] = 2.0 * (o - t * fk) / den;
  }
  return g;
}

Eigen::RowVectorXd gradient_candidate(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  switch (kind) {
    case AMKind::SSD: return (-2.0 * (it - i0)).transpose();
    case AMKind::NCC: return ncc_gradient_candidate(i0, it);
    case AMKind::ZNCC: {
      // f = -||z(It) - z(I0)||^2 = -2 (N-1) (1 - ncc) on non-flat patches.
      const double n = static_cast<double>(it.size());
      const Eigen::VectorXd zt = zscore_normalize(it);
      const Eigen::VectorXd z0 = zscore_normalize(i0);
      if (zt.isZero(0.0)) return Eigen::RowVectorXd::Zero(it.size());
      // dz(It)/dIt = (P - z z^T / (N-1)) / sigma_t, applied to -2 (zt - z0)
      const double sigma = std::sqrt((it.array() - it.mean()).square().sum() / (n - 1.0));
      const Eigen::VectorXd r = -2.0 * (zt - z0);
      Eigen::VectorXd g = r.array() - r.mean();
      g -= zt * (zt.dot(r) / (n - 1.0));
      return (g / sigma).transpose();
    }
    case AMKind::SCV:
    case AMKind::RSCV: return (-2.0 * conditional_residual(kind, i0, it)).transpose();
    case AMKind::SSIM: return ssim_gradient_candidate(i0, it);
    case AMKind::SPSS: return spss_gradient_candidate(i0, it);
  }
  return {};
}

StructuredHessian ncc_self_hessian(const Eigen::VectorXd& i, double factor) {
  const Eigen::Index n = i.size();
  const Eigen::VectorXd c = i.array() - i.mean();
  const double s = c.squaredNorm();
  if (std::sqrt(s / static_cast<double>(n - 1)) < kFlatStddev) return scaled_identity(n, 0.0);
  // -(P - c c^T / s) / s with P the centering projector
  StructuredHessian h = scaled_identity(n, -factor / s);
  h.terms.push_back({factor / (s * static_cast<double>(n)), Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n)});
  h.terms.push_back({factor / (s * s), c, c});
  return h;
}

StructuredHessian conditional_self_hessian(const Eigen::VectorXd& i) {
  // -2 (I - B), B averaging within each occupied bin
  const Eigen::Index n = i.size();
  StructuredHessian h = scaled_identity(n, -2.0);
  std::array<std::vector<Eigen::Index>, 256> members;
  for (Eigen::Index k = 0; k < n; ++k) members[intensity_bin(i[k])].push_back(k);
  for (const auto& m : members) {
    if (m.empty()) continue;
    Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k : m) ind[k] = 1.0;
    h.terms.push_back({2.0 / static_cast<double>(m.size()), ind, ind});
  }
  return h;
}

}  // namespace

std::string_view to_string(AMKind kind) {
  switch (kind) {
    case AMKind::SSD: return "ssd";
    case AMKind::NCC: return "ncc";
    case AMKind::ZNCC: return "zncc";
    case AMKind::SCV: return "scv";
    case AMKind::RSCV: return "rscv";
    case AMKind::SSIM: return "ssim";
    case AMKind::SPSS: return "spss";
  }
  return "?";
}

AMKind am_from_string(std::string_view name) {
  for (AMKind k : kAllAMKinds)
    if (to_string(k) == name) return k;
  throw InvalidInput("unknown appearance model '" + std::string(name) + "'");
}

int intensity_bin(double v) {
  return std::clamp(static_cast<int>(std::lround(v)), 0, 255);
}

SSIMIntermediates ssim_intermediates(const Eigen::VectorXd& i0, const Eigen::VectorXd& it,
                                     const SSIMConstants& k) {
  check_pair(i0, it, 2);
  SSIMIntermediates s;
  s.n = it.size();
  const double n = static_cast<double>(s.n);
  s.mu_t = it.mean();
  s.mu_0 = i0.mean();
  s.centered_t = it.array() - s.mu_t;
  s.centered_0 = i0.array() - s.mu_0;
  s.var_t = s.centered_t.squaredNorm() / (n - 1.0);
  s.var_0 = s.centered_0.squaredNorm() / (n - 1.0);
  s.cov = s.centered_t.dot(s.centered_0) / (n - 1.0);
  const double c1 = k.c1(), c2 = k.c2();
  s.a = 2.0 * s.mu_t * s.mu_0 + c1;
  s.b = 2.0 * s.cov + c2;
  s.c = s.mu_t * s.mu_t + s.mu_0 * s.mu_0 + c1;
  s.d = s.var_t + s.var_0 + c2;
  s.f = (s.a * s.b) / (s.c * s.d);
  return s;
}

Eigen::MatrixXd StructuredHessian::dense() const {
  Eigen::MatrixXd m = diag.asDiagonal();
  for (const auto& t : terms) m += t.scale * t.u * t.v.transpose();
  return m;
}

Eigen::VectorXd StructuredHessian::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = diag.cwiseProduct(x);
  for (const auto& t : terms) y += t.scale * t.v.dot(x) * t.u;
  return y;
}

Eigen::MatrixXd StructuredHessian::project(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd out = a.transpose() * diag.asDiagonal() * b;
  for (const auto& t : terms) out += t.scale * (a.transpose() * t.u) * (t.v.transpose() * b);
  return out;
}

Eigen::MatrixXd StructuredHessian::project(const Eigen::MatrixXd& g) const { return project(g, g); }

IntensityMap build_intensity_map(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  if (kind != AMKind::SCV && kind != AMKind::RSCV)
    throw InvalidInput("intensity maps exist only for scv and rscv");
  check_pair(i0, it);
  const Eigen::VectorXd& binned = kind == AMKind::SCV ? i0 : it;
  const Eigen::VectorXd& other = kind == AMKind::SCV ? it : i0;
  IntensityMap m;
  std::array<double, 256> sum_other{}, sum_self{};
  for (Eigen::Index k = 0; k < binned.size(); ++k) {
    const int b = intensity_bin(binned[k]);
    sum_other[b] += other[k];
    sum_self[b] += binned[k];
    ++m.count[b];
  }
  for (int b = 0; b < 256; ++b) {
    if (m.count[b] == 0) {
      m.expected[b] = b;
      m.source_mean[b] = b;
    } else {
      m.expected[b] = sum_other[b] / m.count[b];
      m.source_mean[b] = sum_self[b] / m.count[b];
    }
  }
  return m;
}

double similarity(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  check_pair(i0, it, min_size(kind));
  switch (kind) {
    case AMKind::SSD: return -(it - i0).squaredNorm();
    case AMKind::NCC: return ncc_parts(i0, it).f;
    case AMKind::ZNCC: return -(zscore_normalize(it) - zscore_normalize(i0)).squaredNorm();
    case AMKind::SCV:
    case AMKind::RSCV: {
      // Substitute the binned patch by its conditional expectation (keeping
      // each pixel's offset from its bin mean) and take the negated SSD.
      const IntensityMap map = build_intensity_map(kind, i0, it);
      const Eigen::VectorXd& binned = kind == AMKind::SCV ? i0 : it;
      const Eigen::VectorXd& other = kind == AMKind::SCV ? it : i0;
      double acc = 0.0;
      for (Eigen::Index k = 0; k < binned.size(); ++k) {
        const int b = intensity_bin(binned[k]);
        const double substituted = map.expected[b] + (binned[k] - map.source_mean[b]);
        acc += (other[k] - substituted) * (other[k] - substituted);
      }
      return -acc;
    }
    case AMKind::SSIM: return ssim_intermediates(i0, it).f;
    case AMKind::SPSS: {
      const double c1 = SSIMConstants{}.c1();
      double acc = 0.0;
      for (Eigen::Index k = 0; k < it.size(); ++k) {
        const double t = it[k], o = i0[k];
        acc += (2.0 * t * o + c1) / (t * t + o * o + c1);
      }
      return acc;
    }
  }
  return 0.0;
}

Eigen::RowVectorXd gradient(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it, PatchSide wrt) {
  check_pair(i0, it, min_size(kind));
  if (wrt == PatchSide::Candidate) return gradient_candidate(kind, i0, it);
  switch (kind) {
    case AMKind::SCV:
    case AMKind::RSCV: return (2.0 * conditional_residual(kind, i0, it)).transpose();
    default:
      // the remaining kinds are symmetric in their two arguments
      return gradient_candidate(kind, it, i0);
  }
}

StructuredHessian hessian_full(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it) {
  check_pair(i0, it, min_size(kind));
  const Eigen::Index n = it.size();
  if (kind == AMKind::SPSS) {
    const double c1 = SSIMConstants{}.c1();
    StructuredHessian h;
    h.diag.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t = it[k], o = i0[k];
      const double den = t * t + o * o + c1;
      const double fk = (2.0 * t * o + c1) / den;
      const double gk = 2.0 * (o - t * fk) / den;
      h.diag[k] = -2.0 * (fk + 2.0 * t * gk) / den;
    }
    return h;
  }
  if (kind != AMKind::SSIM) throw InvalidInput("hessian_full is defined for ssim and spss only");

  const SSIMIntermediates s = ssim_intermediates(i0, it);
  const Eigen::VectorXd fp = ssim_gradient_candidate(i0, it).transpose();
  const double nn = static_cast<double>(n);
  const double cd = s.c * s.d;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  StructuredHessian h = scaled_identity(n, -2.0 * s.f / (s.d * (nn - 1.0)));
  auto sym = [&h](double scale, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    h.terms.push_back({scale, u, v});
    h.terms.push_back({scale, v, u});
  };
  sym(4.0 * s.mu_0 / (cd * nn * (nn - 1.0)), s.centered_0, ones);
  sym(-4.0 * s.f * s.mu_t / (cd * nn * (nn - 1.0)), s.centered_t, ones);
  sym(-2.0 / (s.d * (nn - 1.0)), s.centered_t, fp);
  sym(-2.0 * s.mu_t / (s.c * nn), ones, fp);
  h.terms.push_back({2.0 * s.f / (s.d * nn * (nn - 1.0)) - 2.0 * s.f / (s.c * nn * nn), ones, ones});
  return h;
}

StructuredHessian self_hessian(AMKind kind, const Eigen::VectorXd& i) {
  const Eigen::Index n = i.size();
  if (n < min_size(kind)) throw InvalidInput("patch too small for self hessian");
  switch (kind) {
    case AMKind::SSD: return scaled_identity(n, -2.0);
    case AMKind::NCC: return ncc_self_hessian(i, 1.0);
    case AMKind::ZNCC: return ncc_self_hessian(i, 2.0 * static_cast<double>(n - 1));
    case AMKind::SCV:
    case AMKind::RSCV: return conditional_self_hessian(i);
    case AMKind::SSIM: {
      // (-2 / (cbar dbar)) [ (dbar / N^2) 1 1^T + (cbar / (N-1)) P ]
      const SSIMConstants k;
      const double nn = static_cast<double>(n);
      const double mu = i.mean();
      const double var = (i.array() - mu).square().sum() / (nn - 1.0);
      const double cbar = 2.0 * mu * mu + k.c1();
      const double dbar = 2.0 * var + k.c2();
      StructuredHessian h = scaled_identity(n, -2.0 / (dbar * (nn - 1.0)));
      h.terms.push_back({2.0 / (dbar * nn * (nn - 1.0)) - 2.0 / (cbar * nn * nn), Eigen::VectorXd::Ones(n),
                         Eigen::VectorXd::Ones(n)});
      return h;
    }
    case AMKind::SPSS: {
      const double c1 = SSIMConstants{}.c1();
      StructuredHessian h;
      h.diag = (-2.0 / (2.0 * i.array().square() + c1)).matrix();
      return h;
    }
  }
  return {};
}

SimilarityBundle evaluate(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it, PatchSide wrt) {
  SimilarityBundle b;
  b.f = similarity(kind, i0, it);
  b.dfdI = gradient(kind, i0, it, wrt);
  const Eigen::VectorXd& ref = wrt == PatchSide::Candidate ? it : i0;
  if ((kind == AMKind::SSIM || kind == AMKind::SPSS) && wrt == PatchSide::Candidate)
    b.d2fdI2 = hessian_full(kind, i0, it);
  else
    b.d2fdI2 = self_hessian(kind, ref);
  return b;
}

Eigen::VectorXd zscore_normalize(const Eigen::VectorXd& i) {
  if (i.size() < 2) throw InvalidInput("z-score needs at least 2 values");
  const double mu = i.mean();
  const Eigen::VectorXd c = i.array() - mu;
  const double sigma = std::sqrt(c.squaredNorm() / static_cast<double>(i.size() - 1));
  if (sigma < kFlatStddev) return Eigen::VectorXd::Zero(i.size());
  return c / sigma;
}

double perfect_similarity(AMKind kind, const Eigen::VectorXd& i0) {
  switch (kind) {
    case AMKind::NCC:
    case AMKind::SSIM: return 1.0;
    case AMKind::SPSS: return static_cast<double>(i0.size());
    default: return 0.0;
  }
}

double similarity_scale(AMKind kind, const Eigen::VectorXd& i0) {
  const double n = static_cast<double>(i0.size());
  switch (kind) {
    case AMKind::NCC:
    case AMKind::SSIM: return 1.0;
    case AMKind::SPSS: return n;
    case AMKind::ZNCC: return 2.0 * (n - 1.0);
    case AMKind::SSD:
    case AMKind::SCV:
    case AMKind::RSCV: {
      // twice the template energy: the SSD of two uncorrelated patches with
      // the template's spread
      const double energy = (i0.array() - i0.mean()).square().sum();
      return std::max(2.0 * energy, 1e-9);
    }
  }
  return 1.0;
}

}  // namespace rbt

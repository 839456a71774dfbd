#pragma once

#include <array>
#include <string_view>
#include <vector>

#include <Eigen/Core>

// Appearance models: similarity f(I0, It) between a template patch I0 and a
// candidate patch It, with analytic first and second derivatives w.r.t. the
// patch intensities. Every model is oriented so that larger is better and
// the maximum is attained at It == I0.
namespace rbt {

enum class AMKind { SSD, NCC, ZNCC, SCV, RSCV, SSIM, SPSS };

inline constexpr std::array<AMKind, 7> kAllAMKinds = {AMKind::SSD,  AMKind::NCC,  AMKind::ZNCC,
                                                      AMKind::SCV,  AMKind::RSCV, AMKind::SSIM,
                                                      AMKind::SPSS};

std::string_view to_string(AMKind kind);
AMKind am_from_string(std::string_view name);

// Which patch a derivative is taken with respect to.
enum class PatchSide { Template, Candidate };

struct SSIMConstants {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
  // exponents of the luminance/contrast/structure terms; fixed at 1, with
  // C3 = C2 / 2 folded into the two-factor form
  double alpha = 1.0, beta = 1.0, gamma = 1.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  double c3() const { return c2() / 2.0; }
};

// Quantities shared by the SSIM value and its derivatives.
struct SSIMIntermediates {
  Eigen::Index n = 0;
  double mu_t = 0, mu_0 = 0;
  double var_t = 0, var_0 = 0, cov = 0;  // divisor N-1
  Eigen::VectorXd centered_t, centered_0;
  double a = 0, b = 0, c = 0, d = 0;
  double f = 0;
};

SSIMIntermediates ssim_intermediates(const Eigen::VectorXd& i0, const Eigen::VectorXd& it,
                                     const SSIMConstants& k = {});

// N x N matrix held as diag(diag) + sum_k scale_k * u_k * v_k^T.
struct StructuredHessian {
  struct Term {
    double scale;
    Eigen::VectorXd u;
    Eigen::VectorXd v;
  };

  Eigen::VectorXd diag;
  std::vector<Term> terms;

  Eigen::Index size() const { return diag.size(); }
  Eigen::MatrixXd dense() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  // G^T H G without forming H; G is N x S.
  Eigen::MatrixXd project(const Eigen::MatrixXd& g) const;
  // A^T H B for two N x S factors.
  Eigen::MatrixXd project(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;
};

struct SimilarityBundle {
  double f = 0.0;
  Eigen::RowVectorXd dfdI;
  StructuredHessian d2fdI2;
};

// Conditional-expectation table used by SCV (bins of I0 -> E[It | I0]) and
// RSCV (bins of It -> E[I0 | It]). 256 unit bins with nearest-integer binning.
struct IntensityMap {
  std::array<double, 256> expected{};     // substituted intensity per bin
  std::array<double, 256> source_mean{};  // mean of the binned patch per bin
  std::array<int, 256> count{};

  double operator[](int bin) const { return expected[static_cast<std::size_t>(bin)]; }
};

int intensity_bin(double v);

IntensityMap build_intensity_map(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it);

double similarity(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it);

Eigen::RowVectorXd gradient(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it,
                            PatchSide wrt = PatchSide::Candidate);

// Exact d2f/dIt2; defined for SSIM and SPSS.
StructuredHessian hessian_full(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it);

// d2f(I, I)/dI2, the second derivative at perfect alignment.
StructuredHessian self_hessian(AMKind kind, const Eigen::VectorXd& i);

SimilarityBundle evaluate(AMKind kind, const Eigen::VectorXd& i0, const Eigen::VectorXd& it,
                          PatchSide wrt = PatchSide::Candidate);

// (I - mean) / sample stddev; the zero vector for flat patches.
Eigen::VectorXd zscore_normalize(const Eigen::VectorXd& i);

// Scale that maps similarity gaps onto a comparable range across kinds:
// (f - f_perfect) / similarity_scale is ~ -1 for an unrelated patch.
double similarity_scale(AMKind kind, const Eigen::VectorXd& i0);

// f(I, I) for the kind.
double perfect_similarity(AMKind kind, const Eigen::VectorXd& i0);

}  // namespace rbt

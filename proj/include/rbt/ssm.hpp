#pragma once

#include <array>
#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "rbt/image.hpp"

// State-space models: parameterized warps w(x, p) of image points.
//
// Every kind is represented internally by a 3x3 homogeneous matrix, which
// makes composition and inversion exact for all of them:
//   translation  (tx, ty)
//   isometry     (tx, ty, theta)
//   similitude   (tx, ty, s, theta)         scale factor exp(s)
//   affine       (tx, ty, a11-1, a12, a21, a22-1)
//   homography   (h11, h12, h13, h21, h22, h23, h31, h32), h33 = 1
//   sl3          coefficients of 8 traceless generators, H = exp(sum v_i G_i)
//   corners      (x1, y1, ..., x4, y4); the warp is the homography taking the
//                anchor box onto these corners
namespace rbt {

enum class SSMKind { Translation, Isometry, Similitude, Affine, Homography, SL3, Corners };

inline constexpr std::array<SSMKind, 7> kAllSSMKinds = {
    SSMKind::Translation, SSMKind::Isometry,   SSMKind::Similitude, SSMKind::Affine,
    SSMKind::Homography,  SSMKind::SL3,        SSMKind::Corners};

int dof(SSMKind kind);
std::string_view to_string(SSMKind kind);
SSMKind ssm_from_string(std::string_view name);

// Minimal number of point correspondences params_from_points needs.
int minimal_points(SSMKind kind);

using WarpMatrix = Eigen::Matrix3d;

// 2N x S; rows (2k, 2k+1) hold dw(x_k, p)/dp.
using WarpJacobian = Eigen::MatrixXd;

struct WarpParams {
  SSMKind kind = SSMKind::Translation;
  Eigen::VectorXd values;
  // Reference box of the corners kind; unused by the other kinds.
  std::optional<CornersBox> anchor;

  int size() const { return static_cast<int>(values.size()); }
};

// Throws InvalidInput when the parameter vector does not fit its kind.
void validate(const WarpParams& p);

WarpParams identity_params(SSMKind kind, const std::optional<CornersBox>& anchor = std::nullopt);

WarpMatrix to_matrix(const WarpParams& p);

// Inverse of to_matrix for matrices inside the kind's group. The matrix is
// used as-is (no projection onto the group); callers pass products of
// same-kind matrices.
WarpParams from_matrix(SSMKind kind, const WarpMatrix& m,
                       const std::optional<CornersBox>& anchor = std::nullopt);

PixelCoords warp_points(const WarpParams& p, const PixelCoords& x);
Eigen::Vector2d warp_point(const WarpParams& p, const Eigen::Vector2d& x);

// p' with w(x, p') = w(w(x, dp), p).
WarpParams compose(const WarpParams& p, const WarpParams& dp);
WarpParams invert(const WarpParams& dp);

WarpJacobian warp_jacobian(const WarpParams& p, const PixelCoords& x);

// dw/dx at each point, packed as rows (2k, 2k+1) of a 2N x 2 matrix.
Eigen::MatrixX2d point_jacobian(const WarpParams& p, const PixelCoords& x);

// Least-squares fit of `kind` mapping src onto dst (exact on minimal sets).
// Homography-family kinds use Hartley-normalized DLT. The corners kind needs
// an anchor box.
WarpParams params_from_points(SSMKind kind, const PixelCoords& src, const PixelCoords& dst,
                              const std::optional<CornersBox>& anchor = std::nullopt);

CornersBox params_to_corners(const WarpParams& p, const CornersBox& init);

PixelCoords corners_as_coords(const CornersBox& box);
CornersBox coords_as_corners(const PixelCoords& pts);

// Normalized DLT homography from >= 4 correspondences.
WarpMatrix fit_homography_dlt(const PixelCoords& src, const PixelCoords& dst);

// exp of a square matrix by scaling and squaring with a Taylor core.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a);

// The sl3 generator basis.
const std::array<Eigen::Matrix3d, 8>& sl3_generators();

}  // namespace rbt

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace rbt {

// Points in image coordinates, one column per point.
using PixelCoords = Eigen::Matrix2Xd;

// Per-point intensity gradient, row k = (dI/dx, dI/dy) at point k.
using PatchGradient = Eigen::MatrixX2d;

// Single-channel image with real-valued intensities, row-major storage.
// Immutable after construction.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::vector<double> intensities);
  GrayImage(int width, int height, double fill);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<double>& pixels() const { return pixels_; }

  // Builds an image from a functor f(x, y) evaluated at every pixel.
  template <typename F>
  static GrayImage generate(int width, int height, F&& f) {
    std::vector<double> px(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) px[static_cast<std::size_t>(y) * width + x] = f(x, y);
    return GrayImage(width, height, std::move(px));
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

// Sampled intensities together with the coordinates they were read at.
struct Patch {
  Eigen::VectorXd values;
  PixelCoords coords;

  Eigen::Index size() const { return values.size(); }
};

// Four ordered corners: top-left, top-right, bottom-right, bottom-left.
struct CornersBox {
  Eigen::Matrix<double, 2, 4> pts = Eigen::Matrix<double, 2, 4>::Zero();

  CornersBox() = default;
  explicit CornersBox(const Eigen::Matrix<double, 2, 4>& m) : pts(m) {}

  // Axis-aligned rectangle with top-left (x, y).
  static CornersBox rect(double x, double y, double w, double h);

  Eigen::Vector2d corner(int i) const { return pts.col(i); }
  Eigen::Vector2d centroid() const { return pts.rowwise().mean(); }
  bool allFinite() const { return pts.allFinite(); }
};

struct SmoothingConfig {
  double sigma = 1.0;  // 5 taps cover +-2 sigma
};

struct GradientConfig {
  double step = 1.0;  // central-difference step in pixels
};

// Bilinear read with coordinates clamped to [0, w-1] x [0, h-1].
double sample_bilinear(const GrayImage& img, const Eigen::Vector2d& pt);

Patch extract_patch(const GrayImage& img, const PixelCoords& coords);

// Separable 5x5 Gaussian with border replication.
GrayImage gaussian_smooth(const GrayImage& img, const SmoothingConfig& cfg = {});

// Normalized 5-tap kernel used by gaussian_smooth.
std::array<double, 5> gaussian_kernel5(double sigma);

PatchGradient image_gradient(const GrayImage& img, const PixelCoords& coords,
                             const GradientConfig& cfg = {});

// res_x * res_y points, row-major, obtained by mapping a uniform grid on the
// unit square through the homography taking the unit square onto `corners`.
PixelCoords sampling_grid(const CornersBox& corners, int res_x, int res_y);

// Homography taking (0,0),(1,0),(1,1),(0,1) to the four corners.
// Throws GeometryError for self-intersecting or zero-area quads.
Eigen::Matrix3d unit_square_homography(const CornersBox& corners);

// Converts interleaved RGB (0..255) to luma with 0.299/0.587/0.114 weights.
GrayImage luma_from_rgb(int width, int height, const std::vector<double>& rgb);

}  // namespace rbt

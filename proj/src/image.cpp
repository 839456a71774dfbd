#include "rbt/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rbt/error.hpp"

namespace rbt {

GrayImage::GrayImage(int width, int height, std::vector<double> intensities)
    : width_(width), height_(height), pixels_(std::move(intensities)) {
  if (width < 2 || height < 2)
    throw InvalidInput("image must be at least 2x2, got " + std::to_string(width) + "x" +
                       std::to_string(height));
  if (pixels_.size() != static_cast<std::size_t>(width) * height)
    throw InvalidInput("image buffer size does not match dimensions");
  for (double v : pixels_)
    if (!std::isfinite(v)) throw InvalidInput("image contains non-finite intensity");
}

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height,
                std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                        static_cast<std::size_t>(std::max(height, 0)),
                                    fill)) {}

CornersBox CornersBox::rect(double x, double y, double w, double h) {
  Eigen::Matrix<double, 2, 4> m;
  m << x, x + w, x + w, x,  //
      y, y, y + h, y + h;
  return CornersBox(m);
}

double sample_bilinear(const GrayImage& img, const Eigen::Vector2d& pt) {
  if (!std::isfinite(pt.x()) || !std::isfinite(pt.y()))
    throw InvalidInput("non-finite sampling coordinate");
  const double x = std::clamp(pt.x(), 0.0, static_cast<double>(img.width() - 1));
  const double y = std::clamp(pt.y(), 0.0, static_cast<double>(img.height() - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  // keep the 2x2 neighbourhood inside the image on the far border
  x0 = std::min(x0, img.width() - 2);
  y0 = std::min(y0, img.height() - 2);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1.0 - ax) * img.at(x0, y0) + ax * img.at(x0 + 1, y0);
  const double bot = (1.0 - ax) * img.at(x0, y0 + 1) + ax * img.at(x0 + 1, y0 + 1);
  return (1.0 - ay) * top + ay * bot;
}

Patch extract_patch(const GrayImage& img, const PixelCoords& coords) {
  if (coords.cols() == 0) throw InvalidInput("extract_patch: empty coordinate set");
  Patch p;
  p.coords = coords;
  p.values.resize(coords.cols());
  for (Eigen::Index k = 0; k < coords.cols(); ++k) p.values[k] = sample_bilinear(img, coords.col(k));
  return p;
}

std::array<double, 5> gaussian_kernel5(double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("gaussian sigma must be positive");
  std::array<double, 5> k{};
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double d = i - 2;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

GrayImage gaussian_smooth(const GrayImage& img, const SmoothingConfig& cfg) {
  const auto k = gaussian_kernel5(cfg.sigma);
  const int w = img.width();
  const int h = img.height();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  std::vector<double> out(tmp.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * img.at(std::clamp(x + i, 0, w - 1), y);
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i)
        acc += k[i + 2] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return GrayImage(w, h, std::move(out));
}

PatchGradient image_gradient(const GrayImage& img, const PixelCoords& coords,
                             const GradientConfig& cfg) {
  const double h = cfg.step;
  PatchGradient g(coords.cols(), 2);
  const Eigen::Vector2d dx(h, 0.0), dy(0.0, h);
  for (Eigen::Index k = 0; k < coords.cols(); ++k) {
    const Eigen::Vector2d p = coords.col(k);
    g(k, 0) = (sample_bilinear(img, p + dx) - sample_bilinear(img, p - dx)) / (2.0 * h);
    g(k, 1) = (sample_bilinear(img, p + dy) - sample_bilinear(img, p - dy)) / (2.0 * h);
  }
  return g;
}

Eigen::Matrix3d unit_square_homography(const CornersBox& corners) {
  if (!corners.allFinite()) throw GeometryError("corners contain non-finite values");
  const auto& c = corners.pts;
  // Convex, consistently oriented quads only; anything else cannot be the
  // image of the unit square under a homography that keeps it in front.
  double sign = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d e1 = c.col((i + 1) % 4) - c.col(i);
    const Eigen::Vector2d e2 = c.col((i + 2) % 4) - c.col((i + 1) % 4);
    const double cross = e1.x() * e2.y() - e1.y() * e2.x();
    const double scale = e1.norm() * e2.norm();
    if (!(std::abs(cross) > 1e-12 * std::max(scale, 1e-300)))
      throw GeometryError("degenerate quadrilateral (collinear corners)");
    if (sign == 0.0) sign = cross;
    else if ((cross > 0) != (sign > 0))
      throw GeometryError("quadrilateral is self-intersecting or not convex");
  }

  const double x0 = c(0, 0), y0 = c(1, 0), x1 = c(0, 1), y1 = c(1, 1);
  const double x2 = c(0, 2), y2 = c(1, 2), x3 = c(0, 3), y3 = c(1, 3);
  const double sx = x0 - x1 + x2 - x3;
  const double sy = y0 - y1 + y2 - y3;
  Eigen::Matrix3d H;
  if (sx == 0.0 && sy == 0.0) {
    H << x1 - x0, x2 - x1, x0,  //
        y1 - y0, y2 - y1, y0,   //
        0.0, 0.0, 1.0;
    return H;
  }
  const double dx1 = x1 - x2, dx2 = x3 - x2, dy1 = y1 - y2, dy2 = y3 - y2;
  const double det = dx1 * dy2 - dx2 * dy1;
  if (std::abs(det) < 1e-300) throw GeometryError("degenerate quadrilateral");
  const double g = (sx * dy2 - sy * dx2) / det;
  const double hh = (dx1 * sy - dy1 * sx) / det;
  H << x1 - x0 + g * x1, x3 - x0 + hh * x3, x0,  //
      y1 - y0 + g * y1, y3 - y0 + hh * y3, y0,   //
      g, hh, 1.0;
  return H;
}

PixelCoords sampling_grid(const CornersBox& corners, int res_x, int res_y) {
  if (res_x < 2 || res_y < 2) throw InvalidInput("sampling resolution must be at least 2x2");
  const Eigen::Matrix3d H = unit_square_homography(corners);
  PixelCoords pts(2, static_cast<Eigen::Index>(res_x) * res_y);
  Eigen::Index k = 0;
  for (int j = 0; j < res_y; ++j) {
    const double v = static_cast<double>(j) / (res_y - 1);
    for (int i = 0; i < res_x; ++i, ++k) {
      const double u = static_cast<double>(i) / (res_x - 1);
      const Eigen::Vector3d q = H * Eigen::Vector3d(u, v, 1.0);
      pts.col(k) = q.head<2>() / q.z();
    }
  }
  return pts;
}

GrayImage luma_from_rgb(int width, int height, const std::vector<double>& rgb) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (rgb.size() != 3 * n) throw InvalidInput("rgb buffer size does not match dimensions");
  std::vector<double> px(n);
  for (std::size_t i = 0; i < n; ++i)
    px[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
  return GrayImage(width, height, std::move(px));
}

}  // namespace rbt

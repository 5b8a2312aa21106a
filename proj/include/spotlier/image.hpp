#ifndef SPOTLIER_IMAGE_HPP
#define SPOTLIER_IMAGE_HPP

#include <filesystem>
#include <vector>

namespace spotlier {

/// 2-D grayscale intensity field, row-major. Values are dimensionless
/// floats; load_image/save_image keep them in [0,1], intermediate fields
/// (reconstructions, filter responses) may exceed that range.
struct ImageGray {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  ImageGray() = default;
  ImageGray(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }

  std::size_t size() const { return data.size(); }
};

/// Read a PGM file (P5 binary or P2 ASCII, maxval <= 65535) and scale
/// intensities by maxval so the result lies in [0,1].
/// Throws ValidationError naming the offending field or byte offset.
ImageGray load_image(const std::filesystem::path& path);

/// Write an 8-bit binary PGM (P5, maxval 255). Intensity i is stored as
/// round(i*255) clamped to [0,255], round half away from zero.
void save_image(const ImageGray& img, const std::filesystem::path& path);

} // namespace spotlier

#endif

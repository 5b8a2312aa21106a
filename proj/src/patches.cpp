#include "spotlier/patches.hpp"

#include <cmath>

#include "spotlier/errors.hpp"

namespace spotlier {

PatchGrid make_grid(int image_h, int image_w, int patch_size, double overlap) {
  if (patch_size < 1) throw ValidationError("make_grid: patch_size must be positive");
  if (patch_size > image_h || patch_size > image_w)
    throw ValidationError("make_grid: patch size " + std::to_string(patch_size) +
                          " exceeds image " + std::to_string(image_h) + "x" +
                          std::to_string(image_w));
  if (!(overlap >= 0.0 && overlap < 1.0))
    throw ValidationError("make_grid: overlap must lie in [0, 1)");

  PatchGrid g;
  g.patch_size = patch_size;
  g.stride = std::max(1, static_cast<int>(std::lround(patch_size * (1.0 - overlap))));
  g.rows = (image_h - patch_size) / g.stride + 1;
  g.cols = (image_w - patch_size) / g.stride + 1;
  g.image_h = image_h;
  g.image_w = image_w;
  return g;
}

PatchMatrix extract_patches(const ImageGray& img, const PatchGrid& grid) {
  if (img.height != grid.image_h || img.width != grid.image_w)
    throw ValidationError("extract_patches: image " + std::to_string(img.height) + "x" +
                          std::to_string(img.width) + " does not match grid built for " +
                          std::to_string(grid.image_h) + "x" + std::to_string(grid.image_w));

  const int np = grid.patch_size;
  PatchMatrix pm;
  pm.grid = grid;
  pm.values.resize(grid.pixels_per_patch(), grid.patch_count());
  for (int j = 0; j < grid.cols; ++j) {
    for (int i = 0; i < grid.rows; ++i) {
      const int col = j * grid.rows + i;
      const int r0 = grid.row_offset(i);
      const int c0 = grid.col_offset(j);
      double* dst = pm.values.col(col).data();
      for (int c = 0; c < np; ++c)
        for (int r = 0; r < np; ++r) *dst++ = img.at(r0 + r, c0 + c);
    }
  }
  return pm;
}

Reconstruction reconstruct_from_patches(const PatchMatrix& pm) {
  const PatchGrid& g = pm.grid;
  if (pm.p() != g.pixels_per_patch() || pm.l() != g.patch_count())
    throw ValidationError("reconstruct_from_patches: matrix shape does not match grid");

  Reconstruction rec;
  rec.image = ImageGray(g.image_h, g.image_w, 0.0);
  rec.coverage.assign(rec.image.size(), 0);

  const int np = g.patch_size;
  for (int j = 0; j < g.cols; ++j) {
    for (int i = 0; i < g.rows; ++i) {
      const int col = j * g.rows + i;
      const int r0 = g.row_offset(i);
      const int c0 = g.col_offset(j);
      const double* src = pm.values.col(col).data();
      for (int c = 0; c < np; ++c) {
        for (int r = 0; r < np; ++r) {
          rec.image.at(r0 + r, c0 + c) += *src++;
          ++rec.coverage[static_cast<std::size_t>(r0 + r) * g.image_w + (c0 + c)];
        }
      }
    }
  }
  for (std::size_t k = 0; k < rec.image.size(); ++k)
    if (rec.coverage[k] > 0) rec.image.data[k] /= rec.coverage[k];
  return rec;
}

std::vector<bool> exclude_annotated_patches(const PatchGrid& grid, const AnnotationSet& ann) {
  for (std::size_t k = 0; k < ann.points.size(); ++k) {
    const Point2& p = ann.points[k];
    if (!(p.x >= 0.0 && p.x < grid.image_w && p.y >= 0.0 && p.y < grid.image_h))
      throw ValidationError("annotation " + std::to_string(k) + " at (" + std::to_string(p.x) +
                            ", " + std::to_string(p.y) + ") lies outside image " +
                            std::to_string(grid.image_h) + "x" + std::to_string(grid.image_w));
  }

  std::vector<bool> keep(static_cast<std::size_t>(grid.patch_count()), true);
  for (int j = 0; j < grid.cols; ++j) {
    for (int i = 0; i < grid.rows; ++i) {
      const double r0 = grid.row_offset(i);
      const double c0 = grid.col_offset(j);
      for (const Point2& p : ann.points) {
        if (p.y >= r0 && p.y < r0 + grid.patch_size && p.x >= c0 &&
            p.x < c0 + grid.patch_size) {
          keep[static_cast<std::size_t>(j) * grid.rows + i] = false;
          break;
        }
      }
    }
  }
  return keep;
}

} // namespace spotlier

#ifndef SPOTLIER_PATCHES_HPP
#define SPOTLIER_PATCHES_HPP

#include <Eigen/Core>
#include <vector>

#include "spotlier/image.hpp"
#include "spotlier/points.hpp"

namespace spotlier {

/// Regular grid of overlapping square patches fully inside the image.
/// Patch (i,j) has its top-left corner at (i*stride, j*stride); there are no
/// flush-to-border patches, so a right/bottom margin may stay uncovered.
struct PatchGrid {
  int patch_size = 0;
  int stride = 0;
  int rows = 0;
  int cols = 0;
  int image_h = 0;
  int image_w = 0;

  int patch_count() const { return rows * cols; }
  int pixels_per_patch() const { return patch_size * patch_size; }
  int row_offset(int i) const { return i * stride; }
  int col_offset(int j) const { return j * stride; }
  /// Extent of the covered region (exclusive upper bounds).
  int covered_h() const { return (rows - 1) * stride + patch_size; }
  int covered_w() const { return (cols - 1) * stride + patch_size; }
};

/// Patch data matrix Y: one column per patch, P = patch_size^2 rows.
/// Columns are ordered column-major over the grid (column j*rows + i holds
/// patch (i,j)); within a patch, pixels are vectorized column-major as well
/// (patch pixel (r,c) lands at row c*patch_size + r).
struct PatchMatrix {
  Eigen::MatrixXd values;
  PatchGrid grid;

  int p() const { return static_cast<int>(values.rows()); }
  int l() const { return static_cast<int>(values.cols()); }
};

/// Image rebuilt from overlapping patches plus the per-pixel patch count.
struct Reconstruction {
  ImageGray image;
  std::vector<int> coverage; // row-major, same shape as image
};

/// stride = round(patch_size * (1 - overlap)), at least 1.
/// Throws ValidationError if the patch does not fit in the image or
/// overlap is outside [0, 1).
PatchGrid make_grid(int image_h, int image_w, int patch_size, double overlap);

PatchMatrix extract_patches(const ImageGray& img, const PatchGrid& grid);

/// Covered pixels get the arithmetic mean of every patch entry mapping to
/// them; uncovered pixels are 0 with coverage 0.
Reconstruction reconstruct_from_patches(const PatchMatrix& pm);

/// Keep-mask over patch columns (grid column-major order): a patch is kept
/// iff no annotation point lies inside its [offset, offset+patch_size)
/// bounds on both axes. Annotations outside the image bounds are a
/// ValidationError naming the point index.
std::vector<bool> exclude_annotated_patches(const PatchGrid& grid, const AnnotationSet& ann);

} // namespace spotlier

#endif

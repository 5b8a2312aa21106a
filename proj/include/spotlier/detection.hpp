#ifndef SPOTLIER_DETECTION_HPP
#define SPOTLIER_DETECTION_HPP

#include <Eigen/Core>

#include "spotlier/patches.hpp"
#include "spotlier/points.hpp"
#include "spotlier/robust_coding.hpp"

namespace spotlier {

/// Nonnegative outlier amplitude field in [0,1] plus the patch coverage it
/// was assembled from (0 on the uncovered right/bottom margin).
struct OutlierImage {
  ImageGray image;
  std::vector<int> coverage;
};

/// Clamp R-hat entries at 0 from below (bright anomalies are positive
/// deviations), reassemble by overlap averaging, then divide by the image
/// maximum. An all-zero field stays all-zero.
OutlierImage outlier_image(const Eigen::MatrixXd& r_hat, const PatchGrid& grid);

/// Binary mask (value > level), 8-connected component labeling, one
/// detection per component at the unweighted mean of its pixel coordinates,
/// scored by the component's maximum value.
DetectionSet threshold_and_group(const OutlierImage& oi, double level);

struct DetectParams {
  double alpha = 1e-5;
  double beta = 0.0; // no default in the CLI; must be chosen explicitly
  int patch_size = 27;
  double overlap = 0.5;
  double level = 0.07;
  AdmmOptions admm;
};

struct FrameDetection {
  DetectionSet detections;
  OutlierImage outliers;
  RobustCodingResult solve;
};

/// extract_patches -> robust_sparse_code -> outlier_image ->
/// threshold_and_group. Deterministic given inputs.
FrameDetection detect_frame(const ImageGray& img, const Dictionary& d,
                            const DetectParams& params);

} // namespace spotlier

#endif

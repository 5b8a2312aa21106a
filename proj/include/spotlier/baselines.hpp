#ifndef SPOTLIER_BASELINES_HPP
#define SPOTLIER_BASELINES_HPP

#include <string>

#include "spotlier/detection.hpp"
#include "spotlier/image.hpp"

namespace spotlier {

/// Square convolution kernel geometry. size must be odd and >= 3; DoG
/// additionally requires sigma < sigma2.
struct KernelSpec {
  int size = 5;
  double sigma = 0.8;
  double sigma2 = 0.0; // second Gaussian for DoG only
};

enum class StructuringElement { square3x3, cross3x3 };

struct GsothOptions {
  /// Pre-smoothing Gaussian; size <= 1 disables smoothing.
  int smooth_size = 5;
  double smooth_sigma = 0.8;
  StructuringElement element = StructuringElement::square3x3;
  /// Subtract the opening from the raw input instead of the smoothed one.
  bool subtract_original = false;
};

/// All responses use reflective border padding, are clamped at 0 from below
/// and normalized by their maximum, so they share threshold_and_group with
/// the sparse-coding detector. Coverage is 1 everywhere.

/// Laplacian-of-Gaussian, sign flipped so bright blobs respond positively;
/// the sampled kernel is shifted to zero sum.
OutlierImage log_response(const ImageGray& img, const KernelSpec& spec = {5, 0.8});

/// Difference of two unit-sum Gaussians (sigma < sigma2).
OutlierImage dog_response(const ImageGray& img, const KernelSpec& spec = {5, 0.5, 0.8});

/// Grayscale-opening top-hat: smooth, open with a 3x3 flat element
/// (erosion then dilation), subtract the opening.
OutlierImage gsoth_response(const ImageGray& img, const GsothOptions& opts = {});

/// Grayscale morphology with reflective padding; exposed for the top-hat
/// pipeline's tests.
ImageGray erode(const ImageGray& img, StructuringElement se);
ImageGray dilate(const ImageGray& img, StructuringElement se);

enum class BaselineMethod { log, dog, gsoth };

/// Parse "log" / "dog" / "gsoth"; anything else is a ValidationError.
BaselineMethod parse_baseline_method(const std::string& name);

DetectionSet baseline_detect(const ImageGray& img, BaselineMethod method, double level,
                             const GsothOptions& gsoth = {});

} // namespace spotlier

#endif

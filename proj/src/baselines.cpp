#include "spotlier/baselines.hpp"

#include <cmath>
#include <vector>

#include "spotlier/errors.hpp"

namespace spotlier {

namespace {

// Reflective padding: index -1 maps to 0, -2 to 1, n to n-1, ...
inline int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - 1 - i;
  return i;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  const int rad = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  double sum = 0.0;
  for (int y = -rad; y <= rad; ++y)
    for (int x = -rad; x <= rad; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>(y + rad) * size + (x + rad)] = v;
      sum += v;
    }
  for (double& v : k) v /= sum;
  return k;
}

// Negated Laplacian-of-Gaussian samples, shifted to exactly zero sum.
std::vector<double> log_kernel(int size, double sigma) {
  const int rad = size / 2;
  const double s2 = sigma * sigma;
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  double sum = 0.0;
  for (int y = -rad; y <= rad; ++y)
    for (int x = -rad; x <= rad; ++x) {
      const double r2 = x * x + y * y;
      const double v = -((r2 - 2.0 * s2) / (s2 * s2)) * std::exp(-r2 / (2.0 * s2));
      k[static_cast<std::size_t>(y + rad) * size + (x + rad)] = v;
      sum += v;
    }
  const double mean = sum / (size * size);
  for (double& v : k) v -= mean;
  return k;
}

ImageGray convolve_reflect(const ImageGray& img, const std::vector<double>& kernel, int size) {
  const int rad = size / 2;
  ImageGray out(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int dy = -rad; dy <= rad; ++dy)
        for (int dx = -rad; dx <= rad; ++dx)
          acc += kernel[static_cast<std::size_t>(dy + rad) * size + (dx + rad)] *
                 img.at(reflect(r + dy, img.height), reflect(c + dx, img.width));
      out.at(r, c) = acc;
    }
  }
  return out;
}

void check_size(const ImageGray& img, int size, const char* op) {
  if (size < 3 || size % 2 == 0)
    throw ValidationError(std::string(op) + ": kernel size must be odd and >= 3");
  if (img.height < size || img.width < size)
    throw ValidationError(std::string(op) + ": image " + std::to_string(img.height) + "x" +
                          std::to_string(img.width) + " smaller than " + std::to_string(size) +
                          "x" + std::to_string(size) + " kernel");
}

OutlierImage finish_response(ImageGray&& resp) {
  double peak = 0.0;
  for (double& v : resp.data) {
    if (v < 0.0) v = 0.0;
    peak = std::max(peak, v);
  }
  // Cancellation dust from the zero-sum kernels must not be amplified by
  // the max normalization: anything this small is a flat response.
  if (peak <= 1e-12) {
    for (double& v : resp.data) v = 0.0;
    peak = 0.0;
  }
  if (peak > 0.0)
    for (double& v : resp.data) v /= peak;
  OutlierImage oi;
  oi.coverage.assign(resp.size(), 1);
  oi.image = std::move(resp);
  return oi;
}

ImageGray morph(const ImageGray& img, StructuringElement se, bool erosion) {
  ImageGray out(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      double best = img.at(r, c);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (se == StructuringElement::cross3x3 && dx != 0 && dy != 0) continue;
          const double v = img.at(reflect(r + dy, img.height), reflect(c + dx, img.width));
          best = erosion ? std::min(best, v) : std::max(best, v);
        }
      }
      out.at(r, c) = best;
    }
  }
  return out;
}

} // namespace

ImageGray erode(const ImageGray& img, StructuringElement se) { return morph(img, se, true); }
ImageGray dilate(const ImageGray& img, StructuringElement se) { return morph(img, se, false); }

OutlierImage log_response(const ImageGray& img, const KernelSpec& spec) {
  check_size(img, spec.size, "log_response");
  if (!(spec.sigma > 0.0)) throw ValidationError("log_response: sigma must be positive");
  return finish_response(convolve_reflect(img, log_kernel(spec.size, spec.sigma), spec.size));
}

OutlierImage dog_response(const ImageGray& img, const KernelSpec& spec) {
  check_size(img, spec.size, "dog_response");
  if (!(spec.sigma > 0.0 && spec.sigma2 > 0.0))
    throw ValidationError("dog_response: sigmas must be positive");
  if (!(spec.sigma < spec.sigma2))
    throw ValidationError("dog_response: requires sigma < sigma2, got " +
                          std::to_string(spec.sigma) + " >= " + std::to_string(spec.sigma2));
  std::vector<double> k = gaussian_kernel(spec.size, spec.sigma);
  const std::vector<double> k2 = gaussian_kernel(spec.size, spec.sigma2);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] -= k2[i];
  return finish_response(convolve_reflect(img, k, spec.size));
}

OutlierImage gsoth_response(const ImageGray& img, const GsothOptions& opts) {
  check_size(img, 3, "gsoth_response");
  ImageGray smoothed = img;
  if (opts.smooth_size > 1) {
    check_size(img, opts.smooth_size, "gsoth_response");
    if (!(opts.smooth_sigma > 0.0))
      throw ValidationError("gsoth_response: smoothing sigma must be positive");
    smoothed = convolve_reflect(img, gaussian_kernel(opts.smooth_size, opts.smooth_sigma),
                                opts.smooth_size);
  }
  const ImageGray opened = dilate(erode(smoothed, opts.element), opts.element);
  const ImageGray& base = opts.subtract_original ? img : smoothed;
  ImageGray resp(img.height, img.width);
  for (std::size_t i = 0; i < resp.size(); ++i) resp.data[i] = base.data[i] - opened.data[i];
  return finish_response(std::move(resp));
}

BaselineMethod parse_baseline_method(const std::string& name) {
  if (name == "log") return BaselineMethod::log;
  if (name == "dog") return BaselineMethod::dog;
  if (name == "gsoth") return BaselineMethod::gsoth;
  throw ValidationError("unknown baseline method '" + name + "' (expected log|dog|gsoth)");
}

DetectionSet baseline_detect(const ImageGray& img, BaselineMethod method, double level,
                             const GsothOptions& gsoth) {
  OutlierImage resp;
  switch (method) {
    case BaselineMethod::log: resp = log_response(img); break;
    case BaselineMethod::dog: resp = dog_response(img); break;
    case BaselineMethod::gsoth: resp = gsoth_response(img, gsoth); break;
  }
  return threshold_and_group(resp, level);
}

} // namespace spotlier

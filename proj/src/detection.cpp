#include "spotlier/detection.hpp"

#include <algorithm>

#include "spotlier/errors.hpp"

namespace spotlier {

OutlierImage outlier_image(const Eigen::MatrixXd& r_hat, const PatchGrid& grid) {
  PatchMatrix pm;
  pm.grid = grid;
  pm.values = r_hat.cwiseMax(0.0);
  Reconstruction rec = reconstruct_from_patches(pm);

  double peak = 0.0;
  for (double v : rec.image.data) peak = std::max(peak, v);
  if (peak > 0.0)
    for (double& v : rec.image.data) v /= peak;
  return {std::move(rec.image), std::move(rec.coverage)};
}

DetectionSet threshold_and_group(const OutlierImage& oi, double level) {
  if (!(level >= 0.0 && level <= 1.0))
    throw ValidationError("threshold_and_group: level must lie in [0, 1]");

  const int h = oi.image.height, w = oi.image.width;
  DetectionSet out;
  std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
  std::vector<int> stack;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t k0 = static_cast<std::size_t>(r) * w + c;
      if (label[k0] >= 0 || !(oi.image.data[k0] > level)) continue;

      // Flood-fill one 8-connected component.
      double sum_r = 0.0, sum_c = 0.0, peak = 0.0;
      long count = 0;
      label[k0] = 0;
      stack.assign(1, static_cast<int>(k0));
      while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        const int rr = k / w, cc = k % w;
        sum_r += rr;
        sum_c += cc;
        peak = std::max(peak, oi.image.data[k]);
        ++count;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = rr + dr, nc = cc + dc;
            if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
            const std::size_t nk = static_cast<std::size_t>(nr) * w + nc;
            if (label[nk] < 0 && oi.image.data[nk] > level) {
              label[nk] = 0;
              stack.push_back(static_cast<int>(nk));
            }
          }
        }
      }
      out.points.push_back({sum_c / count, sum_r / count, peak});
    }
  }
  return out;
}

FrameDetection detect_frame(const ImageGray& img, const Dictionary& d,
                            const DetectParams& params) {
  if (d.p() != params.patch_size * params.patch_size)
    throw ValidationError("detect_frame: dictionary P=" + std::to_string(d.p()) +
                          " does not match patch size " + std::to_string(params.patch_size) +
                          " (P should be " +
                          std::to_string(params.patch_size * params.patch_size) + ")");

  const PatchGrid grid = make_grid(img.height, img.width, params.patch_size, params.overlap);
  PatchMatrix pm = extract_patches(img, grid);

  RobustCodingProblem prob;
  prob.y = std::move(pm.values);
  prob.d = d;
  prob.alpha = params.alpha;
  prob.beta = params.beta;

  FrameDetection fd;
  fd.solve = robust_sparse_code(prob, params.admm);
  fd.outliers = outlier_image(fd.solve.r, grid);
  fd.detections = threshold_and_group(fd.outliers, params.level);
  return fd;
}

} // namespace spotlier

#ifndef SPOTLIER_EVALUATION_HPP
#define SPOTLIER_EVALUATION_HPP

#include <filesystem>
#include <utility>
#include <vector>

#include "spotlier/detection.hpp"
#include "spotlier/points.hpp"

namespace spotlier {

struct Confusion {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

enum class MatchMode {
  /// A detection within `radius` of ANY annotation is a TP, otherwise FP;
  /// an annotation with no detection within radius is an FN. Clustered
  /// detections inside one disk all count as TPs.
  paper_literal,
  /// Greedy nearest-pair matching: pairs sorted by (distance, detection
  /// index, annotation index), each point used at most once, pairs beyond
  /// radius rejected.
  one_to_one,
};

Confusion match_detections(const DetectionSet& dets, const AnnotationSet& truth,
                           double radius, MatchMode mode = MatchMode::paper_literal);

/// precision = TP/(TP+FP), recall = TP/(TP+FN); 0/0 is defined as 1
/// (empty-vs-empty convention).
std::pair<double, double> precision_recall(const Confusion& c);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  Confusion confusion;
};

struct PrCurve {
  std::vector<PrPoint> points; // ordered by strictly increasing threshold
  double auc = 0.0;
};

/// Micro-averaged precision-recall sweep: for each threshold, every frame's
/// outlier image is thresholded and grouped, confusions are summed over
/// frames, and one PR point is emitted. AUC is the trapezoid over the
/// observed recall range, points sorted by (recall, precision), with no
/// extrapolation; a curve collapsed onto a single recall value contributes
/// the degenerate rectangle recall * max precision.
PrCurve pr_curve(const std::vector<OutlierImage>& outlier_images,
                 const std::vector<AnnotationSet>& truths, double radius,
                 const std::vector<double>& thresholds,
                 MatchMode mode = MatchMode::paper_literal);

/// Same AUC rule applied to precomputed points (used when re-deriving a
/// curve from per-threshold detection sets).
double pr_auc(const std::vector<PrPoint>& points);

/// Pearson product-moment correlation; requires length >= 2 and nonzero
/// variance in both sequences.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// CSV `threshold,tp,fp,fn,precision,recall` rows plus a final
/// `auc,<value>` trailer line.
void write_pr_csv(const PrCurve& curve, const std::filesystem::path& path);

} // namespace spotlier

#endif

#include "spotlier/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include "spotlier/errors.hpp"

namespace spotlier {

namespace {

inline double dist2(double ax, double ay, double bx, double by) {
  const double dx = ax - bx, dy = ay - by;
  return dx * dx + dy * dy;
}

} // namespace

Confusion match_detections(const DetectionSet& dets, const AnnotationSet& truth,
                           double radius, MatchMode mode) {
  if (!(radius > 0.0)) throw ValidationError("match_detections: radius must be positive");
  const double r2 = radius * radius;
  Confusion c;

  if (mode == MatchMode::paper_literal) {
    for (const Detection& d : dets.points) {
      bool hit = false;
      for (const Point2& t : truth.points)
        if (dist2(d.x, d.y, t.x, t.y) <= r2) {
          hit = true;
          break;
        }
      hit ? ++c.tp : ++c.fp;
    }
    for (const Point2& t : truth.points) {
      bool hit = false;
      for (const Detection& d : dets.points)
        if (dist2(d.x, d.y, t.x, t.y) <= r2) {
          hit = true;
          break;
        }
      if (!hit) ++c.fn;
    }
    return c;
  }

  // one_to_one: greedy over candidate pairs in (distance, det, ann) order.
  struct Pair {
    double d2;
    int det, ann;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < static_cast<int>(dets.points.size()); ++i)
    for (int j = 0; j < static_cast<int>(truth.points.size()); ++j) {
      const double d2 = dist2(dets.points[i].x, dets.points[i].y, truth.points[j].x,
                              truth.points[j].y);
      if (d2 <= r2) pairs.push_back({d2, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.d2, a.det, a.ann) < std::tie(b.d2, b.det, b.ann);
  });
  std::vector<bool> det_used(dets.points.size(), false), ann_used(truth.points.size(), false);
  for (const Pair& p : pairs) {
    if (det_used[p.det] || ann_used[p.ann]) continue;
    det_used[p.det] = ann_used[p.ann] = true;
    ++c.tp;
  }
  c.fp = static_cast<long>(dets.points.size()) - c.tp;
  c.fn = static_cast<long>(truth.points.size()) - c.tp;
  return c;
}

std::pair<double, double> precision_recall(const Confusion& c) {
  const double precision = (c.tp + c.fp == 0) ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
  const double recall = (c.tp + c.fn == 0) ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  return {precision, recall};
}

double pr_auc(const std::vector<PrPoint>& points) {
  if (points.empty()) return 0.0;
  std::vector<std::pair<double, double>> rp; // (recall, precision)
  rp.reserve(points.size());
  for (const PrPoint& p : points) rp.emplace_back(p.recall, p.precision);
  std::sort(rp.begin(), rp.end());

  if (rp.front().first == rp.back().first) {
    // Single observed recall value: degenerate rectangle.
    double pmax = 0.0;
    for (const auto& [r, p] : rp) pmax = std::max(pmax, p);
    return rp.front().first * pmax;
  }
  double auc = 0.0;
  for (std::size_t i = 1; i < rp.size(); ++i)
    auc += (rp[i].first - rp[i - 1].first) * 0.5 * (rp[i].second + rp[i - 1].second);
  return auc;
}

PrCurve pr_curve(const std::vector<OutlierImage>& outlier_images,
                 const std::vector<AnnotationSet>& truths, double radius,
                 const std::vector<double>& thresholds, MatchMode mode) {
  if (outlier_images.size() != truths.size())
    throw ValidationError("pr_curve: " + std::to_string(outlier_images.size()) +
                          " outlier images vs " + std::to_string(truths.size()) +
                          " annotation frames");
  if (thresholds.empty()) throw ValidationError("pr_curve: empty threshold list");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0))
      throw ValidationError("pr_curve: threshold outside [0, 1]");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw ValidationError("pr_curve: thresholds must be strictly increasing");
  }

  PrCurve curve;
  curve.points.reserve(thresholds.size());
  for (double level : thresholds) {
    Confusion total;
    for (std::size_t f = 0; f < outlier_images.size(); ++f) {
      const DetectionSet dets = threshold_and_group(outlier_images[f], level);
      total += match_detections(dets, truths[f], radius, mode);
    }
    const auto [precision, recall] = precision_recall(total);
    curve.points.push_back({level, precision, recall, total});
  }
  curve.auc = pr_auc(curve.points);
  return curve;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("pearson: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw ValidationError("pearson: need at least 2 samples");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw ValidationError("pearson: undefined correlation (zero variance input)");
  return sab / std::sqrt(saa * sbb);
}

void write_pr_csv(const PrCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  char buf[40];
  out << "threshold,tp,fp,fn,precision,recall\n";
  for (const PrPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.threshold);
    out << buf << "," << p.confusion.tp << "," << p.confusion.fp << "," << p.confusion.fn;
    std::snprintf(buf, sizeof(buf), "%.17g", p.precision);
    out << "," << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", p.recall);
    out << "," << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf), "%.17g", curve.auc);
  out << "auc," << buf << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

} // namespace spotlier

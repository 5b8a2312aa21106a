#ifndef SPOTLIER_POINTS_HPP
#define SPOTLIER_POINTS_HPP

#include <filesystem>
#include <vector>

namespace spotlier {

/// Pixel coordinates are 0-based throughout: x is the column index, y the
/// row index. Annotation and detection CSVs use this convention.

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Ground-truth point annotations for one frame.
struct AnnotationSet {
  int frame = 0;
  std::vector<Point2> points;
};

struct Detection {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
};

/// Algorithm output for one frame.
struct DetectionSet {
  int frame = 0;
  std::vector<Detection> points;
};

/// Annotation CSV: header `frame,x,y`, one row per point.
/// Rows may appear in any order; returns one set per frame id 0..frames-1
/// (frames < 0 infers max frame id + 1). Frame ids outside the range are a
/// ValidationError naming the row.
std::vector<AnnotationSet> read_annotation_csv(const std::filesystem::path& path,
                                               int frames = -1);
void write_annotation_csv(const std::vector<AnnotationSet>& sets,
                          const std::filesystem::path& path);

/// Detection CSV: header `frame,x,y,score`.
std::vector<DetectionSet> read_detection_csv(const std::filesystem::path& path,
                                             int frames = -1);
void write_detection_csv(const std::vector<DetectionSet>& sets,
                         const std::filesystem::path& path);

} // namespace spotlier

#endif

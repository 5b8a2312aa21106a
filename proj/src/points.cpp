#include "spotlier/points.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spotlier/errors.hpp"

namespace spotlier {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const char* what, int row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("CSV row ") + std::to_string(row) + ": bad " + what +
                          " value '" + s + "'");
  }
}

struct Row {
  int frame;
  std::vector<double> vals;
};

std::vector<Row> read_rows(const std::filesystem::path& path, const std::string& header,
                           std::size_t ncols) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw ValidationError("CSV header mismatch in " + path.string() + ": expected '" + header +
                          "', got '" + line + "'");
  std::vector<Row> rows;
  int rowno = 1;
  while (std::getline(in, line)) {
    ++rowno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_row(line);
    if (fields.size() != ncols)
      throw ValidationError("CSV row " + std::to_string(rowno) + " in " + path.string() +
                            ": expected " + std::to_string(ncols) + " fields, got " +
                            std::to_string(fields.size()));
    Row r;
    r.frame = static_cast<int>(parse_number(fields[0], "frame", rowno));
    for (std::size_t i = 1; i < ncols; ++i)
      r.vals.push_back(parse_number(fields[i], "coordinate", rowno));
    rows.push_back(std::move(r));
  }
  return rows;
}

int frame_span(const std::vector<Row>& rows, int frames, const char* what) {
  int max_id = -1;
  for (const auto& r : rows) {
    if (r.frame < 0) throw ValidationError(std::string(what) + ": negative frame id");
    max_id = std::max(max_id, r.frame);
  }
  if (frames < 0) return max_id + 1;
  if (max_id >= frames)
    throw ValidationError(std::string(what) + ": frame id " + std::to_string(max_id) +
                          " outside expected range [0, " + std::to_string(frames) + ")");
  return frames;
}

} // namespace

std::vector<AnnotationSet> read_annotation_csv(const std::filesystem::path& path, int frames) {
  const auto rows = read_rows(path, "frame,x,y", 3);
  const int n = frame_span(rows, frames, "annotation CSV");
  std::vector<AnnotationSet> sets(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f) sets[f].frame = f;
  for (const auto& r : rows) sets[r.frame].points.push_back({r.vals[0], r.vals[1]});
  return sets;
}

void write_annotation_csv(const std::vector<AnnotationSet>& sets,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "frame,x,y\n";
  for (const auto& s : sets)
    for (const auto& p : s.points)
      out << s.frame << "," << fmt17(p.x) << "," << fmt17(p.y) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<DetectionSet> read_detection_csv(const std::filesystem::path& path, int frames) {
  const auto rows = read_rows(path, "frame,x,y,score", 4);
  const int n = frame_span(rows, frames, "detection CSV");
  std::vector<DetectionSet> sets(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f) sets[f].frame = f;
  for (const auto& r : rows) sets[r.frame].points.push_back({r.vals[0], r.vals[1], r.vals[2]});
  return sets;
}

void write_detection_csv(const std::vector<DetectionSet>& sets,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "frame,x,y,score\n";
  for (const auto& s : sets)
    for (const auto& d : s.points)
      out << s.frame << "," << fmt17(d.x) << "," << fmt17(d.y) << "," << fmt17(d.score) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

} // namespace spotlier

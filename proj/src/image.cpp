#include "spotlier/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spotlier/errors.hpp"

namespace spotlier {

namespace {

// Token scanner for the PGM header. Tracks the byte offset so parse errors
// can point at the exact position.
struct HeaderScanner {
  const std::string& buf;
  std::size_t pos = 0;

  bool is_space(char c) const {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
  }

  void skip_space_and_comments() {
    while (pos < buf.size()) {
      if (is_space(buf[pos])) {
        ++pos;
      } else if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  }

  std::string token(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos;
    while (pos < buf.size() && !is_space(buf[pos]) && buf[pos] != '#') ++pos;
    if (pos == start)
      throw ValidationError(std::string("malformed PGM header: missing ") + field +
                            " at byte offset " + std::to_string(start));
    return buf.substr(start, pos - start);
  }

  long integer(const char* field) {
    const std::size_t at = pos;
    const std::string t = token(field);
    try {
      std::size_t used = 0;
      const long v = std::stol(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(std::string("malformed PGM header: field ") + field +
                            " is not an integer at byte offset " + std::to_string(at));
    }
  }
};

} // namespace

ImageGray load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  HeaderScanner sc{buf};
  const std::string magic = sc.token("magic");
  if (magic != "P5" && magic != "P2") {
    if (magic == "P1" || magic == "P3" || magic == "P4" || magic == "P6")
      throw ValidationError("unsupported PGM format " + magic + " (only P5/P2 grayscale)");
    throw ValidationError("malformed PGM header: bad magic '" + magic + "'");
  }

  const long width = sc.integer("width");
  const long height = sc.integer("height");
  const long maxval = sc.integer("maxval");
  if (width < 1 || height < 1)
    throw ValidationError("malformed PGM header: non-positive dimensions " +
                          std::to_string(width) + "x" + std::to_string(height));
  if (maxval < 1 || maxval > 65535)
    throw ValidationError("malformed PGM header: maxval " + std::to_string(maxval) +
                          " outside [1, 65535]");

  ImageGray img(static_cast<int>(height), static_cast<int>(width));
  const std::size_t n = img.size();
  const double scale = 1.0 / static_cast<double>(maxval);

  if (magic == "P5") {
    // Exactly one whitespace byte separates maxval from the payload.
    if (sc.pos >= buf.size() || !sc.is_space(buf[sc.pos]))
      throw ValidationError("malformed PGM header: missing separator after maxval at byte offset " +
                            std::to_string(sc.pos));
    std::size_t off = sc.pos + 1;
    const int bytes_per = maxval > 255 ? 2 : 1;
    const std::size_t need = n * bytes_per;
    if (buf.size() - off < need)
      throw ValidationError("truncated PGM pixel payload at byte offset " +
                            std::to_string(buf.size()) + ": need " + std::to_string(need) +
                            " bytes from offset " + std::to_string(off));
    for (std::size_t i = 0; i < n; ++i) {
      unsigned v = static_cast<unsigned char>(buf[off++]);
      if (bytes_per == 2) v = (v << 8) | static_cast<unsigned char>(buf[off++]); // big-endian
      img.data[i] = static_cast<double>(v) * scale;
    }
  } else { // P2
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t at = sc.pos;
      sc.skip_space_and_comments();
      if (sc.pos >= buf.size())
        throw ValidationError("truncated PGM pixel payload at byte offset " +
                              std::to_string(at) + ": pixel " + std::to_string(i) + " of " +
                              std::to_string(n) + " missing");
      const long v = sc.integer("pixel");
      if (v < 0 || v > maxval)
        throw ValidationError("PGM pixel " + std::to_string(i) + " value " + std::to_string(v) +
                              " outside [0, maxval]");
      img.data[i] = static_cast<double>(v) * scale;
    }
  }
  return img;
}

void save_image(const ImageGray& img, const std::filesystem::path& path) {
  if (img.height < 1 || img.width < 1 || img.data.size() != img.size())
    throw ValidationError("save_image: invalid image dimensions");

  std::string out;
  out.reserve(img.size() + 32);
  out += "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  for (double v : img.data) {
    long q = std::lround(v * 255.0);
    if (q < 0) q = 0;
    if (q > 255) q = 255;
    out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

} // namespace spotlier

#include "spotlier/synth.hpp"

#include <Eigen/QR>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "spotlier/errors.hpp"
#include "spotlier/patches.hpp"
#include "spotlier/rng.hpp"

namespace spotlier {

namespace {

// Substream salts so background / spots / noise draws never interleave.
constexpr std::uint64_t kDictStream = 0xD1C7;
constexpr std::uint64_t kBackgroundStream = 0xBAC6;
constexpr std::uint64_t kSpotStream = 0x5907;
constexpr std::uint64_t kNoiseStream = 0x401E;

} // namespace

Dictionary make_planted_dictionary(int patch_size, int k, std::uint64_t seed,
                                   int max_frequency) {
  if (patch_size < 1 || k < 1)
    throw ValidationError("make_planted_dictionary: bad dimensions");
  if (max_frequency < 1)
    throw ValidationError("make_planted_dictionary: max_frequency must be >= 1");
  Rng rng(Rng::derive(seed, kDictStream));
  const int p = patch_size * patch_size;
  Dictionary d;
  d.atoms.resize(p, k);

  // Atom 0 carries the flat component so the per-frame intensity offset
  // stays inside the span; the rest are zero-mean low-pass random fields
  // (mutually near-orthogonal), cut off around max_frequency cycles/patch.
  d.atoms.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(p)));

  // Gaussian low-pass whose gain drops to e^-1/2 at max_frequency cycles
  // per patch; keeps the random-field subspace comfortably wider than k.
  const double sigma = patch_size / (2.0 * M_PI * max_frequency);
  const int rad = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kern(2 * rad + 1);
  for (int t = -rad; t <= rad; ++t) kern[t + rad] = std::exp(-(t * t) / (2.0 * sigma * sigma));

  auto wrap = [patch_size](int i) { return ((i % patch_size) + patch_size) % patch_size; };
  Eigen::MatrixXd field(patch_size, patch_size), tmp(patch_size, patch_size);
  for (int a = 1; a < k; ++a) {
    for (int c = 0; c < patch_size; ++c)
      for (int r = 0; r < patch_size; ++r) field(r, c) = rng.normal();
    // separable periodic smoothing
    for (int c = 0; c < patch_size; ++c)
      for (int r = 0; r < patch_size; ++r) {
        double acc = 0.0;
        for (int t = -rad; t <= rad; ++t) acc += kern[t + rad] * field(wrap(r + t), c);
        tmp(r, c) = acc;
      }
    for (int c = 0; c < patch_size; ++c)
      for (int r = 0; r < patch_size; ++r) {
        double acc = 0.0;
        for (int t = -rad; t <= rad; ++t) acc += kern[t + rad] * tmp(r, wrap(c + t));
        field(r, c) = acc;
      }
    Eigen::VectorXd atom(p);
    for (int c = 0; c < patch_size; ++c)
      for (int r = 0; r < patch_size; ++r) atom[c * patch_size + r] = field(r, c);
    atom.array() -= atom.mean();
    const double n = atom.norm();
    if (n > 1e-12) atom /= n;
    d.atoms.col(a) = atom;
  }
  return d;
}

ImageGray make_background(const SynthSpec& spec, int frame_index) {
  const Dictionary dict =
      make_planted_dictionary(spec.patch_size, spec.background_atoms, spec.seed);
  Rng rng(Rng::derive(Rng::derive(spec.seed, kBackgroundStream), frame_index));

  const PatchGrid grid = make_grid(spec.image_h, spec.image_w, spec.patch_size, spec.overlap);
  PatchMatrix pm;
  pm.grid = grid;
  pm.values.setZero(grid.pixels_per_patch(), grid.patch_count());
  for (int col = 0; col < grid.patch_count(); ++col) {
    for (int s = 0; s < spec.background_sparsity; ++s) {
      const int atom = static_cast<int>(rng.uniform_index(spec.background_atoms));
      pm.values.col(col) += rng.uniform(0.2, 1.0) * dict.atoms.col(atom);
    }
  }
  ImageGray img = reconstruct_from_patches(pm).image;

  double lo = 0.0, hi = 0.0;
  for (double v : img.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  if (span > 0.0)
    for (double& v : img.data) v = 0.6 * (v - lo) / span;
  return img;
}

std::pair<ImageGray, AnnotationSet> implant_spots(const ImageGray& img, const SynthSpec& spec,
                                                  int frame_index) {
  AnnotationSet ann;
  ann.frame = frame_index;
  ImageGray out = img;
  if (spec.spots == 0) return {std::move(out), std::move(ann)};

  // Keep centers inside the patch-covered region so every spot is visible
  // to the detector (the assembly grid leaves a dead right/bottom margin).
  const PatchGrid grid = make_grid(spec.image_h, spec.image_w, spec.patch_size, spec.overlap);
  const int inset = 8;
  const int y_lo = inset, y_hi = grid.covered_h() - 1 - inset;
  const int x_lo = inset, x_hi = grid.covered_w() - 1 - inset;
  if (y_hi < y_lo || x_hi < x_lo)
    throw ValidationError("implant_spots: image too small for spot placement");

  Rng rng(Rng::derive(Rng::derive(spec.seed, kSpotStream), frame_index));
  const double min_sep2 = 25.0 * 25.0;
  std::vector<Point2> centers;
  const long max_attempts = 10L * spec.spots;
  long attempts = 0;
  while (static_cast<int>(centers.size()) < spec.spots) {
    if (attempts++ >= max_attempts)
      throw Error("implant_spots: could not place " + std::to_string(spec.spots) +
                  " spots with 25 px separation after " + std::to_string(max_attempts) +
                  " attempts");
    const double y = static_cast<double>(y_lo + rng.uniform_index(y_hi - y_lo + 1));
    const double x = static_cast<double>(x_lo + rng.uniform_index(x_hi - x_lo + 1));
    bool ok = true;
    for (const Point2& c : centers) {
      const double dx = c.x - x, dy = c.y - y;
      if (dx * dx + dy * dy < min_sep2) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back({x, y});
  }

  const double s2 = 2.0 * spec.spot_sigma * spec.spot_sigma;
  const int rad = static_cast<int>(std::ceil(5.0 * spec.spot_sigma));
  for (const Point2& c : centers) {
    const int cy = static_cast<int>(c.y), cx = static_cast<int>(c.x);
    for (int r = std::max(0, cy - rad); r <= std::min(out.height - 1, cy + rad); ++r)
      for (int col = std::max(0, cx - rad); col <= std::min(out.width - 1, cx + rad); ++col) {
        const double d2 = (r - c.y) * (r - c.y) + (col - c.x) * (col - c.x);
        double& v = out.at(r, col);
        v = std::min(1.0, v + spec.spot_amplitude * std::exp(-d2 / s2));
      }
    ann.points.push_back(c);
  }
  return {std::move(out), std::move(ann)};
}

ImageGray add_noise(const ImageGray& img, double noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0.0) throw ValidationError("add_noise: noise_sigma must be >= 0");
  ImageGray out = img;
  if (noise_sigma == 0.0) return out;
  Rng rng(seed);
  for (double& v : out.data) {
    v += noise_sigma * rng.normal();
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
  }
  return out;
}

namespace {

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

} // namespace

DatasetManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.frames < 0) throw ValidationError("generate_dataset: negative frame count");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string());

  DatasetManifest man;
  std::vector<AnnotationSet> truth;
  char name[32];
  for (int f = 0; f < spec.frames; ++f) {
    ImageGray img = make_background(spec, f);
    auto [spotted, ann] = implant_spots(img, spec, f);
    spotted = add_noise(spotted, spec.noise_sigma, Rng::derive(Rng::derive(spec.seed, kNoiseStream), f));
    std::snprintf(name, sizeof(name), "frame_%04d.pgm", f);
    const std::filesystem::path file = out_dir / name;
    save_image(spotted, file);
    man.frame_files.push_back(file);
    truth.push_back(std::move(ann));
  }

  man.truth_csv = out_dir / "truth.csv";
  const std::filesystem::path truth_tmp = man.truth_csv.string() + ".tmp";
  write_annotation_csv(truth, truth_tmp);
  std::filesystem::rename(truth_tmp, man.truth_csv);

  std::string m;
  auto kv = [&m](const std::string& k, const std::string& v) { m += k + "=" + v + "\n"; };
  char buf[40];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  kv("format", "spotlier-synth-1");
  kv("frames", std::to_string(spec.frames));
  kv("image_h", std::to_string(spec.image_h));
  kv("image_w", std::to_string(spec.image_w));
  kv("background_atoms", std::to_string(spec.background_atoms));
  kv("background_sparsity", std::to_string(spec.background_sparsity));
  kv("patch_size", std::to_string(spec.patch_size));
  kv("overlap", num(spec.overlap));
  kv("spots", std::to_string(spec.spots));
  kv("spot_amplitude", num(spec.spot_amplitude));
  kv("spot_sigma", num(spec.spot_sigma));
  kv("noise_sigma", num(spec.noise_sigma));
  kv("seed", std::to_string(spec.seed));
  man.manifest_file = out_dir / "manifest.txt";
  atomic_write(man.manifest_file, m);
  return man;
}

} // namespace spotlier

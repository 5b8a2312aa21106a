#ifndef SPOTLIER_SYNTH_HPP
#define SPOTLIER_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spotlier/dictionary.hpp"
#include "spotlier/image.hpp"
#include "spotlier/points.hpp"

namespace spotlier {

/// Recipe for a seeded synthetic dataset: dictionary-driven backgrounds,
/// implanted bright Gaussian spots, i.i.d. Gaussian pixel noise. Stands in
/// for the private clinical recordings.
struct SynthSpec {
  int frames = 10;
  int image_h = 274;
  int image_w = 384;

  /// Background model: patches are sparse nonnegative combinations of
  /// planted atoms, assembled by overlap averaging.
  int background_atoms = 20;
  int background_sparsity = 3;
  int patch_size = 27;
  double overlap = 0.5;

  int spots = 10;
  double spot_amplitude = 0.5;
  double spot_sigma = 1.5;
  double noise_sigma = 0.01;

  std::uint64_t seed = 1;
};

/// Smooth random atoms: per atom a handful of 2-D cosine waves with at most
/// `max_frequency` cycles across the patch, normalized to unit norm.
/// Deterministic in (patch_size, k, seed).
Dictionary make_planted_dictionary(int patch_size, int k, std::uint64_t seed,
                                   int max_frequency = 4);

/// One background frame, deterministic in (spec.seed, frame_index), values
/// rescaled to [0, 0.6].
ImageGray make_background(const SynthSpec& spec, int frame_index);

/// Add isotropic Gaussian bumps at rejection-sampled centers (pairwise
/// separation >= 25 px), clamp to [0,1]. Annotations are the exact centers.
/// Throws Error if placement fails after 10 * count attempts.
std::pair<ImageGray, AnnotationSet> implant_spots(const ImageGray& img, const SynthSpec& spec,
                                                  int frame_index);

/// Seeded i.i.d. zero-mean Gaussian noise, clamped to [0,1].
ImageGray add_noise(const ImageGray& img, double noise_sigma, std::uint64_t seed);

struct DatasetManifest {
  std::vector<std::filesystem::path> frame_files;
  std::filesystem::path truth_csv;
  std::filesystem::path manifest_file;
};

/// Write frame_####.pgm files, truth.csv (`frame,x,y`), and manifest.txt
/// (key=value lines recording the full spec). Byte-identical across reruns
/// of the same spec.
DatasetManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

} // namespace spotlier

#endif

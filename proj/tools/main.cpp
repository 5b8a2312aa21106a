// spotlier: dictionary-based bright-spot detection in grayscale frames.
//
// Subcommands: synth, train-dict, detect, baseline, eval. Every run is
// deterministic given its flags (and seed); outputs are written to a
// temporary file and renamed into place on success.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "spotlier/baselines.hpp"
#include "spotlier/detection.hpp"
#include "spotlier/dictionary.hpp"
#include "spotlier/errors.hpp"
#include "spotlier/evaluation.hpp"
#include "spotlier/patches.hpp"
#include "spotlier/synth.hpp"

namespace fs = std::filesystem;
using namespace spotlier;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<fs::path> gather_pgms(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw ValidationError("input directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  std::sort(files.begin(), files.end()); // frame id = filename-sorted index
  if (files.empty()) throw ValidationError("no .pgm frames in " + dir.string());
  return files;
}

// Write-to-temp-then-rename so failures never leave partial outputs.
template <typename Fn>
void atomic_output(const fs::path& path, Fn&& write_fn) {
  const fs::path tmp = path.string() + ".tmp";
  write_fn(tmp);
  fs::rename(tmp, path);
}

int jobs_from(int flag_jobs) {
  if (const char* env = std::getenv("SPOTLIER_JOBS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1, flag_jobs);
}

// Deterministic frame-parallel map: results land in index order no matter
// how the workers interleave.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(int count, int jobs, Fn&& fn) {
  std::vector<Result> results(static_cast<std::size_t>(count));
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const int workers = std::min(jobs, count);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          results[i] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  SynthSpec spec;
  std::string out;
};

int cmd_synth(const SynthArgs& args) {
  const DatasetManifest man = generate_dataset(args.spec, args.out);
  std::cout << "wrote " << man.frame_files.size() << " frames, " << man.truth_csv.string()
            << ", " << man.manifest_file.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-dict

struct TrainArgs {
  std::string input;
  std::string ann;
  std::string out;
  std::string log;
  int atoms = 100;
  int sparsity = 5;
  int iters = 50;
  int patch_size = 27;
  double overlap = 0.5;
  std::uint64_t seed = 1;
};

int cmd_train(const TrainArgs& args) {
  const std::vector<fs::path> files = gather_pgms(args.input);
  std::vector<AnnotationSet> ann;
  if (!args.ann.empty())
    ann = read_annotation_csv(args.ann, static_cast<int>(files.size()));

  std::vector<Eigen::MatrixXd> kept_cols;
  long total_cols = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const ImageGray img = load_image(files[f]);
    const PatchGrid grid = make_grid(img.height, img.width, args.patch_size, args.overlap);
    const PatchMatrix pm = extract_patches(img, grid);
    std::vector<bool> keep(static_cast<std::size_t>(grid.patch_count()), true);
    if (!ann.empty()) keep = exclude_annotated_patches(grid, ann[f]);
    Eigen::MatrixXd cols(pm.p(), std::count(keep.begin(), keep.end(), true));
    Eigen::Index at = 0;
    for (int j = 0; j < pm.l(); ++j)
      if (keep[j]) cols.col(at++) = pm.values.col(j);
    total_cols += cols.cols();
    kept_cols.push_back(std::move(cols));
  }
  if (total_cols < args.atoms)
    throw ValidationError("only " + std::to_string(total_cols) +
                          " annotation-free patches available for " + std::to_string(args.atoms) +
                          " atoms");

  Eigen::MatrixXd train(kept_cols[0].rows(), total_cols);
  Eigen::Index at = 0;
  for (const auto& cols : kept_cols) {
    train.middleCols(at, cols.cols()) = cols;
    at += cols.cols();
  }

  const TrainResult res = train_mod(train, args.atoms, args.sparsity, args.iters, args.seed);
  atomic_output(args.out, [&](const fs::path& p) { save_dictionary(res.dict, p); });
  if (!args.log.empty()) {
    atomic_output(args.log, [&](const fs::path& p) {
      std::ofstream out(p, std::ios::trunc);
      if (!out) throw IoError("cannot open for writing: " + p.string());
      out << "iter,representation_error\n";
      for (std::size_t i = 0; i < res.errors.size(); ++i)
        out << i + 1 << "," << fmt17(res.errors[i]) << "\n";
    });
  }
  std::cout << "trained " << args.atoms << " atoms on " << total_cols << " patches; error "
            << fmt17(res.errors.front()) << " -> " << fmt17(res.errors.back());
  if (res.replaced_atoms > 0) std::cout << " (repaired " << res.replaced_atoms << " dead atoms)";
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
  std::string input;
  std::string dict;
  std::string out;
  std::string dump_outliers;
  std::string diagnostics;
  DetectParams params;
  int jobs = 1;
};

int cmd_detect(const DetectArgs& args) {
  const std::vector<fs::path> files = gather_pgms(args.input);
  const Dictionary dict = load_dictionary(args.dict);
  if (dict.p() != args.params.patch_size * args.params.patch_size)
    throw ValidationError("dictionary patch dimension P=" + std::to_string(dict.p()) +
                          " does not match --patch-size " +
                          std::to_string(args.params.patch_size) + " (needs P=" +
                          std::to_string(args.params.patch_size * args.params.patch_size) + ")");

  if (!args.dump_outliers.empty()) fs::create_directories(args.dump_outliers);
  if (!args.diagnostics.empty()) fs::create_directories(args.diagnostics);

  struct FrameOut {
    DetectionSet dets;
    bool converged = false;
  };
  const auto outs = parallel_map<FrameOut>(
      static_cast<int>(files.size()), jobs_from(args.jobs), [&](int f) {
        const ImageGray img = load_image(files[f]);
        const PatchGrid grid =
            make_grid(img.height, img.width, args.params.patch_size, args.params.overlap);
        RobustCodingProblem prob;
        prob.y = extract_patches(img, grid).values;
        prob.d = dict;
        prob.alpha = args.params.alpha;
        prob.beta = args.params.beta;
        std::vector<IterationDiag> diag;
        const RobustCodingResult solve = robust_sparse_code(
            prob, args.params.admm, args.diagnostics.empty() ? nullptr : &diag);
        const OutlierImage oi = outlier_image(solve.r, grid);
        FrameOut out;
        out.dets = threshold_and_group(oi, args.params.level);
        out.dets.frame = f;
        out.converged = solve.converged;

        char name[32];
        if (!args.dump_outliers.empty()) {
          std::snprintf(name, sizeof(name), "outlier_%04d.pgm", f);
          atomic_output(fs::path(args.dump_outliers) / name,
                        [&](const fs::path& p) { save_image(oi.image, p); });
        }
        if (!args.diagnostics.empty()) {
          std::snprintf(name, sizeof(name), "diag_%04d.csv", f);
          atomic_output(fs::path(args.diagnostics) / name, [&](const fs::path& p) {
            std::ofstream dout(p, std::ios::trunc);
            if (!dout) throw IoError("cannot open for writing: " + p.string());
            dout << "iter,objective,primal,dual,mu\n";
            for (const auto& d : diag)
              dout << d.iter << "," << fmt17(d.objective) << "," << fmt17(d.primal) << ","
                   << fmt17(d.dual) << "," << fmt17(d.mu) << "\n";
          });
        }
        return out;
      });

  std::vector<DetectionSet> sets;
  long total = 0;
  int converged = 0;
  for (const auto& o : outs) {
    total += static_cast<long>(o.dets.points.size());
    converged += o.converged ? 1 : 0;
    sets.push_back(o.dets);
  }
  atomic_output(args.out, [&](const fs::path& p) { write_detection_csv(sets, p); });
  std::cout << total << " detections over " << files.size() << " frames (" << converged << "/"
            << files.size() << " solves converged)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineArgs {
  std::string input;
  std::string method = "log";
  std::string out;
  double level = 0.07;
  GsothOptions gsoth;
  int jobs = 1;
};

int cmd_baseline(const BaselineArgs& args) {
  const BaselineMethod method = parse_baseline_method(args.method);
  const std::vector<fs::path> files = gather_pgms(args.input);
  const auto sets = parallel_map<DetectionSet>(
      static_cast<int>(files.size()), jobs_from(args.jobs), [&](int f) {
        DetectionSet dets = baseline_detect(load_image(files[f]), method, args.level, args.gsoth);
        dets.frame = f;
        return dets;
      });
  long total = 0;
  for (const auto& s : sets) total += static_cast<long>(s.points.size());
  atomic_output(args.out, [&](const fs::path& p) { write_detection_csv(sets, p); });
  std::cout << total << " detections over " << files.size() << " frames (" << args.method
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string truth;
  std::string detections;
  std::string outliers;
  std::string out;
  double radius = 10.0;
  std::string mode = "paper-literal";
  int threshold_steps = 101;
  bool counts = false;
  int frames = -1;
  std::string frame_range; // "lo:hi" inclusive; empty = all frames
};

// Group aggregation: evaluate only frames lo..hi of the dataset.
std::pair<int, int> parse_frame_range(const std::string& spec, int total) {
  if (spec.empty()) return {0, total - 1};
  const std::size_t colon = spec.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(spec);
    const int lo = std::stoi(spec.substr(0, colon));
    const int hi = std::stoi(spec.substr(colon + 1));
    if (lo < 0 || hi < lo || hi >= total)
      throw ValidationError("--frame-range " + spec + " outside the " + std::to_string(total) +
                            " available frames");
    return {lo, hi};
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("--frame-range expects lo:hi, got '" + spec + "'");
  }
}

MatchMode parse_mode(const std::string& name) {
  if (name == "paper-literal") return MatchMode::paper_literal;
  if (name == "one-to-one") return MatchMode::one_to_one;
  throw ValidationError("unknown match mode '" + name + "' (expected paper-literal|one-to-one)");
}

int cmd_eval(const EvalArgs& args) {
  const MatchMode mode = parse_mode(args.mode);

  if (args.counts) {
    if (args.detections.empty()) throw ValidationError("--counts needs --detections");
    std::vector<AnnotationSet> truth = read_annotation_csv(args.truth, args.frames);
    std::vector<DetectionSet> dets = read_detection_csv(args.detections, args.frames);
    const std::size_t n = std::max(truth.size(), dets.size());
    truth.resize(n);
    dets.resize(n);
    std::vector<double> truth_counts(n), algo_counts(n);
    for (std::size_t f = 0; f < n; ++f) {
      truth_counts[f] = static_cast<double>(truth[f].points.size());
      algo_counts[f] = static_cast<double>(dets[f].points.size());
    }
    const double rho = pearson(truth_counts, algo_counts);
    atomic_output(args.out, [&](const fs::path& p) {
      std::ofstream out(p, std::ios::trunc);
      if (!out) throw IoError("cannot open for writing: " + p.string());
      out << "frame,count_truth,count_algo\n";
      for (std::size_t f = 0; f < n; ++f)
        out << f << "," << static_cast<long>(truth_counts[f]) << ","
            << static_cast<long>(algo_counts[f]) << "\n";
      out << "pearson," << fmt17(rho) << "\n";
    });
    std::cout << "pearson," << fmt17(rho) << "\n";
    return 0;
  }

  std::vector<double> thresholds;
  if (args.threshold_steps < 2) throw ValidationError("--thresholds needs at least 2 steps");
  for (int i = 0; i < args.threshold_steps; ++i)
    thresholds.push_back(static_cast<double>(i) / (args.threshold_steps - 1));

  PrCurve curve;
  if (!args.outliers.empty()) {
    const std::vector<fs::path> files = gather_pgms(args.outliers);
    const std::vector<AnnotationSet> truth =
        read_annotation_csv(args.truth, static_cast<int>(files.size()));
    const auto [lo, hi] = parse_frame_range(args.frame_range, static_cast<int>(files.size()));
    std::vector<OutlierImage> images;
    std::vector<AnnotationSet> group_truth;
    for (int f = lo; f <= hi; ++f) {
      OutlierImage oi;
      oi.image = load_image(files[f]);
      oi.coverage.assign(oi.image.size(), 1);
      images.push_back(std::move(oi));
      group_truth.push_back(truth[f]);
    }
    curve = pr_curve(images, group_truth, args.radius, thresholds, mode);
  } else if (!args.detections.empty()) {
    // sweep over detection scores instead of re-thresholding outlier images
    std::vector<AnnotationSet> truth = read_annotation_csv(args.truth, args.frames);
    std::vector<DetectionSet> dets = read_detection_csv(
        args.detections, args.frames < 0 ? static_cast<int>(truth.size()) : args.frames);
    if (dets.size() > truth.size())
      throw ValidationError("detection CSV spans more frames than the truth CSV");
    dets.resize(truth.size());
    const auto [lo, hi] = parse_frame_range(args.frame_range, static_cast<int>(truth.size()));
    for (double level : thresholds) {
      Confusion total;
      for (int f = lo; f <= hi; ++f) {
        DetectionSet filtered;
        for (const Detection& d : dets[f].points)
          if (d.score > level) filtered.points.push_back(d);
        total += match_detections(filtered, truth[f], args.radius, mode);
      }
      const auto [precision, recall] = precision_recall(total);
      curve.points.push_back({level, precision, recall, total});
    }
    curve.auc = pr_auc(curve.points);
  } else {
    throw ValidationError("eval needs --outliers or --detections");
  }

  atomic_output(args.out, [&](const fs::path& p) { write_pr_csv(curve, p); });
  std::cout << "auc," << fmt17(curve.auc) << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"spotlier: sparse-coding bright-spot detection and evaluation"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--frames", synth_args.spec.frames, "frame count");
  synth->add_option("--height", synth_args.spec.image_h, "frame height (px)");
  synth->add_option("--width", synth_args.spec.image_w, "frame width (px)");
  synth->add_option("--spots", synth_args.spec.spots, "spots per frame");
  synth->add_option("--amplitude", synth_args.spec.spot_amplitude, "spot amplitude");
  synth->add_option("--spot-sigma", synth_args.spec.spot_sigma, "spot std dev (px)");
  synth->add_option("--noise", synth_args.spec.noise_sigma, "Gaussian noise std dev");
  synth->add_option("--atoms", synth_args.spec.background_atoms, "planted dictionary atoms");
  synth->add_option("--sparsity", synth_args.spec.background_sparsity, "atoms per patch");
  synth->add_option("--patch-size", synth_args.spec.patch_size, "background patch size");
  synth->add_option("--overlap", synth_args.spec.overlap, "background patch overlap");
  synth->add_option("--seed", synth_args.spec.seed, "random seed");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train-dict", "learn a background dictionary (MOD)");
  train->add_option("--input", train_args.input, "directory of .pgm frames")->required();
  train->add_option("--out", train_args.out, "output SPOTDICT file")->required();
  train->add_option("--ann", train_args.ann, "annotation CSV; annotated patches are excluded");
  train->add_option("--atoms", train_args.atoms, "dictionary atoms K");
  train->add_option("--sparsity", train_args.sparsity, "OMP sparsity budget");
  train->add_option("--iters", train_args.iters, "MOD iterations");
  train->add_option("--patch-size", train_args.patch_size, "patch size (px)");
  train->add_option("--overlap", train_args.overlap, "patch overlap fraction");
  train->add_option("--seed", train_args.seed, "random seed");
  train->add_option("--log", train_args.log, "training-error CSV");

  DetectArgs detect_args;
  CLI::App* detect = app.add_subcommand("detect", "sparse-coding detection over frames");
  detect->add_option("--input", detect_args.input, "directory of .pgm frames")->required();
  detect->add_option("--dict", detect_args.dict, "SPOTDICT file")->required();
  detect->add_option("--beta", detect_args.params.beta, "outlier sparsity weight")->required();
  detect->add_option("--out", detect_args.out, "detections CSV")->required();
  detect->add_option("--alpha", detect_args.params.alpha, "code sparsity weight");
  detect->add_option("--level", detect_args.params.level, "outlier-image threshold");
  detect->add_option("--patch-size", detect_args.params.patch_size, "patch size (px)");
  detect->add_option("--overlap", detect_args.params.overlap, "patch overlap fraction");
  detect->add_option("--mu0", detect_args.params.admm.mu0, "initial ADMM penalty");
  detect->add_option("--max-iters", detect_args.params.admm.max_iters, "ADMM iteration cap");
  detect->add_option("--dump-outliers", detect_args.dump_outliers,
                     "directory for outlier-image PGMs");
  detect->add_option("--diagnostics", detect_args.diagnostics,
                     "directory for per-frame iteration CSVs");
  detect->add_option("--jobs", detect_args.jobs, "parallel frames (SPOTLIER_JOBS overrides)");

  BaselineArgs base_args;
  CLI::App* baseline = app.add_subcommand("baseline", "LoG/DoG/GSOTH comparison detectors");
  baseline->add_option("--input", base_args.input, "directory of .pgm frames")->required();
  baseline->add_option("--method", base_args.method, "log|dog|gsoth")->required();
  baseline->add_option("--out", base_args.out, "detections CSV")->required();
  baseline->add_option("--level", base_args.level, "response threshold");
  baseline->add_option("--gsoth-smooth-size", base_args.gsoth.smooth_size,
                       "pre-smoothing kernel size (<=1 disables)");
  baseline->add_option("--gsoth-smooth-sigma", base_args.gsoth.smooth_sigma,
                       "pre-smoothing sigma");
  baseline->add_flag_callback(
      "--gsoth-cross",
      [&base_args]() { base_args.gsoth.element = StructuringElement::cross3x3; },
      "use the 4-neighbor cross element instead of the 3x3 square");
  baseline->add_flag("--gsoth-subtract-original", base_args.gsoth.subtract_original,
                     "subtract the opening from the raw input, not the smoothed one");
  baseline->add_option("--jobs", base_args.jobs, "parallel frames (SPOTLIER_JOBS overrides)");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "precision-recall / count evaluation");
  eval->add_option("--truth", eval_args.truth, "ground-truth CSV")->required();
  eval->add_option("--out", eval_args.out, "output CSV")->required();
  eval->add_option("--detections", eval_args.detections, "detections CSV");
  eval->add_option("--outliers", eval_args.outliers, "directory of outlier-image PGMs");
  eval->add_option("--radius", eval_args.radius, "match disk radius (px)");
  eval->add_option("--mode", eval_args.mode, "paper-literal|one-to-one");
  eval->add_option("--thresholds", eval_args.threshold_steps, "sweep steps over [0,1]");
  eval->add_flag("--counts", eval_args.counts, "per-frame counts + Pearson correlation");
  eval->add_option("--frames", eval_args.frames, "frame count (default: inferred)");
  eval->add_option("--frame-range", eval_args.frame_range,
                   "aggregate only frames lo:hi (inclusive), e.g. a per-video group");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train->parsed()) return cmd_train(train_args);
    if (detect->parsed()) return cmd_detect(detect_args);
    if (baseline->parsed()) return cmd_baseline(base_args);
    if (eval->parsed()) return cmd_eval(eval_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

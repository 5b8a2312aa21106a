// Python bindings for the spotlier core: images move as 2-D float64 numpy
// arrays, point sets as (N,2)/(N,3) arrays, matrices via pybind11's Eigen
// support.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spotlier/baselines.hpp"
#include "spotlier/detection.hpp"
#include "spotlier/dictionary.hpp"
#include "spotlier/errors.hpp"
#include "spotlier/evaluation.hpp"
#include "spotlier/patches.hpp"
#include "spotlier/robust_coding.hpp"
#include "spotlier/synth.hpp"

namespace py = pybind11;
using namespace spotlier;

namespace {

ImageGray image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw ValidationError("image must be a 2-D array");
  ImageGray img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  std::copy(arr.data(), arr.data() + img.size(), img.data.begin());
  return img;
}

py::array_t<double> array_from_image(const ImageGray& img) {
  py::array_t<double> arr({img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
  return arr;
}

py::array_t<int> array_from_coverage(const std::vector<int>& cov, int h, int w) {
  py::array_t<int> arr({h, w});
  std::copy(cov.begin(), cov.end(), arr.mutable_data());
  return arr;
}

AnnotationSet annotations_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  AnnotationSet ann;
  if (arr.size() == 0) return ann;
  if (arr.ndim() != 2 || arr.shape(1) < 2)
    throw ValidationError("annotations must be an (N,2) array of (x, y)");
  for (py::ssize_t i = 0; i < arr.shape(0); ++i)
    ann.points.push_back({arr.at(i, 0), arr.at(i, 1)});
  return ann;
}

DetectionSet detections_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  DetectionSet dets;
  if (arr.size() == 0) return dets;
  if (arr.ndim() != 2 || arr.shape(1) < 2)
    throw ValidationError("detections must be an (N,2) or (N,3) array of (x, y[, score])");
  for (py::ssize_t i = 0; i < arr.shape(0); ++i)
    dets.points.push_back({arr.at(i, 0), arr.at(i, 1), arr.shape(1) > 2 ? arr.at(i, 2) : 1.0});
  return dets;
}

py::array_t<double> array_from_detections(const DetectionSet& dets) {
  py::array_t<double> arr({static_cast<py::ssize_t>(dets.points.size()), py::ssize_t(3)});
  for (std::size_t i = 0; i < dets.points.size(); ++i) {
    arr.mutable_at(i, 0) = dets.points[i].x;
    arr.mutable_at(i, 1) = dets.points[i].y;
    arr.mutable_at(i, 2) = dets.points[i].score;
  }
  return arr;
}

MatchMode mode_from_string(const std::string& mode) {
  if (mode == "paper-literal") return MatchMode::paper_literal;
  if (mode == "one-to-one") return MatchMode::one_to_one;
  throw ValidationError("mode must be 'paper-literal' or 'one-to-one'");
}

OutlierImage outlier_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  OutlierImage oi;
  oi.image = image_from_array(arr);
  oi.coverage.assign(oi.image.size(), 1);
  return oi;
}

} // namespace

PYBIND11_MODULE(_spotlier, m) {
  m.doc() = "Patch-based robust sparse coding for bright-spot detection";
  m.attr("__version__") = "0.1.0";

  // translators run newest-first: register the base before the derived
  py::register_exception<Error>(m, "SpotlierError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "SpotlierValidationError", PyExc_ValueError);

  // ---- imaging -----------------------------------------------------------
  m.def("load_image", [](const std::filesystem::path& p) { return array_from_image(load_image(p)); },
        py::arg("path"), "Read a PGM (P5/P2) file as a float array in [0,1].");
  m.def("save_image",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
           const std::filesystem::path& p) { save_image(image_from_array(img), p); },
        py::arg("image"), py::arg("path"), "Write an 8-bit binary PGM.");

  py::class_<PatchGrid>(m, "PatchGrid")
      .def_readonly("patch_size", &PatchGrid::patch_size)
      .def_readonly("stride", &PatchGrid::stride)
      .def_readonly("rows", &PatchGrid::rows)
      .def_readonly("cols", &PatchGrid::cols)
      .def_readonly("image_h", &PatchGrid::image_h)
      .def_readonly("image_w", &PatchGrid::image_w)
      .def_property_readonly("patch_count", &PatchGrid::patch_count)
      .def_property_readonly("pixels_per_patch", &PatchGrid::pixels_per_patch)
      .def("__repr__", [](const PatchGrid& g) {
        return "PatchGrid(" + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
               " patches of " + std::to_string(g.patch_size) + "px, stride " +
               std::to_string(g.stride) + ")";
      });

  m.def("make_grid", &make_grid, py::arg("image_h"), py::arg("image_w"), py::arg("patch_size"),
        py::arg("overlap"));
  m.def("extract_patches",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
           const PatchGrid& grid) { return extract_patches(image_from_array(img), grid).values; },
        py::arg("image"), py::arg("grid"), "Patch data matrix Y, one column per patch.");
  m.def("reconstruct_from_patches",
        [](const Eigen::MatrixXd& values, const PatchGrid& grid) {
          PatchMatrix pm;
          pm.values = values;
          pm.grid = grid;
          const Reconstruction rec = reconstruct_from_patches(pm);
          return py::make_tuple(array_from_image(rec.image),
                                array_from_coverage(rec.coverage, grid.image_h, grid.image_w));
        },
        py::arg("values"), py::arg("grid"),
        "Overlap-averaged image plus per-pixel coverage counts.");
  m.def("exclude_annotated_patches",
        [](const PatchGrid& grid,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& ann) {
          return exclude_annotated_patches(grid, annotations_from_array(ann));
        },
        py::arg("grid"), py::arg("annotations"),
        "Keep-mask over patch columns; True where no annotation falls inside.");

  // ---- dictionary --------------------------------------------------------
  m.def("omp",
        [](const Eigen::MatrixXd& atoms, const Eigen::VectorXd& y, int max_atoms,
           double residual_tol) {
          const SparseCode c = omp(Dictionary{atoms}, y, max_atoms, residual_tol);
          return py::make_tuple(c.support, c.coeffs, c.residual_norm);
        },
        py::arg("atoms"), py::arg("y"), py::arg("max_atoms"), py::arg("residual_tol") = 1e-6,
        "Orthogonal matching pursuit: (support, coeffs, residual_norm).");
  m.def("train_mod",
        [](const Eigen::MatrixXd& y_train, int k, int sparsity, int iters, std::uint64_t seed) {
          const TrainResult res = train_mod(y_train, k, sparsity, iters, seed);
          return py::make_tuple(res.dict.atoms, res.errors);
        },
        py::arg("y_train"), py::arg("k"), py::arg("sparsity") = 5, py::arg("iters") = 50,
        py::arg("seed") = 1,
        "MOD dictionary learning: (atoms, per-iteration representation errors).");
  m.def("save_dictionary",
        [](const Eigen::MatrixXd& atoms, const std::filesystem::path& p) {
          save_dictionary(Dictionary{atoms}, p);
        },
        py::arg("atoms"), py::arg("path"));
  m.def("load_dictionary",
        [](const std::filesystem::path& p) { return load_dictionary(p).atoms; }, py::arg("path"));

  // ---- robust coding -----------------------------------------------------
  m.def("soft", py::overload_cast<double, double>(&soft), py::arg("x"), py::arg("tau"));
  m.def("soft", py::overload_cast<const Eigen::MatrixXd&, double>(&soft), py::arg("x"),
        py::arg("tau"));
  m.def("objective",
        [](const Eigen::MatrixXd& y, const Eigen::MatrixXd& atoms, double alpha, double beta,
           const Eigen::MatrixXd& psi, const Eigen::MatrixXd& r) {
          return objective({y, Dictionary{atoms}, alpha, beta}, psi, r);
        },
        py::arg("y"), py::arg("atoms"), py::arg("alpha"), py::arg("beta"), py::arg("psi"),
        py::arg("r"));

  py::class_<RobustCodingResult>(m, "RobustCodingResult")
      .def_readonly("psi", &RobustCodingResult::psi)
      .def_readonly("r", &RobustCodingResult::r)
      .def_readonly("iterations", &RobustCodingResult::iterations)
      .def_readonly("primal_residual", &RobustCodingResult::primal_residual)
      .def_readonly("dual_residual", &RobustCodingResult::dual_residual)
      .def_readonly("objective", &RobustCodingResult::objective)
      .def_readonly("converged", &RobustCodingResult::converged);

  m.def("robust_sparse_code",
        [](const Eigen::MatrixXd& y, const Eigen::MatrixXd& atoms, double alpha, double beta,
           double mu0, int max_iters, double epsilon) {
          RobustCodingProblem prob{y, Dictionary{atoms}, alpha, beta};
          AdmmOptions opts{mu0, max_iters, epsilon};
          return robust_sparse_code(prob, opts);
        },
        py::arg("y"), py::arg("atoms"), py::arg("alpha"), py::arg("beta"), py::arg("mu0") = 1.0,
        py::arg("max_iters") = 500, py::arg("epsilon") = -1.0,
        "ADMM solve of the robust sparse-coding objective.");

  // ---- detection ---------------------------------------------------------
  m.def("outlier_image",
        [](const Eigen::MatrixXd& r_hat, const PatchGrid& grid) {
          const OutlierImage oi = outlier_image(r_hat, grid);
          return py::make_tuple(array_from_image(oi.image),
                                array_from_coverage(oi.coverage, grid.image_h, grid.image_w));
        },
        py::arg("r_hat"), py::arg("grid"),
        "Clamped, overlap-averaged, max-normalized outlier field + coverage.");
  m.def("threshold_and_group",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
           double level) {
          return array_from_detections(threshold_and_group(outlier_from_array(image), level));
        },
        py::arg("image"), py::arg("level"),
        "8-connected grouping above the level; rows of (x, y, score).");
  m.def("detect_frame",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
           const Eigen::MatrixXd& atoms, double alpha, double beta, int patch_size,
           double overlap, double level, int max_iters) {
          DetectParams params;
          params.alpha = alpha;
          params.beta = beta;
          params.patch_size = patch_size;
          params.overlap = overlap;
          params.level = level;
          params.admm.max_iters = max_iters;
          const FrameDetection fd = detect_frame(image_from_array(image), Dictionary{atoms}, params);
          return py::make_tuple(array_from_detections(fd.detections),
                                array_from_image(fd.outliers.image), fd.solve.converged);
        },
        py::arg("image"), py::arg("atoms"), py::arg("alpha") = 1e-5, py::arg("beta") = 0.2,
        py::arg("patch_size") = 27, py::arg("overlap") = 0.5, py::arg("level") = 0.07,
        py::arg("max_iters") = 500,
        "Full per-frame pipeline: (detections, outlier image, converged).");

  // ---- baselines ---------------------------------------------------------
  const auto response_array =
      [](OutlierImage (*fn)(const ImageGray&, const KernelSpec&), const KernelSpec& spec) {
        return [fn, spec](const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
          return array_from_image(fn(image_from_array(img), spec).image);
        };
      };
  m.def("log_response", response_array(&log_response, KernelSpec{5, 0.8, 0.0}), py::arg("image"));
  m.def("dog_response", response_array(&dog_response, KernelSpec{5, 0.5, 0.8}), py::arg("image"));
  m.def("gsoth_response",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
          return array_from_image(gsoth_response(image_from_array(img)).image);
        },
        py::arg("image"));
  m.def("baseline_detect",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
           const std::string& method, double level) {
          return array_from_detections(
              baseline_detect(image_from_array(img), parse_baseline_method(method), level));
        },
        py::arg("image"), py::arg("method"), py::arg("level") = 0.07);

  // ---- evaluation --------------------------------------------------------
  m.def("match_detections",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& dets,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& truth,
           double radius, const std::string& mode) {
          const Confusion c = match_detections(detections_from_array(dets),
                                               annotations_from_array(truth), radius,
                                               mode_from_string(mode));
          return py::make_tuple(c.tp, c.fp, c.fn);
        },
        py::arg("detections"), py::arg("truth"), py::arg("radius") = 10.0,
        py::arg("mode") = "paper-literal", "Confusion counts (tp, fp, fn).");
  m.def("precision_recall",
        [](long tp, long fp, long fn) { return precision_recall({tp, fp, fn}); }, py::arg("tp"),
        py::arg("fp"), py::arg("fn"));
  m.def("pr_curve",
        [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& images,
           const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& truths,
           double radius, const std::vector<double>& thresholds, const std::string& mode) {
          std::vector<OutlierImage> ois;
          std::vector<AnnotationSet> anns;
          for (const auto& img : images) ois.push_back(outlier_from_array(img));
          for (const auto& t : truths) anns.push_back(annotations_from_array(t));
          const PrCurve curve = pr_curve(ois, anns, radius, thresholds, mode_from_string(mode));
          py::array_t<double> pts({static_cast<py::ssize_t>(curve.points.size()), py::ssize_t(3)});
          for (std::size_t i = 0; i < curve.points.size(); ++i) {
            pts.mutable_at(i, 0) = curve.points[i].threshold;
            pts.mutable_at(i, 1) = curve.points[i].precision;
            pts.mutable_at(i, 2) = curve.points[i].recall;
          }
          return py::make_tuple(pts, curve.auc);
        },
        py::arg("outlier_images"), py::arg("truths"), py::arg("radius"), py::arg("thresholds"),
        py::arg("mode") = "paper-literal",
        "Micro-averaged sweep: ((threshold, precision, recall) rows, auc).");
  m.def("pearson", &pearson, py::arg("a"), py::arg("b"));

  // ---- synth -------------------------------------------------------------
  m.def("make_planted_dictionary",
        [](int patch_size, int k, std::uint64_t seed, int max_frequency) {
          return make_planted_dictionary(patch_size, k, seed, max_frequency).atoms;
        },
        py::arg("patch_size"), py::arg("k"), py::arg("seed"), py::arg("max_frequency") = 4);

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("frames", &SynthSpec::frames)
      .def_readwrite("image_h", &SynthSpec::image_h)
      .def_readwrite("image_w", &SynthSpec::image_w)
      .def_readwrite("background_atoms", &SynthSpec::background_atoms)
      .def_readwrite("background_sparsity", &SynthSpec::background_sparsity)
      .def_readwrite("patch_size", &SynthSpec::patch_size)
      .def_readwrite("overlap", &SynthSpec::overlap)
      .def_readwrite("spots", &SynthSpec::spots)
      .def_readwrite("spot_amplitude", &SynthSpec::spot_amplitude)
      .def_readwrite("spot_sigma", &SynthSpec::spot_sigma)
      .def_readwrite("noise_sigma", &SynthSpec::noise_sigma)
      .def_readwrite("seed", &SynthSpec::seed);

  m.def("make_background",
        [](const SynthSpec& spec, int frame) { return array_from_image(make_background(spec, frame)); },
        py::arg("spec"), py::arg("frame_index"));
  m.def("implant_spots",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
           const SynthSpec& spec, int frame) {
          auto [out, ann] = implant_spots(image_from_array(img), spec, frame);
          py::array_t<double> pts({static_cast<py::ssize_t>(ann.points.size()), py::ssize_t(2)});
          for (std::size_t i = 0; i < ann.points.size(); ++i) {
            pts.mutable_at(i, 0) = ann.points[i].x;
            pts.mutable_at(i, 1) = ann.points[i].y;
          }
          return py::make_tuple(array_from_image(out), pts);
        },
        py::arg("image"), py::arg("spec"), py::arg("frame_index"));
  m.def("add_noise",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
           double noise_sigma, std::uint64_t seed) {
          return array_from_image(add_noise(image_from_array(img), noise_sigma, seed));
        },
        py::arg("image"), py::arg("noise_sigma"), py::arg("seed"));
  m.def("generate_dataset",
        [](const SynthSpec& spec, const std::filesystem::path& out_dir) {
          const DatasetManifest man = generate_dataset(spec, out_dir);
          return py::make_tuple(man.frame_files, man.truth_csv, man.manifest_file);
        },
        py::arg("spec"), py::arg("out_dir"),
        "Write frames + truth.csv + manifest.txt; returns their paths.");
}

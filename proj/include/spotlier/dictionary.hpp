#ifndef SPOTLIER_DICTIONARY_HPP
#define SPOTLIER_DICTIONARY_HPP

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace spotlier {

/// Background dictionary D: one unit-norm atom per column.
struct Dictionary {
  Eigen::MatrixXd atoms; // P x K

  int p() const { return static_cast<int>(atoms.rows()); }
  int k() const { return static_cast<int>(atoms.cols()); }
};

struct NormalizeResult {
  Dictionary dict;
  Eigen::VectorXd scales; // original column norms; codes multiply by these
};

/// Scale every column to unit Euclidean norm. Throws ValidationError naming
/// the first (near-)zero column.
NormalizeResult normalize_atoms(const Dictionary& d);

/// Greedy sparse approximation of one signal.
struct SparseCode {
  std::vector<int> support;
  Eigen::VectorXd coeffs;
  double residual_norm = 0.0;
};

/// Orthogonal matching pursuit: repeatedly pick the atom with the largest
/// absolute correlation to the residual (ties broken by lowest index), then
/// least-squares refit on the whole support. Stops when residual_norm <=
/// residual_tol, the support reaches max_atoms, or all correlations vanish.
SparseCode omp(const Dictionary& d, const Eigen::VectorXd& y, int max_atoms,
               double residual_tol);

struct ModUpdate {
  Dictionary dict;        // normalized
  Eigen::MatrixXd codes;  // psi rescaled to match the normalized atoms
};

/// Method-of-optimal-directions update: D = Y Psi^T (Psi Psi^T)^-1 with a
/// 1e-10 ridge, followed by atom normalization (codes rescaled so D*codes
/// is unchanged). Minimizes ||Y - D Psi||_F over D for fixed Psi.
ModUpdate mod_update(const Eigen::MatrixXd& y_train, const Eigen::MatrixXd& psi);

struct TrainResult {
  Dictionary dict;
  std::vector<double> errors; // ||Y - D Psi||_F after each iteration's update
  int replaced_atoms = 0;     // degenerate atoms repaired over the whole run
};

/// MOD dictionary learning: seed D with k distinct training columns, then
/// alternate OMP coding (sparsity budget, residual_tol 1e-6) with
/// mod_update for `iters` rounds. Atoms unused by any code are replaced by
/// the worst-represented training column.
TrainResult train_mod(const Eigen::MatrixXd& y_train, int k, int sparsity, int iters,
                      std::uint64_t seed);

/// SPOTDICT text format: line 1 `SPOTDICT 1 <P> <K>`, then P rows of K
/// whitespace-separated floats written with 17 significant digits.
void save_dictionary(const Dictionary& d, const std::filesystem::path& path);
Dictionary load_dictionary(const std::filesystem::path& path);

} // namespace spotlier

#endif

#include "spotlier/dictionary.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "spotlier/errors.hpp"
#include "spotlier/rng.hpp"

namespace spotlier {

NormalizeResult normalize_atoms(const Dictionary& d) {
  NormalizeResult res;
  res.dict.atoms = d.atoms;
  res.scales.resize(d.k());
  for (int j = 0; j < d.k(); ++j) {
    const double n = d.atoms.col(j).norm();
    if (!(n > 1e-12))
      throw ValidationError("normalize_atoms: atom " + std::to_string(j) +
                            " has (near-)zero norm");
    res.dict.atoms.col(j) /= n;
    res.scales[j] = n;
  }
  return res;
}

SparseCode omp(const Dictionary& d, const Eigen::VectorXd& y, int max_atoms,
               double residual_tol) {
  if (y.size() != d.p())
    throw ValidationError("omp: signal length does not match dictionary");
  if (max_atoms < 0 || max_atoms > d.k())
    throw ValidationError("omp: max_atoms must lie in [0, K]");
  if (residual_tol < 0.0) throw ValidationError("omp: residual_tol must be >= 0");

  SparseCode code;
  Eigen::VectorXd resid = y;
  code.residual_norm = resid.norm();
  std::vector<bool> used(static_cast<std::size_t>(d.k()), false);
  Eigen::MatrixXd sub(d.p(), max_atoms);

  while (static_cast<int>(code.support.size()) < max_atoms &&
         code.residual_norm > residual_tol) {
    const Eigen::VectorXd corr = d.atoms.transpose() * resid;
    int best = -1;
    double best_abs = 0.0;
    for (int j = 0; j < d.k(); ++j) {
      if (used[j]) continue;
      const double a = std::abs(corr[j]);
      if (a > best_abs) { // strict: ties go to the lowest index
        best_abs = a;
        best = j;
      }
    }
    if (best < 0 || best_abs == 0.0) break;

    used[best] = true;
    const int s = static_cast<int>(code.support.size());
    code.support.push_back(best);
    sub.col(s) = d.atoms.col(best);

    code.coeffs = sub.leftCols(s + 1).colPivHouseholderQr().solve(y);
    resid = y - sub.leftCols(s + 1) * code.coeffs;
    code.residual_norm = resid.norm();
  }
  if (code.support.empty()) code.coeffs.resize(0);
  return code;
}

namespace {

// Unnormalized MOD solve; shared by mod_update and train_mod.
Eigen::MatrixXd mod_solve(const Eigen::MatrixXd& y, const Eigen::MatrixXd& psi) {
  const int k = static_cast<int>(psi.rows());
  Eigen::MatrixXd gram = psi * psi.transpose();
  gram.diagonal().array() += 1e-10;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw ValidationError("mod_update: Psi Psi^T singular after regularization");
  // D^T = (Psi Psi^T)^-1 Psi Y^T
  Eigen::MatrixXd dt = ldlt.solve(psi * y.transpose());
  if (!dt.allFinite())
    throw ValidationError("mod_update: non-finite dictionary from singular system");
  return dt.transpose();
}

} // namespace

ModUpdate mod_update(const Eigen::MatrixXd& y_train, const Eigen::MatrixXd& psi) {
  if (y_train.cols() != psi.cols())
    throw ValidationError("mod_update: Y and Psi column counts differ");
  Dictionary raw{mod_solve(y_train, psi)};
  NormalizeResult norm = normalize_atoms(raw);
  ModUpdate upd;
  upd.dict = std::move(norm.dict);
  upd.codes = norm.scales.asDiagonal() * psi;
  return upd;
}

TrainResult train_mod(const Eigen::MatrixXd& y_train, int k, int sparsity, int iters,
                      std::uint64_t seed) {
  const int l = static_cast<int>(y_train.cols());
  const int p = static_cast<int>(y_train.rows());
  if (l < k)
    throw ValidationError("train_mod: " + std::to_string(l) + " training patches < " +
                          std::to_string(k) + " atoms");
  if (iters < 1) throw ValidationError("train_mod: iters must be >= 1");
  if (sparsity < 1 || sparsity > k)
    throw ValidationError("train_mod: sparsity must lie in [1, k]");

  // Seed atoms with k training columns, preferring columns that are
  // pairwise distinct in value so repeated signals do not collapse atoms.
  Rng rng(seed);
  std::vector<int> order = sample_without_replacement(l, l, rng);
  Dictionary dict;
  dict.atoms.resize(p, k);
  int taken = 0;
  for (int pass = 0; pass < 2 && taken < k; ++pass) {
    for (int idx : order) {
      if (taken == k) break;
      const Eigen::VectorXd cand = y_train.col(idx);
      const double n = cand.norm();
      if (!(n > 1e-12)) continue;
      if (pass == 0) {
        bool dup = false;
        for (int t = 0; t < taken && !dup; ++t)
          dup = (dict.atoms.col(t) - cand / n).norm() < 1e-9;
        if (dup) continue;
      }
      dict.atoms.col(taken++) = cand / n;
    }
  }
  if (taken < k)
    throw ValidationError("train_mod: training data has fewer than k usable columns");

  TrainResult res;
  const double tol = 1e-6;
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(k, l);
  std::vector<double> col_err2(static_cast<std::size_t>(l));
  bool have_codes = false;

  for (int it = 0; it < iters; ++it) {
    for (int j = 0; j < l; ++j) {
      const SparseCode fresh = omp(dict, y_train.col(j), sparsity, tol);

      // Coefficient reuse: refit the previous support under the current
      // dictionary and keep it when it beats the fresh greedy code. The
      // refit residual never exceeds the previous iteration's, so the
      // per-iteration error is non-increasing.
      if (have_codes) {
        std::vector<int> old_support;
        for (int a = 0; a < k; ++a)
          if (psi(a, j) != 0.0) old_support.push_back(a);
        if (!old_support.empty()) {
          Eigen::MatrixXd sub(p, old_support.size());
          for (std::size_t s = 0; s < old_support.size(); ++s)
            sub.col(s) = dict.atoms.col(old_support[s]);
          const Eigen::VectorXd refit = sub.colPivHouseholderQr().solve(y_train.col(j));
          const double old_resid = (y_train.col(j) - sub * refit).norm();
          if (old_resid < fresh.residual_norm) {
            psi.col(j).setZero();
            for (std::size_t s = 0; s < old_support.size(); ++s)
              psi(old_support[s], j) = refit[s];
            col_err2[j] = old_resid * old_resid;
            continue;
          }
        }
      }
      psi.col(j).setZero();
      for (std::size_t s = 0; s < fresh.support.size(); ++s)
        psi(fresh.support[s], j) = fresh.coeffs[s];
      col_err2[j] = fresh.residual_norm * fresh.residual_norm;
    }
    have_codes = true;

    Eigen::MatrixXd raw = mod_solve(y_train, psi);

    // Repair degenerate atoms: unused rows of psi produce near-zero columns;
    // replace each with the currently worst-represented training column.
    for (int j = 0; j < k; ++j) {
      if (raw.col(j).norm() > 1e-12) continue;
      int worst = 0;
      for (int c = 1; c < l; ++c)
        if (col_err2[c] > col_err2[worst]) worst = c;
      raw.col(j) = y_train.col(worst);
      col_err2[worst] = -1.0; // do not reuse the same column twice
      psi.row(j).setZero();
      ++res.replaced_atoms;
      if (!(raw.col(j).norm() > 1e-12)) raw.col(j).setOnes(); // all-zero data fallback
    }

    NormalizeResult norm = normalize_atoms(Dictionary{std::move(raw)});
    dict = std::move(norm.dict);
    psi = norm.scales.asDiagonal() * psi;
    res.errors.push_back((y_train - dict.atoms * psi).norm());
  }
  res.dict = std::move(dict);
  return res;
}

void save_dictionary(const Dictionary& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "SPOTDICT 1 " << d.p() << " " << d.k() << "\n";
  char buf[40];
  for (int r = 0; r < d.p(); ++r) {
    for (int c = 0; c < d.k(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", d.atoms(r, c));
      out << buf << (c + 1 == d.k() ? "\n" : " ");
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary: " + path.string());
  std::string magic;
  int version = 0, p = 0, k = 0;
  if (!(in >> magic >> version >> p >> k) || magic != "SPOTDICT")
    throw ValidationError("bad SPOTDICT header in " + path.string());
  if (version != 1)
    throw ValidationError("unsupported SPOTDICT version " + std::to_string(version));
  if (p < 1 || k < 1) throw ValidationError("bad SPOTDICT dimensions");
  Dictionary d;
  d.atoms.resize(p, k);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < k; ++c)
      if (!(in >> d.atoms(r, c)))
        throw ValidationError("truncated SPOTDICT payload at row " + std::to_string(r) +
                              ", col " + std::to_string(c));
  return d;
}

} // namespace spotlier

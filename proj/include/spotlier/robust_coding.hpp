#ifndef SPOTLIER_ROBUST_CODING_HPP
#define SPOTLIER_ROBUST_CODING_HPP

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "spotlier/dictionary.hpp"

namespace spotlier {

/// Joint estimation of a sparse code Psi and a sparse outlier term R from
/// patch data Y, minimizing
///   1/2 ||Y - D Psi - R||_F^2 + alpha ||Psi||_1,1 + beta ||R||_1,1
/// by ADMM on the split Z = Psi.
struct RobustCodingProblem {
  Eigen::MatrixXd y; // P x L
  Dictionary d;
  double alpha = 1e-5;
  double beta = 0.0;
};

struct AdmmOptions {
  double mu0 = 1.0;
  int max_iters = 500;
  /// Stopping threshold on primal + dual residual; non-positive means the
  /// default sqrt(P*L) * 1e-6.
  double epsilon = -1.0;
};

struct AdmmState {
  Eigen::MatrixXd psi; // K x L
  Eigen::MatrixXd r;   // P x L
  Eigen::MatrixXd z;   // K x L
  Eigen::MatrixXd m;   // K x L, scaled multiplier
  double mu = 1.0;
  int iter = 0;
};

struct RobustCodingResult {
  Eigen::MatrixXd psi;
  Eigen::MatrixXd r;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  bool converged = false;
};

struct IterationDiag {
  int iter;
  double objective;
  double primal;
  double dual;
  double mu;
};

/// Elementwise soft threshold sign(x) * max(|x| - tau, 0); the proximal
/// operator of tau*|.|_1. tau must be >= 0.
double soft(double x, double tau);
Eigen::MatrixXd soft(const Eigen::MatrixXd& x, double tau);

double objective(const RobustCodingProblem& prob, const Eigen::MatrixXd& psi,
                 const Eigen::MatrixXd& r);

/// One Psi step: solve (D^T D + mu I) Psi = D^T (Y - R) + mu (Z + M).
Eigen::MatrixXd psi_update(const AdmmState& state, const RobustCodingProblem& prob);

/// R step: soft(Y - D Psi, beta) using the freshly updated Psi.
Eigen::MatrixXd r_update(const AdmmState& state, const RobustCodingProblem& prob);

/// Z step: soft(Psi - M, alpha / mu) using the previous multiplier.
Eigen::MatrixXd z_update(const AdmmState& state, const RobustCodingProblem& prob);

/// Multiplier step: M + (Z - Psi). The scaled multiplier tracks the
/// constraint residual; the descent direction printed in the source
/// derivation diverges (see tests).
Eigen::MatrixXd m_update(const AdmmState& state);

/// (primal, dual) = (||Z - Psi||_F, mu * ||Z - Z_prev||_F) evaluated on the
/// next state.
std::pair<double, double> residuals(const AdmmState& prev, const AdmmState& next);

/// Keep primal and dual residuals within a factor of 10: if primal exceeds
/// 10x dual, double mu and halve M; in the mirror case halve mu and double
/// M. Returns the adapted (mu, M).
std::pair<double, Eigen::MatrixXd> adapt_mu(double mu, double primal, double dual,
                                            const Eigen::MatrixXd& m);

/// Full ADMM loop from zero initialization. Stops when primal + dual <=
/// epsilon or after max_iters. Per-iteration diagnostics are appended to
/// *diag when provided.
RobustCodingResult robust_sparse_code(const RobustCodingProblem& prob,
                                      const AdmmOptions& opts = {},
                                      std::vector<IterationDiag>* diag = nullptr);

} // namespace spotlier

#endif

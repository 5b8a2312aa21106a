#include "spotlier/robust_coding.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "spotlier/errors.hpp"

namespace spotlier {

double soft(double x, double tau) {
  if (tau < 0.0) throw ValidationError("soft: negative threshold");
  const double a = std::abs(x) - tau;
  return a > 0.0 ? (x > 0.0 ? a : -a) : 0.0;
}

Eigen::MatrixXd soft(const Eigen::MatrixXd& x, double tau) {
  if (tau < 0.0) throw ValidationError("soft: negative threshold");
  return x.array().sign() * (x.array().abs() - tau).max(0.0);
}

double objective(const RobustCodingProblem& prob, const Eigen::MatrixXd& psi,
                 const Eigen::MatrixXd& r) {
  const double fit = (prob.y - prob.d.atoms * psi - r).squaredNorm();
  return 0.5 * fit + prob.alpha * psi.lpNorm<1>() + prob.beta * r.lpNorm<1>();
}

namespace {

void check_problem(const RobustCodingProblem& prob) {
  if (prob.d.p() != prob.y.rows())
    throw ValidationError("robust coding: dictionary P=" + std::to_string(prob.d.p()) +
                          " does not match data rows " + std::to_string(prob.y.rows()));
  if (prob.alpha < 0.0 || prob.beta < 0.0)
    throw ValidationError("robust coding: alpha and beta must be >= 0");
}

} // namespace

Eigen::MatrixXd psi_update(const AdmmState& state, const RobustCodingProblem& prob) {
  check_problem(prob);
  if (!(state.mu > 0.0)) throw ValidationError("psi_update: mu must be positive");
  const Eigen::MatrixXd& d = prob.d.atoms;
  Eigen::MatrixXd lhs = d.transpose() * d;
  lhs.diagonal().array() += state.mu;
  const Eigen::MatrixXd rhs = d.transpose() * (prob.y - state.r) + state.mu * (state.z + state.m);
  if (!rhs.allFinite()) throw ValidationError("psi_update: non-finite input");
  return Eigen::LLT<Eigen::MatrixXd>(lhs).solve(rhs);
}

Eigen::MatrixXd r_update(const AdmmState& state, const RobustCodingProblem& prob) {
  return soft(prob.y - prob.d.atoms * state.psi, prob.beta);
}

Eigen::MatrixXd z_update(const AdmmState& state, const RobustCodingProblem& prob) {
  if (!(state.mu > 0.0)) throw ValidationError("z_update: mu must be positive");
  return soft(state.psi - state.m, prob.alpha / state.mu);
}

Eigen::MatrixXd m_update(const AdmmState& state) {
  return state.m + (state.z - state.psi);
}

std::pair<double, double> residuals(const AdmmState& prev, const AdmmState& next) {
  const double primal = (next.z - next.psi).norm();
  const double dual = next.mu * (next.z - prev.z).norm();
  return {primal, dual};
}

std::pair<double, Eigen::MatrixXd> adapt_mu(double mu, double primal, double dual,
                                            const Eigen::MatrixXd& m) {
  if (!(mu > 0.0)) throw ValidationError("adapt_mu: mu must be positive");
  if (primal > 10.0 * dual) return {2.0 * mu, m / 2.0};
  if (dual > 10.0 * primal) return {mu / 2.0, 2.0 * m};
  return {mu, m};
}

RobustCodingResult robust_sparse_code(const RobustCodingProblem& prob,
                                      const AdmmOptions& opts,
                                      std::vector<IterationDiag>* diag) {
  check_problem(prob);
  if (!(opts.mu0 > 0.0)) throw ValidationError("robust_sparse_code: mu0 must be positive");
  if (opts.max_iters < 1) throw ValidationError("robust_sparse_code: max_iters must be >= 1");

  const Eigen::MatrixXd& d = prob.d.atoms;
  const int k = prob.d.k();
  const Eigen::Index l = prob.y.cols();
  const double eps = opts.epsilon > 0.0
                         ? opts.epsilon
                         : std::sqrt(static_cast<double>(prob.y.size())) * 1e-6;

  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(k, l);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(prob.y.rows(), l);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(k, l);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, l);
  Eigen::MatrixXd z_prev(k, l);
  double mu = opts.mu0;

  const Eigen::MatrixXd gram = d.transpose() * d;
  // The K x K system is refactored only when mu changes.
  Eigen::MatrixXd lhs = gram;
  lhs.diagonal().array() += mu;
  Eigen::LLT<Eigen::MatrixXd> llt(lhs);

  RobustCodingResult res;
  for (int it = 1; it <= opts.max_iters; ++it) {
    psi = llt.solve(d.transpose() * (prob.y - r) + mu * (z + m));
    r = soft(prob.y - d * psi, prob.beta);
    z_prev.swap(z);
    z = soft(psi - m, prob.alpha / mu);
    m += z - psi;

    const double primal = (z - psi).norm();
    const double dual = mu * (z - z_prev).norm();
    if (!psi.allFinite() || !r.allFinite() || !std::isfinite(primal + dual))
      throw Error("robust_sparse_code: non-finite iterate at iteration " + std::to_string(it));

    if (diag) diag->push_back({it, objective(prob, psi, r), primal, dual, mu});

    res.iterations = it;
    res.primal_residual = primal;
    res.dual_residual = dual;
    if (primal + dual <= eps) {
      res.converged = true;
      break;
    }

    if (primal > 10.0 * dual || dual > 10.0 * primal) {
      auto [mu2, m2] = adapt_mu(mu, primal, dual, m);
      mu = mu2;
      m = std::move(m2);
      lhs = gram;
      lhs.diagonal().array() += mu;
      llt.compute(lhs);
    }
  }

  res.objective = objective(prob, psi, r);
  res.psi = std::move(psi);
  res.r = std::move(r);
  return res;
}

} // namespace spotlier

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace rmix::testing {

// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic KS critical value at level 0.001.
inline double ks_critical(std::size_t n) { return 1.9495 / std::sqrt(static_cast<double>(n)); }

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// Mean and covariance of x_keep given x_obs = values for a joint Gaussian.
struct Conditioned {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline Conditioned condition_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                      const std::vector<int>& keep, const std::vector<int>& obs,
                                      const Eigen::VectorXd& values) {
  const auto k = static_cast<Eigen::Index>(keep.size());
  const auto o = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd skk(k, k), sko(k, o), soo(o, o);
  Eigen::VectorXd mk(k), mo(o);
  for (Eigen::Index a = 0; a < k; ++a) {
    mk(a) = mean(keep[a]);
    for (Eigen::Index b = 0; b < k; ++b) skk(a, b) = cov(keep[a], keep[b]);
    for (Eigen::Index b = 0; b < o; ++b) sko(a, b) = cov(keep[a], obs[b]);
  }
  for (Eigen::Index a = 0; a < o; ++a) {
    mo(a) = mean(obs[a]);
    for (Eigen::Index b = 0; b < o; ++b) soo(a, b) = cov(obs[a], obs[b]);
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(soo);
  return {mk + sko * ldlt.solve(values - mo), skk - sko * ldlt.solve(sko.transpose())};
}

// Log density of N(x; mean, cov).
inline double log_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd r = llt.matrixL().solve(x - mean);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (static_cast<double>(cov.rows()) * std::log(2.0 * M_PI) + logdet + r.squaredNorm());
}

}  // namespace rmix::testing

#pragma once

#include <span>

#include <Eigen/Dense>

namespace rjmort {

// Poisson log-likelihood sum over cells of
//   d (log E + eta) - E exp(eta) - log d!
// Cells with E = 0 are structurally missing and contribute nothing; d > 0
// with E = 0 throws DataError.
double log_likelihood(std::span<const double> deaths, std::span<const double> exposures,
                      std::span<const double> eta);

// Flattened death/exposure cells with the data-only terms precomputed.
class CellData {
 public:
  CellData() = default;
  CellData(Eigen::VectorXd deaths, Eigen::VectorXd exposure);

  int size() const { return static_cast<int>(deaths_.size()); }
  const Eigen::VectorXd& deaths() const { return deaths_; }
  const Eigen::VectorXd& exposure() const { return exposure_; }

  // Same value as log_likelihood() on these cells.
  double loglik(const Eigen::VectorXd& eta) const;
  // Loglik without the data-only constant; differences match loglik().
  double kernel(const Eigen::VectorXd& eta) const;
  // Expected deaths E exp(eta) per cell (0 on missing cells).
  Eigen::VectorXd mean(const Eigen::VectorXd& eta) const;

 private:
  Eigen::VectorXd deaths_;
  Eigen::VectorXd exposure_;
  Eigen::VectorXd log_exposure_;  // 0 where exposure is 0
  double constant_ = 0.0;         // sum of d log E - log d!
};

}  // namespace rjmort

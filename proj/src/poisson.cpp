#include "rjmort/poisson.hpp"

#include <cmath>
#include <string>

#include "rjmort/errors.hpp"

namespace rjmort {

namespace {

void check_cell(double d, double e, std::size_t i) {
  if (!(d >= 0.0) || !(e >= 0.0)) {
    throw DataError("negative or non-finite count/exposure at cell " + std::to_string(i));
  }
  if (e == 0.0 && d > 0.0) {
    throw DataError("cell " + std::to_string(i) + " has deaths but zero exposure");
  }
}

}  // namespace

double log_likelihood(std::span<const double> deaths, std::span<const double> exposures,
                      std::span<const double> eta) {
  if (deaths.size() != exposures.size() || deaths.size() != eta.size()) {
    throw DataError("log_likelihood: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < deaths.size(); ++i) {
    const double d = deaths[i];
    const double e = exposures[i];
    check_cell(d, e, i);
    if (e == 0.0) continue;
    total += d * (std::log(e) + eta[i]) - e * std::exp(eta[i]) - std::lgamma(d + 1.0);
  }
  return total;
}

CellData::CellData(Eigen::VectorXd deaths, Eigen::VectorXd exposure)
    : deaths_(std::move(deaths)), exposure_(std::move(exposure)) {
  if (deaths_.size() != exposure_.size()) throw DataError("CellData: shape mismatch");
  log_exposure_ = Eigen::VectorXd::Zero(exposure_.size());
  for (Eigen::Index i = 0; i < deaths_.size(); ++i) {
    check_cell(deaths_[i], exposure_[i], static_cast<std::size_t>(i));
    if (exposure_[i] > 0.0) {
      log_exposure_[i] = std::log(exposure_[i]);
      constant_ += deaths_[i] * log_exposure_[i] - std::lgamma(deaths_[i] + 1.0);
    }
  }
}

double CellData::kernel(const Eigen::VectorXd& eta) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < deaths_.size(); ++i) {
    if (exposure_[i] == 0.0) continue;
    total += deaths_[i] * eta[i] - exposure_[i] * std::exp(eta[i]);
  }
  return total;
}

double CellData::loglik(const Eigen::VectorXd& eta) const { return kernel(eta) + constant_; }

Eigen::VectorXd CellData::mean(const Eigen::VectorXd& eta) const {
  Eigen::VectorXd m(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    m[i] = exposure_[i] == 0.0 ? 0.0 : exposure_[i] * std::exp(eta[i]);
  }
  return m;
}

}  // namespace rjmort

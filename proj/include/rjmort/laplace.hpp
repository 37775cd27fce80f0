#pragma once

#include <functional>
#include <random>

#include <Eigen/Dense>

namespace rjmort {

// A twice-differentiable log-density over free coordinates.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual int dim() const = 0;
  virtual double value(const Eigen::VectorXd& x) const = 0;
  // Returns the value and fills the gradient. The Hessian is filled only
  // when `hess` is non-null and has_hessian() is true.
  virtual double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                          Eigen::MatrixXd* hess) const = 0;
  virtual bool has_hessian() const { return false; }
};

// Adapter for closures, mainly for tests.
class FunctionObjective final : public Objective {
 public:
  using Value = std::function<double(const Eigen::VectorXd&)>;
  using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using Hessian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  FunctionObjective(int dim, Value f, Gradient g, Hessian h = nullptr)
      : dim_(dim), f_(std::move(f)), g_(std::move(g)), h_(std::move(h)) {}

  int dim() const override { return dim_; }
  double value(const Eigen::VectorXd& x) const override { return f_(x); }
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                  Eigen::MatrixXd* hess) const override;
  bool has_hessian() const override { return static_cast<bool>(h_); }

 private:
  int dim_;
  Value f_;
  Gradient g_;
  Hessian h_;
};

struct LaplaceOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  int jitter_steps = 20;
  double jitter_base = 1e-8;
  double fd_step = 1e-5;
};

// N(mode, precision^{-1}). The covariance is formed only on request since
// sampling and density evaluation work from the Cholesky factor.
struct LaplaceResult {
  Eigen::VectorXd mode;
  Eigen::MatrixXd precision;
  Eigen::MatrixXd chol_lower;  // precision = L L^T
  double log_det_cov = 0.0;
  double jitter_used = 0.0;
  bool converged = false;
  int iterations = 0;

  int dim() const { return static_cast<int>(mode.size()); }
  Eigen::MatrixXd covariance() const;
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
  double log_density(const Eigen::VectorXd& x) const;
};

// Central-difference Hessian built from the analytic gradient.
Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double step);

LaplaceResult laplace_approximate(const Objective& f, const Eigen::VectorXd& init,
                                  const LaplaceOptions& opts = {});

}  // namespace rjmort

#include "rjmort/laplace.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rjmort {

double FunctionObjective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                                   Eigen::MatrixXd* hess) const {
  if (grad) *grad = g_(x);
  if (hess && h_) *hess = h_(x);
  return f_(x);
}

Eigen::MatrixXd LaplaceResult::covariance() const {
  const int n = dim();
  Eigen::MatrixXd linv = chol_lower.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd cov = linv.transpose() * linv;
  return 0.5 * (cov + cov.transpose());
}

Eigen::VectorXd LaplaceResult::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> z;
  Eigen::VectorXd v(dim());
  for (int i = 0; i < dim(); ++i) v[i] = z(rng);
  // x = mu + L^{-T} z has covariance (L L^T)^{-1}.
  return mode + chol_lower.transpose().triangularView<Eigen::Upper>().solve(v);
}

double LaplaceResult::log_density(const Eigen::VectorXd& x) const {
  const int n = dim();
  const Eigen::VectorXd w = chol_lower.transpose() * (x - mode);
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * log_det_cov - 0.5 * w.squaredNorm();
}

Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double step) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd gp;
  Eigen::VectorXd gm;
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    const double hj = step * std::max(1.0, std::abs(x[j]));
    xp[j] += hj;
    xm[j] -= hj;
    f.evaluate(xp, &gp, nullptr);
    f.evaluate(xm, &gm, nullptr);
    h.col(j) = (gp - gm) / (2.0 * hj);
  }
  return 0.5 * (h + h.transpose());
}

namespace {

double eval_all(const Objective& f, const Eigen::VectorXd& x, Eigen::VectorXd& g,
                Eigen::MatrixXd& h, double fd_step) {
  if (f.has_hessian()) return f.evaluate(x, &g, &h);
  const double v = f.evaluate(x, &g, nullptr);
  h = fd_hessian(f, x, fd_step);
  return v;
}

// Newton direction on -H, shifted towards steepest ascent when -H is not
// positive definite.
Eigen::VectorXd ascent_direction(const Eigen::MatrixXd& h, const Eigen::VectorXd& g) {
  const int n = static_cast<int>(g.size());
  Eigen::MatrixXd a = -h;
  double shift = 0.0;
  const double scale = std::max(1e-8, a.diagonal().cwiseAbs().maxCoeff());
  for (int k = 0; k < 60; ++k) {
    Eigen::LLT<Eigen::MatrixXd> llt(a + shift * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd d = llt.solve(g);
      if (d.allFinite()) return d;
    }
    shift = shift == 0.0 ? 1e-10 * scale : shift * 10.0;
  }
  return g / scale;
}

}  // namespace

LaplaceResult laplace_approximate(const Objective& f, const Eigen::VectorXd& init,
                                  const LaplaceOptions& opts) {
  const int n = f.dim();
  LaplaceResult out;
  out.mode = init;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  Eigen::VectorXd x = init;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  double fx = eval_all(f, x, g, h, opts.fd_step);
  if (!std::isfinite(fx) || !g.allFinite()) return out;

  bool at_mode = false;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (g.norm() < opts.gradient_tolerance) {
      at_mode = true;
      break;
    }
    const Eigen::VectorXd d = ascent_direction(h, g);
    const double slope = g.dot(d);
    // Near the mode the Armijo gain drops below the rounding level of f.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fx));
    double step = 1.0;
    bool moved = false;
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      const Eigen::VectorXd xn = x + step * d;
      const double fn = f.value(xn);
      if (std::isfinite(fn) && fn >= fx + 1e-4 * step * slope - noise) {
        x = xn;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    fx = eval_all(f, x, g, h, opts.fd_step);
    if (!std::isfinite(fx) || !g.allFinite()) break;
  }
  if (!at_mode && g.allFinite() && g.norm() < opts.gradient_tolerance) at_mode = true;
  out.iterations = it;
  out.mode = x;
  if (!at_mode) return out;

  const Eigen::MatrixXd a = -0.5 * (h + h.transpose());
  for (int j = -1; j < opts.jitter_steps; ++j) {
    const double jitter = j < 0 ? 0.0 : opts.jitter_base * std::ldexp(1.0, j);
    Eigen::MatrixXd p = a;
    p.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(p);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd l = llt.matrixL();
    if ((l.diagonal().array() <= 0.0).any() || !l.allFinite()) continue;
    out.precision = std::move(p);
    out.chol_lower = std::move(l);
    out.log_det_cov = -2.0 * out.chol_lower.diagonal().array().log().sum();
    out.jitter_used = jitter;
    out.converged = true;
    return out;
  }
  return out;
}

}  // namespace rjmort

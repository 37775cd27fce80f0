#include "rjmort/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rjmort {

std::string Constraint::to_string() const {
  std::ostringstream os;
  if (kind == Kind::kSumTo) {
    if (value == 0.0) {
      os << "SumZero(" << block_name(block) << ")";
    } else {
      os << "SumTo(" << block_name(block) << "," << value << ")";
    }
  } else {
    os << "Pin(" << block_name(block) << "," << index << "," << value << ")";
  }
  return os.str();
}

std::vector<Constraint> ConstraintSet::for_block(BlockId block) const {
  std::vector<Constraint> out;
  for (const auto& c : items_) {
    if (c.block == block) out.push_back(c);
  }
  return out;
}

int ConstraintSet::count(BlockId block) const {
  return static_cast<int>(std::count_if(
      items_.begin(), items_.end(), [block](const Constraint& c) { return c.block == block; }));
}

bool ConstraintSet::contains(const Constraint& c) const {
  return std::find(items_.begin(), items_.end(), c) != items_.end();
}

bool ConstraintSet::same_as(const ConstraintSet& other) const {
  if (items_.size() != other.items_.size()) return false;
  return std::all_of(items_.begin(), items_.end(),
                     [&](const Constraint& c) { return other.contains(c); });
}

double ConstraintSet::max_residual(const ParamState& params) const {
  double worst = 0.0;
  for (const auto& c : items_) {
    if (!params.has(c.block)) continue;
    const Eigen::VectorXd& v = params.get(c.block);
    const double r = c.kind == Constraint::Kind::kSumTo ? v.sum() - c.value
                                                        : v[c.index] - c.value;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

std::string ConstraintSet::to_string() const {
  std::string out = "{";
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (i) out += ", ";
    out += items_[i].to_string();
  }
  return out + "}";
}

BlockEmbedding BlockEmbedding::unconstrained(int raw_size) {
  return from_constraints(raw_size, {});
}

BlockEmbedding BlockEmbedding::from_constraints(int raw_size,
                                                const std::vector<Constraint>& cs) {
  BlockEmbedding e;
  e.layout_ = Layout::kLinear;
  e.raw_size_ = raw_size;
  e.shift_ = Eigen::VectorXd::Zero(raw_size);

  std::vector<bool> pinned(static_cast<std::size_t>(raw_size), false);
  const Constraint* sum = nullptr;
  double pinned_total = 0.0;
  for (const auto& c : cs) {
    if (c.kind == Constraint::Kind::kPin) {
      if (c.index < 0 || c.index >= raw_size || pinned[static_cast<std::size_t>(c.index)]) {
        throw std::invalid_argument("invalid or duplicate pin " + c.to_string());
      }
      pinned[static_cast<std::size_t>(c.index)] = true;
      e.shift_[c.index] = c.value;
      pinned_total += c.value;
    } else {
      if (sum) throw std::invalid_argument("more than one sum constraint on a block");
      sum = &c;
    }
  }
  if (sum) {
    for (int i = raw_size - 1; i >= 0; --i) {
      if (!pinned[static_cast<std::size_t>(i)]) {
        e.dependent_ = i;
        break;
      }
    }
    if (e.dependent_ < 0) throw std::invalid_argument("sum constraint on fully pinned block");
    e.shift_[e.dependent_] = sum->value - pinned_total;
  }
  for (int i = 0; i < raw_size; ++i) {
    if (!pinned[static_cast<std::size_t>(i)] && i != e.dependent_) e.free_index_.push_back(i);
  }
  return e;
}

BlockEmbedding BlockEmbedding::double_centred(int rows, int cols) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("double_centred needs at least 2x2");
  BlockEmbedding e;
  e.layout_ = Layout::kDoubleCentred;
  e.raw_size_ = rows * cols;
  e.rows_ = rows;
  e.cols_ = cols;
  e.shift_ = Eigen::VectorXd::Zero(e.raw_size_);
  for (int q = 0; q < cols - 1; ++q) {
    for (int r = 0; r < rows - 1; ++r) e.free_index_.push_back(r + rows * q);
  }
  e.dense_jacobian_ = e.jacobian();
  return e;
}

Eigen::VectorXd BlockEmbedding::embed(const Eigen::VectorXd& free) const {
  if (free.size() != free_size()) throw std::invalid_argument("embed: wrong free size");
  Eigen::VectorXd raw = shift_;
  if (layout_ == Layout::kLinear) {
    for (int i = 0; i < free_size(); ++i) raw[free_index_[static_cast<std::size_t>(i)]] = free[i];
    if (dependent_ >= 0) raw[dependent_] -= free.sum();
    return raw;
  }
  const int R = rows_;
  const int Q = cols_;
  Eigen::Map<Eigen::MatrixXd> m(raw.data(), R, Q);
  Eigen::Map<const Eigen::MatrixXd> f(free.data(), R - 1, Q - 1);
  m.topLeftCorner(R - 1, Q - 1) = f;
  m.row(R - 1).head(Q - 1) = -f.colwise().sum();
  m.col(Q - 1).head(R - 1) = -f.rowwise().sum();
  m(R - 1, Q - 1) = f.sum();
  return raw;
}

Eigen::VectorXd BlockEmbedding::extract(const Eigen::VectorXd& raw) const {
  if (raw.size() != raw_size_) throw std::invalid_argument("extract: wrong raw size");
  Eigen::VectorXd free(free_size());
  for (int i = 0; i < free_size(); ++i) free[i] = raw[free_index_[static_cast<std::size_t>(i)]];
  return free;
}

Eigen::VectorXd BlockEmbedding::pullback(const Eigen::VectorXd& g) const {
  if (layout_ == Layout::kLinear) {
    const double gd = dependent_ >= 0 ? g[dependent_] : 0.0;
    Eigen::VectorXd out(free_size());
    for (int i = 0; i < free_size(); ++i) out[i] = g[free_index_[static_cast<std::size_t>(i)]] - gd;
    return out;
  }
  return dense_jacobian_.transpose() * g;
}

Eigen::MatrixXd BlockEmbedding::pullback(const Eigen::MatrixXd& h) const {
  if (layout_ == Layout::kLinear) {
    const int n = free_size();
    Eigen::MatrixXd out(n, n);
    const int d = dependent_;
    for (int j = 0; j < n; ++j) {
      const int fj = free_index_[static_cast<std::size_t>(j)];
      for (int i = 0; i < n; ++i) {
        const int fi = free_index_[static_cast<std::size_t>(i)];
        double v = h(fi, fj);
        if (d >= 0) v += h(d, d) - h(fi, d) - h(d, fj);
        out(i, j) = v;
      }
    }
    return out;
  }
  return dense_jacobian_.transpose() * h * dense_jacobian_;
}

Eigen::MatrixXd BlockEmbedding::pullback_rows(const Eigen::MatrixXd& m) const {
  if (layout_ == Layout::kLinear) {
    Eigen::MatrixXd out(free_size(), m.cols());
    for (int i = 0; i < free_size(); ++i) {
      out.row(i) = m.row(free_index_[static_cast<std::size_t>(i)]);
      if (dependent_ >= 0) out.row(i) -= m.row(dependent_);
    }
    return out;
  }
  return dense_jacobian_.transpose() * m;
}

Eigen::MatrixXd BlockEmbedding::jacobian() const {
  if (layout_ == Layout::kDoubleCentred && dense_jacobian_.size() > 0) return dense_jacobian_;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(raw_size_, free_size());
  for (int k = 0; k < free_size(); ++k) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(free_size());
    unit[k] = 1.0;
    j.col(k) = embed(unit) - shift_;
  }
  return j;
}

}  // namespace rjmort

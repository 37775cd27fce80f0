#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rjmort/blocks.hpp"

namespace rjmort {

// A linear identifiability constraint on one block. `index` is the 0-based
// raw position inside the block (so the cohort gamma_{1-X} is index 0 and
// b_1 is index 0).
struct Constraint {
  enum class Kind { kSumTo, kPin };

  Kind kind = Kind::kSumTo;
  BlockId block = BlockId::kA;
  int index = 0;
  double value = 0.0;

  static Constraint sum_zero(BlockId block) { return {Kind::kSumTo, block, 0, 0.0}; }
  static Constraint sum_to(BlockId block, double total) {
    return {Kind::kSumTo, block, 0, total};
  }
  static Constraint pin(BlockId block, int index, double value) {
    return {Kind::kPin, block, index, value};
  }

  bool operator==(const Constraint&) const = default;
  std::string to_string() const;
};

class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::vector<Constraint> items) : items_(std::move(items)) {}

  void add(const Constraint& c) { items_.push_back(c); }
  const std::vector<Constraint>& items() const { return items_; }
  std::vector<Constraint> for_block(BlockId block) const;
  int count(BlockId block) const;
  bool contains(const Constraint& c) const;
  // Order-insensitive comparison.
  bool same_as(const ConstraintSet& other) const;

  // Largest absolute violation over all constraints whose block is present.
  double max_residual(const ParamState& params) const;

  std::string to_string() const;

 private:
  std::vector<Constraint> items_;
};

// Affine map raw = shift + J * free for one block.
//
// Linear-constraint blocks keep every non-pinned entry as a free coordinate
// except the last non-pinned one, which absorbs the sum constraint. The
// doubly-centred layout (rows x cols, column-major) keeps the top-left
// (rows-1) x (cols-1) corner free and fills the last row and column so that
// every row and column sums to zero.
class BlockEmbedding {
 public:
  BlockEmbedding() = default;

  static BlockEmbedding unconstrained(int raw_size);
  // All constraints must refer to the same block.
  static BlockEmbedding from_constraints(int raw_size,
                                         const std::vector<Constraint>& cs);
  static BlockEmbedding double_centred(int rows, int cols);

  int raw_size() const { return raw_size_; }
  int free_size() const { return static_cast<int>(free_index_.size()); }

  Eigen::VectorXd embed(const Eigen::VectorXd& free) const;
  Eigen::VectorXd extract(const Eigen::VectorXd& raw) const;
  // J^T g for a raw-space gradient.
  Eigen::VectorXd pullback(const Eigen::VectorXd& raw_grad) const;
  // J^T H J for a raw-space (raw_size x raw_size) matrix.
  Eigen::MatrixXd pullback(const Eigen::MatrixXd& raw_hess) const;
  // J^T M for a raw-by-anything matrix.
  Eigen::MatrixXd pullback_rows(const Eigen::MatrixXd& m) const;

  Eigen::MatrixXd jacobian() const;

 private:
  enum class Layout { kLinear, kDoubleCentred };

  Layout layout_ = Layout::kLinear;
  int raw_size_ = 0;
  int dependent_ = -1;  // kLinear only
  int rows_ = 0;        // kDoubleCentred only
  int cols_ = 0;
  std::vector<int> free_index_;
  Eigen::VectorXd shift_;
  Eigen::MatrixXd dense_jacobian_;  // kDoubleCentred only
};

}  // namespace rjmort

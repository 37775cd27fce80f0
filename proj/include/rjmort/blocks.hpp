#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rjmort {

// Every parameter block that can appear in any model family. A family only
// uses the subset it defines; the stored vectors are always raw (embedded)
// values, never free coordinates.
enum class BlockId : int {
  kA = 0,   // level a
  kB,       // linear age slope b
  kAx,      // age effect a_x
  kK1,      // period index k1_t
  kK2,      // interaction period index k2_t
  kBbar,    // interaction slope b-bar
  kBx,      // age interaction profile b_x
  kGamma,   // cohort effect
  kC1,      // product shift c1_p
  kAxp,     // age-by-product level a_{x,p}
  kC2,      // product multiplier on b_x
  kK,       // APP period index k_t
  kC3,      // product loading on k2_t
  kCtilde,  // doubly-centred age-by-product deviation (move-only)
  kEps,     // centred age deviation (toy move-only)
};

inline constexpr int kNumBlocks = 15;

std::string_view block_name(BlockId id);
std::optional<BlockId> block_from_name(std::string_view name);

enum class Variant : int {
  kCanonical = 0,
  // AP delta2=2, delta3=2 written as k(1 + bbar * b_x) with b_1 = -1.
  kBridged,
  // a_{x,p} (or a_x in the toy) written as a nested sum with centred deviations.
  kNested,
};

// A point in a family's discrete model space. `arity` is the number of
// indicator variables in use (4 for AP, 3 for APP, 1 for the level toy).
struct ModelConfig {
  std::array<int, 4> delta{0, 0, 0, 0};
  int arity = 0;
  Variant variant = Variant::kCanonical;

  int operator[](int i) const { return delta[static_cast<std::size_t>(i)]; }
  ModelConfig canonical() const {
    ModelConfig c = *this;
    c.variant = Variant::kCanonical;
    return c;
  }
  // Digits only, e.g. "2111".
  std::string label() const;

  auto operator<=>(const ModelConfig&) const = default;
};

ModelConfig ap_config(int d1, int d2, int d3, int d4);
ModelConfig app_config(int d1, int d2, int d3);
// Parses a label such as "2111" into a config of the given arity.
ModelConfig parse_config_label(std::string_view label, int arity);

class ParamState {
 public:
  bool has(BlockId id) const { return slots_[index(id)].has_value(); }
  const Eigen::VectorXd& get(BlockId id) const;
  Eigen::VectorXd& mut(BlockId id);
  void set(BlockId id, Eigen::VectorXd values) {
    slots_[index(id)] = std::move(values);
  }
  void erase(BlockId id) { slots_[index(id)].reset(); }
  std::vector<BlockId> present() const;

  // Exact equality of block presence and values.
  bool operator==(const ParamState& other) const;

 private:
  static std::size_t index(BlockId id) { return static_cast<std::size_t>(id); }
  std::array<std::optional<Eigen::VectorXd>, kNumBlocks> slots_;
};

}  // namespace rjmort

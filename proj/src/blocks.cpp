#include "rjmort/blocks.hpp"

#include <stdexcept>

#include "rjmort/errors.hpp"

namespace rjmort {

namespace {

constexpr std::array<std::string_view, kNumBlocks> kBlockNames = {
    "a",  "b",     "a_x", "k1",  "k2", "bbar",   "b_x", "gamma",
    "c1", "a_xp",  "c2",  "k",   "c3", "ctilde", "eps",
};

}  // namespace

std::string_view block_name(BlockId id) {
  return kBlockNames[static_cast<std::size_t>(id)];
}

std::optional<BlockId> block_from_name(std::string_view name) {
  for (int i = 0; i < kNumBlocks; ++i) {
    if (kBlockNames[static_cast<std::size_t>(i)] == name) {
      return static_cast<BlockId>(i);
    }
  }
  return std::nullopt;
}

std::string ModelConfig::label() const {
  std::string out;
  for (int i = 0; i < arity; ++i) out += static_cast<char>('0' + delta[i]);
  return out;
}

ModelConfig ap_config(int d1, int d2, int d3, int d4) {
  ModelConfig c;
  c.delta = {d1, d2, d3, d4};
  c.arity = 4;
  return c;
}

ModelConfig app_config(int d1, int d2, int d3) {
  ModelConfig c;
  c.delta = {d1, d2, d3, 0};
  c.arity = 3;
  return c;
}

ModelConfig parse_config_label(std::string_view label, int arity) {
  if (static_cast<int>(label.size()) != arity) {
    throw ConfigError("config label '" + std::string(label) + "' must have " +
                      std::to_string(arity) + " digits");
  }
  ModelConfig c;
  c.arity = arity;
  for (int i = 0; i < arity; ++i) {
    const char ch = label[static_cast<std::size_t>(i)];
    if (ch < '1' || ch > '9') {
      throw ConfigError("config label '" + std::string(label) +
                        "' contains a non-digit");
    }
    c.delta[static_cast<std::size_t>(i)] = ch - '0';
  }
  return c;
}

const Eigen::VectorXd& ParamState::get(BlockId id) const {
  const auto& slot = slots_[index(id)];
  if (!slot) {
    throw std::logic_error("parameter block '" + std::string(block_name(id)) +
                           "' is not present");
  }
  return *slot;
}

Eigen::VectorXd& ParamState::mut(BlockId id) {
  auto& slot = slots_[index(id)];
  if (!slot) {
    throw std::logic_error("parameter block '" + std::string(block_name(id)) +
                           "' is not present");
  }
  return *slot;
}

std::vector<BlockId> ParamState::present() const {
  std::vector<BlockId> out;
  for (int i = 0; i < kNumBlocks; ++i) {
    if (slots_[static_cast<std::size_t>(i)]) out.push_back(static_cast<BlockId>(i));
  }
  return out;
}

bool ParamState::operator==(const ParamState& other) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& a = slots_[i];
    const auto& b = other.slots_[i];
    if (a.has_value() != b.has_value()) return false;
    if (a && (a->size() != b->size() || *a != *b)) return false;
  }
  return true;
}

}  // namespace rjmort

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rjmort/sampler.hpp"

namespace rjmort {

struct Schedule {
  int burn = 5000;
  int keep = 5000;
  int thin = 1;
  // Study runs only need configurations; dropping parameters saves memory.
  bool store_params = true;
};

struct Sample {
  int chain = 0;
  long iteration = 0;
  ModelConfig config;
  ParamState params;
  double loglik = 0.0;
};

struct Trace {
  std::vector<Sample> samples;
  Schedule schedule;
  std::uint64_t seed = 0;
  int chains = 0;
  Diagnostics diagnostics;
};

// Per-chain seed from a master seed and a (cell, replicate, chain) counter.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t replicate,
                          std::uint64_t chain);

// Worker count from RJMORT_THREADS, capped by `wanted` and at least 1.
int thread_budget(int wanted);

// Runs fn(0) .. fn(n-1) on up to `threads` workers. Exceptions are rethrown
// after all workers join.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

Trace run_chain(const Sampler& sampler, const ModelConfig& init, const Schedule& schedule,
                std::uint64_t seed, int chain_id = 0);

// Independent chains seeded with derive_seed(seed, 0, 0, chain), merged in
// chain order.
Trace run_chains(const Sampler& sampler, const ModelConfig& init, const Schedule& schedule,
                 std::uint64_t seed, int chains, int threads);

}  // namespace rjmort

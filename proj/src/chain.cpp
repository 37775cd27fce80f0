#include "rjmort/chain.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "rjmort/errors.hpp"

namespace rjmort {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t replicate,
                          std::uint64_t chain) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(master), hi(master), lo(cell), hi(cell), lo(replicate),
                    hi(replicate), lo(chain), hi(chain)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

int thread_budget(int wanted) {
  int cap = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("RJMORT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) cap = v;
  }
  return std::max(1, std::min(wanted, cap));
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Trace run_chain(const Sampler& sampler, const ModelConfig& init, const Schedule& schedule,
                std::uint64_t seed, int chain_id) {
  if (schedule.burn < 0 || schedule.keep < 1 || schedule.thin < 1) {
    throw ConfigError("schedule needs burn >= 0, keep >= 1, thin >= 1");
  }
  Trace trace;
  trace.schedule = schedule;
  trace.seed = seed;
  trace.chains = 1;
  trace.samples.reserve(static_cast<std::size_t>(schedule.keep));

  ChainState state = sampler.init(init, seed);
  try {
    for (int i = 0; i < schedule.burn; ++i) sampler.gibbs_sweep(state, trace.diagnostics);
    for (int k = 0; k < schedule.keep; ++k) {
      for (int j = 0; j < schedule.thin; ++j) sampler.gibbs_sweep(state, trace.diagnostics);
      Sample s;
      s.chain = chain_id;
      s.iteration = state.iteration;
      s.config = state.config;
      if (schedule.store_params) s.params = state.params;
      s.loglik = state.loglik;
      trace.samples.push_back(std::move(s));
    }
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw ChainError("chain " + std::to_string(chain_id) + " failed at sweep " +
                     std::to_string(state.iteration) + ": " + e.what());
  }
  return trace;
}

Trace run_chains(const Sampler& sampler, const ModelConfig& init, const Schedule& schedule,
                 std::uint64_t seed, int chains, int threads) {
  if (chains < 1) throw ConfigError("need at least one chain");
  std::vector<Trace> parts(static_cast<std::size_t>(chains));
  parallel_for(chains, threads, [&](int c) {
    parts[static_cast<std::size_t>(c)] =
        run_chain(sampler, init, schedule, derive_seed(seed, 0, 0, static_cast<std::uint64_t>(c)), c);
  });
  Trace out;
  out.schedule = schedule;
  out.seed = seed;
  out.chains = chains;
  for (auto& p : parts) {
    out.samples.insert(out.samples.end(), std::make_move_iterator(p.samples.begin()),
                       std::make_move_iterator(p.samples.end()));
    out.diagnostics.merge(p.diagnostics);
  }
  return out;
}

}  // namespace rjmort

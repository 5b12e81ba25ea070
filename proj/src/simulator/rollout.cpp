#include "pileload/simulator/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace pileload::sim {

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::filled:
      return "filled";
    case Termination::timeout:
      return "timeout";
    case Termination::stalled:
      return "stalled";
  }
  return "unknown";
}

LoaderState initial_state(const ConditionProfile& cond, nn::Rng& rng) {
  LoaderState s;
  s.x = rng.uniform(cond.pile_distance_min, cond.pile_distance_max);
  return s;
}

RolloutResult rollout(Policy& policy, const ConditionProfile& cond, nn::Rng& rng,
                      const RolloutConfig& cfg) {
  policy.reset();
  RolloutResult out;
  LoaderState state = initial_state(cond, rng);
  std::size_t still = 0;
  while (out.steps < cfg.max_steps) {
    const ExtendedSensorVector s = sense(state, cond, rng);
    ctl::Action action = policy.act(s);
    out.trajectory.push_back({state, s, action});
    const LoaderState next = step(state, action.u, cond, cfg.dt);
    const double moved = std::max({std::abs(next.x - state.x), std::abs(next.v - state.v),
                                   std::abs(next.theta1 - state.theta1),
                                   std::abs(next.theta2 - state.theta2),
                                   std::abs(next.fill - state.fill)});
    state = next;
    ++out.steps;
    if (state.fill >= cfg.fill_done) {
      out.termination = Termination::filled;
      break;
    }
    still = moved < cfg.stall_tolerance ? still + 1 : 0;
    if (still >= cfg.stall_steps) {
      out.termination = Termination::stalled;
      break;
    }
  }
  out.final_state = state;
  out.success = state.fill >= cfg.success_fill;
  return out;
}

double percent(std::size_t successes, std::size_t n) {
  if (n == 0) throw std::invalid_argument("percent: n must be positive");
  return static_cast<double>(successes) / static_cast<double>(n) * 100.0;
}

SuccessSummary evaluate_success(const Policy& policy, const ConditionProfile& cond, std::size_t n,
                                nn::Rng& rng, const RolloutConfig& cfg, unsigned threads) {
  if (n == 0) throw std::invalid_argument("success rate needs at least one rollout");
  SuccessSummary summary;
  summary.results.resize(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      auto local = policy.clone();
      nn::Rng r = rng.fork(i);
      summary.results[i] = rollout(*local, cond, r, cfg);
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& r : summary.results) summary.successes += r.success ? 1 : 0;
  summary.percent = percent(summary.successes, n);
  return summary;
}

double success_rate(const Policy& policy, const ConditionProfile& cond, std::size_t n,
                    nn::Rng& rng, const RolloutConfig& cfg) {
  return evaluate_success(policy, cond, n, rng, cfg).percent;
}

data::Demonstration to_demonstration(const RolloutResult& result, const std::string& id,
                                     double dt) {
  data::Demonstration d;
  d.id = id;
  d.sample_rate_hz = 1.0 / dt;
  for (std::size_t i = 0; i < result.trajectory.size(); ++i) {
    const auto& p = result.trajectory[i];
    data::Record r;
    r.t = static_cast<double>(i) * dt;
    r.s = p.s;
    for (std::size_t k = 0; k < kControlDims; ++k) r.u[k] = std::clamp(p.action.u[k], -1.0, 1.0);
    r.fill = p.state.fill;
    d.records.push_back(r);
  }
  if (!d.records.empty()) d.records.back().fill = result.final_state.fill;
  return d;
}

std::vector<data::Demonstration> generate_demonstrations(std::size_t n,
                                                         const ConditionProfile& cond,
                                                         nn::Rng& rng,
                                                         const GenerationConfig& cfg) {
  if (n == 0) throw std::invalid_argument("generate_demonstrations: n must be >= 1");
  if (!(cfg.rate_hz > 0.0)) throw std::invalid_argument("generate_demonstrations: bad rate");
  if (!(cfg.full_fraction >= 0.0 && cfg.full_fraction <= 1.0)) {
    throw std::invalid_argument("generate_demonstrations: full_fraction must be in [0, 1]");
  }
  cond.validate();
  const auto n_full = static_cast<std::size_t>(std::llround(cfg.full_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  nn::Rng pick = rng.fork(0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[pick.below(i + 1)]);
  std::vector<bool> full(n, false);
  for (std::size_t i = 0; i < n_full; ++i) full[order[i]] = true;

  const double h = 1.0 / cfg.rate_hz;
  const auto max_ticks = static_cast<std::size_t>(cfg.max_seconds * cfg.rate_hz);
  std::vector<data::Demonstration> demos;
  demos.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    nn::Rng r = rng.fork(i + 1);
    LoaderState state = initial_state(cond, r);
    ExpertParams p;
    const int partial_stage =
        p.last_stage() > 0 ? static_cast<int>(r.below(static_cast<std::uint64_t>(p.last_stage()))) : 0;
    p.final_stage = full[i] ? p.last_stage() : partial_stage;
    p.drive_gain *= 1.0 + cfg.expert_jitter * r.uniform(-1.0, 1.0);
    p.impact_pt_bar *= 1.0 + cfg.expert_jitter * r.uniform(-1.0, 1.0);

    char id[32];
    std::snprintf(id, sizeof id, "demo_%03zu", i);
    data::Demonstration demo{id, cfg.rate_hz, {}};
    ExpertMemory memory;
    for (std::size_t tick = 0; tick <= max_ticks; ++tick) {
      data::Record rec;
      rec.t = static_cast<double>(tick) / cfg.rate_hz;
      rec.s = sense(state, cond, r);
      rec.u = scripted_expert(rec.s, memory, p);
      rec.fill = state.fill;
      demo.records.push_back(rec);
      if (memory.phase == ExpertPhase::done) break;
      state = step(state, rec.u, cond, h);
    }
    demos.push_back(std::move(demo));
  }
  return demos;
}

}  // namespace pileload::sim

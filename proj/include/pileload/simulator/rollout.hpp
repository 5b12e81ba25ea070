#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pileload/controllers/controller.hpp"
#include "pileload/dataset/demonstration.hpp"
#include "pileload/simulator/expert.hpp"
#include "pileload/simulator/loader.hpp"

namespace pileload::sim {

/// Closed-loop controller. act() is called once per control tick with the
/// raw (unnormalized) observation.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset() {}
  virtual ctl::Action act(const ExtendedSensorVector& s) = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;
};

class NeuralPolicy : public Policy {
 public:
  explicit NeuralPolicy(std::shared_ptr<const ctl::ControllerParams> params)
      : params_(std::move(params)) {}
  ctl::Action act(const ExtendedSensorVector& s) override { return ctl::act(*params_, s); }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<NeuralPolicy>(*this); }

 private:
  std::shared_ptr<const ctl::ControllerParams> params_;
};

class ExpertPolicy : public Policy {
 public:
  explicit ExpertPolicy(ExpertParams params = {}) : params_(params) {}
  void reset() override { memory_ = {}; }
  ctl::Action act(const ExtendedSensorVector& s) override {
    return {scripted_expert(s, memory_, params_), std::nullopt, std::nullopt};
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<ExpertPolicy>(*this); }

 private:
  ExpertParams params_;
  ExpertMemory memory_;
};

class ZeroPolicy : public Policy {
 public:
  ctl::Action act(const ExtendedSensorVector&) override { return {}; }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<ZeroPolicy>(); }
};

enum class Termination { filled, timeout, stalled };
std::string_view to_string(Termination t);

struct TrajectoryPoint {
  LoaderState state;  // state the observation was taken in
  ExtendedSensorVector s{};
  ctl::Action action;
};

struct RolloutConfig {
  std::size_t max_steps = 120;
  double dt = kControlPeriod;
  double fill_done = 0.99;
  double success_fill = 0.5;
  /// Stalled after this many consecutive steps with every state component
  /// moving less than stall_tolerance.
  std::size_t stall_steps = 30;
  double stall_tolerance = 1e-4;
};

struct RolloutResult {
  std::vector<TrajectoryPoint> trajectory;
  LoaderState final_state;
  bool success = false;
  std::size_t steps = 0;
  Termination termination = Termination::timeout;
};

/// Rest state at a pile distance drawn uniformly from the condition's range.
LoaderState initial_state(const ConditionProfile& cond, nn::Rng& rng);

/// sense -> act -> step at cfg.dt until filled, stalled or max_steps.
RolloutResult rollout(Policy& policy, const ConditionProfile& cond, nn::Rng& rng,
                      const RolloutConfig& cfg = {});

struct SuccessSummary {
  std::vector<RolloutResult> results;  // by rollout index
  std::size_t successes = 0;
  double percent = 0.0;
};

/// n rollouts; rollout i uses rng.fork(i) and a fresh clone of `policy`, so
/// the outcome does not depend on `threads`.
SuccessSummary evaluate_success(const Policy& policy, const ConditionProfile& cond, std::size_t n,
                                nn::Rng& rng, const RolloutConfig& cfg = {},
                                unsigned threads = 1);
double success_rate(const Policy& policy, const ConditionProfile& cond, std::size_t n,
                    nn::Rng& rng, const RolloutConfig& cfg = {});
/// successes / n * 100.
double percent(std::size_t successes, std::size_t n);

/// Trajectory in demonstration form, one record per control tick.
data::Demonstration to_demonstration(const RolloutResult& result, const std::string& id,
                                     double dt = kControlPeriod);

struct GenerationConfig {
  double rate_hz = 500.0;
  /// Fraction of demos that complete every fill stage.
  double full_fraction = 52.0 / 72.0;
  /// Relative jitter of the expert's drive gain and impact threshold.
  double expert_jitter = 0.0;
  double max_seconds = 60.0;
};

/// Expert demonstrations logged at cfg.rate_hz; the expert acts every tick.
/// round(full_fraction * n) demos (chosen by `rng`) run every stage; the rest
/// stop after a random earlier stage. Demo i uses rng.fork(i + 1).
std::vector<data::Demonstration> generate_demonstrations(std::size_t n,
                                                         const ConditionProfile& cond,
                                                         nn::Rng& rng,
                                                         const GenerationConfig& cfg = {});

}  // namespace pileload::sim

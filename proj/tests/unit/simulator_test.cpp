#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "pileload/dataset/dataset.hpp"
#include "pileload/errors.hpp"
#include "pileload/simulator/rollout.hpp"
#include "pileload/util/text.hpp"

using namespace pileload;
using namespace pileload::sim;

namespace {

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  ctl::Action act(const ExtendedSensorVector&) override {
    ctl::Action a;
    for (double& v : a.u) v = rng_.uniform(-1.0, 1.0);
    return a;
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<RandomPolicy>(*this); }

 private:
  nn::Rng rng_;
};

LoaderState random_state(nn::Rng& rng) {
  LoaderState s;
  s.x = rng.uniform(-0.4, 4.0);
  s.v = rng.uniform(0.0, 1.0);
  s.theta1 = rng.uniform(0.0, 0.9);
  s.theta2 = rng.uniform(0.0, 1.2);
  s.fill = rng.uniform(0.0, 1.0);
  s.internal_load = rng.uniform(0.0, 1.5);
  return s;
}

}  // namespace

TEST(Conditions, BuiltinSlip) {
  EXPECT_EQ(builtin_condition("summer").slip, 0.0);
  EXPECT_GT(builtin_condition("winter_ice").slip, 0.0);
  EXPECT_GT(builtin_condition("winter_snow").slip, 0.0);
  EXPECT_THROW(builtin_condition("spring"), std::invalid_argument);
}

TEST(Conditions, ProfileFileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "pileload_cond_test.txt";
  ConditionProfile c = builtin_condition("winter_snow");
  c.name = "custom";
  c.pile_distance_max = 3.5;
  util::write_file(path, condition_to_text(c));
  const ConditionProfile back = resolve_condition(path.string());
  EXPECT_EQ(back.name, "custom");
  EXPECT_EQ(back.slip, c.slip);
  EXPECT_EQ(back.pile_distance_max, 3.5);
  EXPECT_EQ(back.sensor_noise_std, c.sensor_noise_std);

  util::write_file(path, "name=bad\nslip=1.2\nmaterial_stiffness=1\npile_distance_min=1\n"
                         "pile_distance_max=2\nsurface_drag=1\n");
  EXPECT_THROW(load_condition(path), DataError);
  std::filesystem::remove(path);
}

TEST(Step, ZeroInputAtRestIsFixedPoint) {
  LoaderState s;
  s.x = 2.0;
  const auto next = step(s, {0.0, 0.0, 0.0}, builtin_condition("summer"));
  EXPECT_EQ(next, s);
}

TEST(Step, ThrottleMovesTowardPile) {
  LoaderState s;
  s.x = 3.0;
  const auto next = step(s, {0.0, 0.0, 0.5}, builtin_condition("summer"));
  EXPECT_LT(next.x, s.x);
  EXPECT_GT(next.x, 0.0);
}

TEST(Step, RejectsNonFiniteControl) {
  EXPECT_THROW(step({}, {0.0, NAN, 0.0}, builtin_condition("summer")), std::invalid_argument);
  EXPECT_THROW(step({}, {INFINITY, 0.0, 0.0}, builtin_condition("summer")),
               std::invalid_argument);
  EXPECT_THROW(step({}, {0.0, 0.0, 0.0}, builtin_condition("summer"), 0.0),
               std::invalid_argument);
}

TEST(Step, PureAndClamped) {
  nn::Rng rng(5);
  const MachineParams m;
  const auto cond = builtin_condition("winter_snow");
  for (int i = 0; i < 200; ++i) {
    const LoaderState s = random_state(rng);
    const ControlVector u = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const auto a = step(s, u, cond);
    EXPECT_EQ(a, step(s, u, cond));
    EXPECT_GE(a.theta1, m.theta1_min);
    EXPECT_LE(a.theta1, m.theta1_max);
    EXPECT_GE(a.theta2, m.theta2_min);
    EXPECT_LE(a.theta2, m.theta2_max);
    EXPECT_GE(a.v, 0.0);
    EXPECT_GE(a.internal_load, 0.0);
    EXPECT_GE(a.fill, s.fill);
    EXPECT_LE(a.fill, 1.0);
  }
}

TEST(Step, FillMonotoneAlongRandomRollouts) {
  for (const auto& name : builtin_condition_names()) {
    const auto cond = builtin_condition(name);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      RandomPolicy policy(seed);
      nn::Rng rng(seed + 100);
      const auto r = rollout(policy, cond, rng);
      double prev = 0.0;
      for (const auto& p : r.trajectory) {
        EXPECT_GE(p.state.fill, prev);
        EXPECT_LE(p.state.fill, 1.0);
        prev = p.state.fill;
      }
      EXPECT_GE(r.final_state.fill, prev);
    }
  }
}

TEST(Sense, IdleBaselines) {
  // Idle terms of the sensor model: p_d 20 bar, p_t 30 bar.
  const LoaderState s;
  const auto summer = sense_clean(s, builtin_condition("summer"));
  EXPECT_EQ(summer[kPd], 20.0);
  EXPECT_EQ(summer[kPt], 30.0);
  EXPECT_EQ(summer[kPumpAngle], 0.0);
}

TEST(Sense, NoiseFreeIsDeterministic) {
  const auto cond = builtin_condition("summer").without_noise();
  nn::Rng a(1), b(2), states(3);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_state(states);
    EXPECT_EQ(sense(s, cond, a), sense(s, cond, b));
    EXPECT_EQ(sense(s, cond, a), sense_clean(s, cond));
  }
}

TEST(Sense, SlipScalesDrivePressureOnly) {
  const auto summer = builtin_condition("summer").without_noise();
  const auto ice = builtin_condition("winter_ice").without_noise();
  ASSERT_EQ(ice.slip, 0.6);
  nn::Rng rng(9), na(1), nb(1);
  for (int i = 0; i < 500; ++i) {
    const auto s = random_state(rng);
    const auto a = sense(s, summer, na);
    const auto b = sense(s, ice, nb);
    EXPECT_EQ(b[kPd], a[kPd] * (1.0 - 0.6));
    EXPECT_EQ(b[kPt], a[kPt]);
    for (std::size_t c : {kTheta1, kTheta2, kPl, kPb, kPumpAngle}) EXPECT_EQ(b[c], a[c]);
  }
}

TEST(Sense, DrivePressureDecreasesWithSlip) {
  nn::Rng rng(4);
  auto cond = builtin_condition("summer").without_noise();
  for (int i = 0; i < 50; ++i) {
    const auto s = random_state(rng);
    double prev = INFINITY;
    const double pt = sense_clean(s, cond)[kPt];
    for (double slip : {0.0, 0.1, 0.3, 0.6, 0.9}) {
      cond.slip = slip;
      const auto o = sense_clean(s, cond);
      EXPECT_LT(o[kPd], prev);
      EXPECT_EQ(o[kPt], pt);
      prev = o[kPd];
    }
  }
}

TEST(Expert, ApproachFarFromPile) {
  ExpertMemory mem;
  const auto s = sense_clean(LoaderState{4.0, 0.0, 0.0, 0.0, 0.0, 0.0}, builtin_condition("summer"));
  const auto u = scripted_expert(s, mem);
  EXPECT_EQ(u[0], 0.0);
  EXPECT_EQ(u[1], 0.0);
  EXPECT_GT(u[2], 0.0);
  EXPECT_EQ(mem.phase, ExpertPhase::approach);
}

TEST(Expert, SummerRolloutsFillTheBucket) {
  const auto cond = builtin_condition("summer");
  ExpertPolicy expert;
  nn::Rng rng(2024);
  const auto summary = evaluate_success(expert, cond, 30, rng);
  EXPECT_EQ(summary.successes, 30u);
  EXPECT_EQ(summary.percent, 100.0);
  for (const auto& r : summary.results) {
    EXPECT_EQ(r.termination, Termination::filled);
    EXPECT_GE(r.final_state.fill, 0.99);
    for (const auto& p : r.trajectory) {
      int active = 0;
      for (double v : p.action.u) active += v != 0.0;
      EXPECT_LE(active, 1);
    }
  }
}

TEST(Rollout, ZeroPolicyStalls) {
  ZeroPolicy zero;
  nn::Rng rng(1);
  const auto r = rollout(zero, builtin_condition("summer"), rng);
  EXPECT_EQ(r.termination, Termination::stalled);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.steps, 30u);
}

TEST(Rollout, SuccessMatchesFinalFillAndLengthBound) {
  const auto cond = builtin_condition("winter_ice");
  RolloutConfig cfg;
  cfg.max_steps = 40;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomPolicy random(seed);
    ExpertPolicy expert;
    for (Policy* p : {static_cast<Policy*>(&random), static_cast<Policy*>(&expert)}) {
      nn::Rng rng(seed);
      const auto r = rollout(*p, cond, rng, cfg);
      EXPECT_LE(r.trajectory.size(), cfg.max_steps);
      EXPECT_EQ(r.steps, r.trajectory.size());
      EXPECT_EQ(r.success, r.final_state.fill >= 0.5);
    }
  }
}

TEST(Rollout, InitialDistanceInRange) {
  const auto cond = builtin_condition("summer");
  nn::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto s = initial_state(cond, rng);
    EXPECT_GE(s.x, cond.pile_distance_min);
    EXPECT_LE(s.x, cond.pile_distance_max);
    EXPECT_EQ(s.v, 0.0);
  }
}

TEST(SuccessRate, Arithmetic) {
  EXPECT_EQ(percent(12, 15), 80.0);
  EXPECT_EQ(percent(15, 15), 100.0);
  EXPECT_EQ(percent(0, 30), 0.0);
}

TEST(SuccessRate, DeterministicAndThreadIndependent) {
  const auto cond = builtin_condition("winter_snow");
  RandomPolicy policy(11);
  nn::Rng a(5), b(5);
  const auto one = evaluate_success(policy, cond, 12, a, {}, 1);
  const auto two = evaluate_success(policy, cond, 12, b, {}, 3);
  ASSERT_EQ(one.results.size(), two.results.size());
  EXPECT_EQ(one.successes, two.successes);
  for (std::size_t i = 0; i < one.results.size(); ++i) {
    EXPECT_EQ(one.results[i].final_state, two.results[i].final_state);
  }
  ExpertPolicy expert;
  nn::Rng c(8);
  EXPECT_EQ(success_rate(expert, builtin_condition("summer"), 5, c), 100.0);
}

TEST(Generation, CorpusCountsAndDeterminism) {
  const auto cond = builtin_condition("summer");
  nn::Rng a(72), b(72);
  const auto demos = generate_demonstrations(72, cond, a);
  ASSERT_EQ(demos.size(), 72u);
  std::size_t full = 0;
  for (const auto& d : demos) {
    EXPECT_NO_THROW(d.validate());
    EXPECT_EQ(d.sample_rate_hz, 500.0);
    full += d.final_fill() >= 0.99;
  }
  EXPECT_EQ(full, 52u);
  EXPECT_EQ(data::filter_ideal(demos, 0.99).size(), 52u);
  EXPECT_GE(data::single_action_fraction(data::build_dataset(demos, data::DatasetSpec::d1())), 0.8);

  const auto again = generate_demonstrations(72, cond, b);
  for (std::size_t i = 0; i < demos.size(); i += 9) {
    EXPECT_EQ(data::to_csv(demos[i]), data::to_csv(again[i]));
  }
  EXPECT_THROW(generate_demonstrations(0, cond, a), std::invalid_argument);
}

TEST(Generation, ToDemonstrationKeepsTicks) {
  ExpertPolicy expert;
  nn::Rng rng(6);
  const auto r = rollout(expert, builtin_condition("summer"), rng);
  const auto d = to_demonstration(r, "r0");
  ASSERT_EQ(d.records.size(), r.trajectory.size());
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.records.back().u, r.trajectory.back().action.u);
}

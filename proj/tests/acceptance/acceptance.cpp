// Acceptance run: one PASS/FAIL line per criterion. Arguments select a subset
// (e.g. `acceptance 2 7`); with none, all ten run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "pileload/controllers/checkpoint.hpp"
#include "pileload/controllers/controller.hpp"
#include "pileload/controllers/reference.hpp"
#include "pileload/dataset/dataset.hpp"
#include "pileload/simulator/rollout.hpp"
#include "pileload/training/experiment.hpp"
#include "pileload/training/multi_trial.hpp"
#include "pileload/training/trainer.hpp"
#include "pileload/util/text.hpp"

using namespace pileload;
using ctl::ControllerKind;
using ctl::ControllerSpec;

namespace {

// Tolerances and budgets.
constexpr double kGradStep = 1e-6;
constexpr double kGradRelError = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr std::size_t kNNetV2Params = 43243;
constexpr std::size_t kNNetParams = 43;
constexpr std::size_t kAnnetHeadParams = 4740;
constexpr std::size_t kMaskSamples = 10000;
constexpr double kMaskSumTol = 1e-12;
constexpr double kOverfitMse = 1e-3;
constexpr double kOverfitSeconds = 300.0;
constexpr std::size_t kCorpusDemos = 72;
constexpr std::size_t kIdealDemos = 52;
constexpr double kSingleActionMin = 0.8;
constexpr std::size_t kTrials = 20;
constexpr double kTrialSeconds = 15.0 * 60.0;
constexpr std::size_t kRollouts = 30;
constexpr double kLearnedSuccessMin = 80.0;

// Fixed seeds of the acceptance run.
constexpr std::uint64_t kSeed = 20240;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::vector<data::Demonstration> summer_corpus(std::size_t n, std::uint64_t seed,
                                               double full_fraction, double rate_hz = 500.0) {
  nn::Rng rng(seed);
  sim::GenerationConfig gen;
  gen.full_fraction = full_fraction;
  gen.rate_hz = rate_hz;
  return sim::generate_demonstrations(n, sim::builtin_condition("summer"), rng, gen);
}

Outcome gradients() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  nn::Rng root(kSeed);
  for (auto kind : {ControllerKind::nnet, ControllerKind::nnetv2, ControllerKind::annet,
                    ControllerKind::dannet}) {
    nn::Rng rng = root.fork(static_cast<std::uint64_t>(kind));
    auto params = ctl::build_controller(ControllerSpec::make(kind, true, false), rng);
    for (nn::ParamSet* ps : {&params.theta, &params.psi}) {
      for (std::size_t i = 1; i < ps->size(); i += 2) {
        for (double& v : ps->value(i).values()) v = rng.uniform(-0.1, 0.1);
      }
    }
    const auto batch = ctl::random_batch(params.spec, 4, rng);
    const auto r = ctl::check_gradients(params, batch, kGradStep);
    ok = ok && r.checked == params.parameter_count() && r.max_rel_error < kGradRelError;
    detail += std::string(ctl::to_string(kind)) + " " + num(r.max_rel_error) + "; ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kGradSeconds;
  return {ok, "max rel error " + detail + "time " + num(secs) + " s"};
}

Outcome architecture() {
  nn::Rng rng(kSeed);
  const auto v2 = ctl::build_controller(ControllerSpec::make(ControllerKind::nnetv2, true, false), rng);
  const auto n1 = ctl::build_controller(ControllerSpec::make(ControllerKind::nnet, true, false), rng);
  const auto an = ctl::build_controller(ControllerSpec::make(ControllerKind::annet, true, false), rng);
  const double ratio = static_cast<double>(v2.parameter_count()) /
                       static_cast<double>(n1.parameter_count());
  const bool ok = v2.parameter_count() == kNNetV2Params && n1.parameter_count() == kNNetParams &&
                  an.psi.scalar_count() == kAnnetHeadParams && std::log10(ratio) >= 2.5 &&
                  std::log10(ratio) < 3.5;
  return {ok, "NNetV2 " + std::to_string(v2.parameter_count()) + ", NNet " +
                  std::to_string(n1.parameter_count()) + ", ANNet head " +
                  std::to_string(an.psi.scalar_count()) + ", ratio " + num(ratio)};
}

bool mask_ok(const std::vector<double>& m, double& worst_sum, double& lowest, double& highest) {
  double sum = 0.0;
  bool inside = true;
  for (double v : m) {
    sum += v;
    lowest = std::min(lowest, v);
    highest = std::max(highest, v);
    inside = inside && v > 0.0 && v < 1.0;
  }
  worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  return inside && std::abs(sum - 1.0) <= kMaskSumTol;
}

Outcome attention_invariants() {
  const auto demos = summer_corpus(6, kSeed + 3, 1.0, 100.0);
  const auto ds = data::build_dataset(demos, data::DatasetSpec::d2());
  train::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.seed = kSeed;
  bool ok = true;
  double worst_sum = 0.0, lowest = 1.0, highest = 0.0, max_u = 0.0;
  std::size_t checkpoints = 0;
  nn::Rng inputs(kSeed + 4);
  // Sensor envelope: the observed range of each channel widened by a quarter
  // of its span on both sides.
  ExtendedSensorVector lo, hi;
  lo.fill(INFINITY);
  hi.fill(-INFINITY);
  for (const auto& smp : ds.samples) {
    for (std::size_t c = 0; c < kSensorChannels; ++c) {
      lo[c] = std::min(lo[c], smp.s[c]);
      hi[c] = std::max(hi[c], smp.s[c]);
    }
  }
  for (std::size_t c = 0; c < kSensorChannels; ++c) {
    const double pad = 0.25 * std::max(hi[c] - lo[c], 1e-3);
    lo[c] -= pad;
    hi[c] += pad;
  }
  for (auto kind : {ControllerKind::annet, ControllerKind::dannet}) {
    for (bool extended : {false, true}) {
      const auto r = train::train(ControllerSpec::make(kind, true, extended), ds, cfg);
      ++checkpoints;
      for (std::size_t i = 0; i < kMaskSamples; ++i) {
        ExtendedSensorVector raw{};
        for (std::size_t c = 0; c < kSensorChannels; ++c) raw[c] = inputs.uniform(lo[c], hi[c]);
        const auto a = ctl::act(r.params, raw);
        for (double u : a.u) max_u = std::max(max_u, std::abs(u));
        ok = ok && a.mask && mask_ok(*a.mask, worst_sum, lowest, highest);
        if (kind == ControllerKind::dannet) {
          ok = ok && a.output_mask &&
               mask_ok(std::vector<double>(a.output_mask->begin(), a.output_mask->end()), worst_sum,
                       lowest, highest);
        }
      }
    }
  }
  ok = ok && max_u <= 1.0;
  return {ok, std::to_string(checkpoints) + " checkpoints x " + std::to_string(kMaskSamples) +
                  " inputs, worst |sum - 1| " + num(worst_sum) + ", components in [" +
                  num(lowest) + ", " + num(highest) + "], max |u| " + num(max_u)};
}

Outcome recipe() {
  const train::TrainConfig d{};
  const bool defaults = d.epochs == 150 && d.batch_size == 512 && d.lr == 0.001 &&
                        d.dropout_p == 0.35;
  const auto demos = summer_corpus(3, kSeed + 5, 1.0, 20.0);
  const auto ds = data::flatten(demos, data::Variant::d1);
  const auto spec = ControllerSpec::make(ControllerKind::nnetv2, true, false);
  const auto a = ctl::serialize_checkpoint(train::train(spec, ds, d).params);
  const auto b = ctl::serialize_checkpoint(train::train(spec, ds, d).params);
  return {defaults && a == b, std::string("defaults ") + (defaults ? "ok" : "wrong") +
                                  ", two runs on " + std::to_string(ds.size()) + " samples " +
                                  (a == b ? "bit-identical" : "differ")};
}

Outcome overfit() {
  const auto t0 = Clock::now();
  const auto demos = summer_corpus(10, kSeed + 6, 52.0 / 72.0);
  const auto ds = data::build_dataset(demos, data::DatasetSpec::d1());
  train::TrainConfig cfg;
  cfg.seed = kSeed;
  const auto r = train::train(ControllerSpec::make(ControllerKind::nnetv2, true, false), ds, cfg);
  const double mse = train::validate(r.params, ds);
  const double secs = seconds_since(t0);
  return {mse < kOverfitMse && secs < kOverfitSeconds,
          std::to_string(ds.size()) + " samples, training MSE " + num(mse) + " after " +
              std::to_string(cfg.epochs) + " epochs, time " + num(secs) + " s"};
}

Outcome dataset_construction() {
  const auto demos = summer_corpus(kCorpusDemos, kSeed + 7, 52.0 / 72.0);
  std::vector<std::string> ideal;
  std::size_t expected = 0;
  for (const auto& d : demos) {
    if (d.final_fill() >= 0.99) {
      ideal.push_back(d.id);
      expected += (d.records.size() + 24) / 25;
    }
  }
  const auto d2 = data::build_dataset(demos, data::DatasetSpec::d2());
  bool decimated = d2.rate_hz == 20.0;
  for (std::size_t i = 0; decimated && i < d2.demo_ids.size(); ++i) {
    const auto& src = *std::find_if(demos.begin(), demos.end(),
                                    [&](const auto& d) { return d.id == d2.demo_ids[i]; });
    for (std::size_t j = d2.demo_offsets[i]; j < d2.demo_offsets[i + 1]; ++j) {
      const auto& rec = src.records[(j - d2.demo_offsets[i]) * 25];
      decimated = decimated && d2.samples[j].s == rec.s && d2.samples[j].u == rec.u;
    }
  }
  const double single = data::single_action_fraction(data::build_dataset(demos, data::DatasetSpec::d1()));
  const bool ok = ideal.size() == kIdealDemos && d2.demo_ids == ideal && d2.size() == expected &&
                  decimated && single >= kSingleActionMin;
  return {ok, std::to_string(ideal.size()) + " ideal, D_II keeps " +
                  std::to_string(d2.demo_ids.size()) + " demos, " + std::to_string(d2.size()) +
                  " samples (expected " + std::to_string(expected) + "), single-action fraction " +
                  num(single)};
}

Outcome observability() {
  const auto summer = sim::builtin_condition("summer").without_noise();
  const auto ice = sim::builtin_condition("winter_ice").without_noise();
  nn::Rng rng(kSeed + 8);
  bool ok = true;
  std::size_t states = 0;
  for (; states < 1000; ++states) {
    sim::LoaderState s;
    s.x = rng.uniform(-1.0, 3.0);
    s.v = rng.uniform(0.0, 1.0);
    s.theta1 = rng.uniform(0.0, 0.9);
    s.theta2 = rng.uniform(0.0, 1.2);
    s.fill = rng.uniform(0.0, 1.0);
    s.internal_load = rng.uniform(0.0, 3.0);
    const auto a = sim::sense_clean(s, summer);
    const auto b = sim::sense_clean(s, ice);
    ok = ok && b[kPd] == a[kPd] * (1.0 - ice.slip) && b[kPt] == a[kPt];
  }
  return {ok, std::to_string(states) + " states, slip " + num(ice.slip)};
}

Outcome shifted_validation() {
  const auto t0 = Clock::now();
  const auto summer = summer_corpus(20, kSeed + 9, 52.0 / 72.0);
  nn::Rng wr(kSeed + 10);
  sim::GenerationConfig full;
  full.full_fraction = 1.0;
  const auto winter =
      sim::generate_demonstrations(10, sim::builtin_condition("winter_ice"), wr, full);
  const auto tr = data::build_dataset(summer, data::DatasetSpec::d2());
  const auto va = data::build_dataset(winter, data::DatasetSpec::d2());
  train::TrainConfig cfg;
  cfg.seed = kSeed;
  const auto seeds = train::trial_seeds(kSeed, kTrials);

  double final_mean[3] = {};
  bool reproduced = true;
  const ControllerKind kinds[] = {ControllerKind::nnetv2, ControllerKind::annet,
                                  ControllerKind::dannet};
  for (int k = 0; k < 3; ++k) {
    const auto spec = ControllerSpec::make(kinds[k], true, false);
    const auto mt = train::multi_trial(spec, tr, va, cfg, seeds);
    final_mean[k] = mt.final_mean();
    train::TrainConfig again = cfg;
    again.seed = seeds[0];
    const auto r = train::train(spec, tr, again, &va);
    reproduced = reproduced && r.curve.val == mt.curves[0].val &&
                 r.curve.train == mt.curves[0].train;
  }
  const double secs = seconds_since(t0);
  const double margin_an = final_mean[0] - final_mean[1];
  const double margin_dan = final_mean[0] - final_mean[2];
  const bool ordered = margin_an > 0.0 && margin_dan > 0.0;
  return {reproduced && secs < kTrialSeconds,
          std::to_string(kTrials) + " trials on " + std::to_string(tr.size()) +
              " summer samples, winter_ice validation; final mean val MSE NNetV2 " +
              num(final_mean[0]) + ", ANNet " + num(final_mean[1]) + ", DANNet " +
              num(final_mean[2]) + "; ordering " + (ordered ? "holds" : "does not hold") +
              " (margins " + num(margin_an) + ", " + num(margin_dan) + "); curves " +
              (reproduced ? "reproduced bitwise" : "NOT reproduced") + "; time " + num(secs) +
              " s"};
}

std::vector<std::vector<std::string>> csv_rows(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  const std::string text = util::read_file(path);
  for (const auto& line : util::split(text, '\n')) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    for (const auto& f : util::split(line, ',')) row.emplace_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

Outcome grid_tables() {
  const auto out = std::filesystem::temp_directory_path() / "pileload_acceptance_grid";
  std::filesystem::remove_all(out);
  auto g = train::ExperimentGrid::parse(
      "datasets=d1,d2\ncontrollers=nnet,rf,nnetv2,annet,dannet\nuse_pt=no,yes\n"
      "attention_extended=no,yes\neval_conditions=summer,winter_ice\nrollouts=3\ndemos=8\n"
      "rate_hz=100\nepochs=2\nbatch_size=64\n");
  g.seed = kSeed;
  const auto result = train::run_experiment_grid(g, out);

  using Rows = std::vector<std::vector<std::string>>;
  const Rows t2 = csv_rows(out / "table_2.csv");
  const Rows t3 = csv_rows(out / "table_3.csv");
  const Rows t4 = csv_rows(out / "table_4.csv");
  const Rows res = csv_rows(out / "results.csv");

  bool ok = t2.size() == 3 && t2[0] == std::vector<std::string>{"train_dataset", "test_condition",
                                                                 "NNet", "RF", "NNetV2"};
  for (std::size_t i = 1; ok && i < t2.size(); ++i) ok = t2[i].size() == 5 && t2[i][0] == "D_II";
  ok = ok && t2[1][1] == "summer" && t2[2][1] == "winter_ice";

  ok = ok && t3.size() == 7 &&
       t3[0] == std::vector<std::string>{"controller", "p_t", "D_II", "D_I"};
  const char* t3_names[] = {"RF", "NNet", "NNetV2"};
  for (std::size_t i = 1; ok && i < t3.size(); ++i) {
    ok = t3[i].size() == 4 && t3[i][0] == t3_names[(i - 1) / 2] &&
         t3[i][1] == ((i - 1) % 2 ? "yes" : "no");
  }

  ok = ok && t4.size() == 10 &&
       t4[0] == std::vector<std::string>{"controller", "p_t", "s_prime", "D_I", "D_II"};
  const char* t4_names[] = {"NNetV2", "ANNet", "DANNet"};
  const char* t4_flags[][2] = {{"no", "no"}, {"yes", "no"}, {"yes", "yes"}};
  for (std::size_t i = 1; ok && i < t4.size(); ++i) {
    ok = t4[i].size() == 5 && t4[i][0] == t4_names[(i - 1) % 3] &&
         t4[i][1] == t4_flags[(i - 1) / 3][0] && t4[i][2] == t4_flags[(i - 1) / 3][1];
  }

  ok = ok && res.size() == 1 + result.cells.size() * 2 &&
       std::filesystem::exists(out / "manifest.txt");
  const std::string detail = std::to_string(result.cells.size()) + " cells, " +
                             std::to_string(result.skipped.size()) + " skipped; table rows " +
                             std::to_string(t2.size() - 1) + "/" + std::to_string(t3.size() - 1) +
                             "/" + std::to_string(t4.size() - 1);
  std::filesystem::remove_all(out);
  return {ok, detail};
}

Outcome closed_loop() {
  const auto summer = sim::builtin_condition("summer");
  nn::Rng er(kSeed + 11);
  const auto expert = sim::evaluate_success(sim::ExpertPolicy{}, summer, kRollouts, er);

  const auto demos = summer_corpus(10, kSeed + 6, 52.0 / 72.0);
  const auto ds = data::build_dataset(demos, data::DatasetSpec::d1());
  train::TrainConfig cfg;
  cfg.seed = kSeed;
  auto r = train::train(ControllerSpec::make(ControllerKind::dannet, true, false), ds, cfg);
  const sim::NeuralPolicy policy(std::make_shared<const ctl::ControllerParams>(std::move(r.params)));
  nn::Rng lr(kSeed + 12);
  const auto learned = sim::evaluate_success(policy, summer, kRollouts, lr);
  return {expert.percent == 100.0 && learned.percent >= kLearnedSuccessMin,
          "expert " + num(expert.percent) + "%, DANNet " + num(learned.percent) + "% over " +
              std::to_string(kRollouts) + " summer rollouts"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"architecture fidelity", architecture},
      {"attention invariants", attention_invariants},
      {"recipe reproducibility", recipe},
      {"overfit sanity", overfit},
      {"dataset construction", dataset_construction},
      {"observability analog", observability},
      {"shifted-condition multi-trial", shifted_validation},
      {"experiment grid tables", grid_tables},
      {"closed-loop sanity", closed_loop},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s C%zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "pileload/controllers/checkpoint.hpp"
#include "pileload/errors.hpp"
#include "pileload/simulator/rollout.hpp"
#include "pileload/training/experiment.hpp"
#include "pileload/training/multi_trial.hpp"
#include "pileload/training/trace.hpp"
#include "pileload/training/trainer.hpp"
#include "pileload/util/hash.hpp"
#include "pileload/util/text.hpp"

using namespace pileload;
using namespace pileload::train;
namespace fs = std::filesystem;

namespace {

std::vector<data::Demonstration> corpus(std::size_t n, std::uint64_t seed, double rate = 20.0,
                                        bool clean = false) {
  auto cond = sim::builtin_condition("summer");
  if (clean) cond = cond.without_noise();
  sim::GenerationConfig gen;
  gen.rate_hz = rate;
  gen.full_fraction = 1.0;
  nn::Rng rng(seed);
  return sim::generate_demonstrations(n, cond, rng, gen);
}

const data::Dataset& small_set() {
  static const data::Dataset ds = data::build_dataset(corpus(3, 1), data::DatasetSpec::d1());
  return ds;
}

const data::Dataset& val_set() {
  static const data::Dataset ds = data::build_dataset(corpus(2, 2), data::DatasetSpec::d1());
  return ds;
}

TrainConfig quick(std::size_t epochs = 3) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 128;
  cfg.seed = 7;
  return cfg;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  for (auto l : util::split(text, '\n')) {
    if (!l.empty()) out.emplace_back(l);
  }
  return out;
}

}  // namespace

TEST(TrainConfig, DefaultsFollowTheRecipe) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.epochs, 150u);
  EXPECT_EQ(cfg.batch_size, 512u);
  EXPECT_EQ(cfg.lr, 0.001);
  EXPECT_EQ(cfg.dropout_p, 0.35);
  EXPECT_TRUE(cfg.shuffle);
}

TEST(Train, SameSeedIsBitIdentical) {
  for (auto kind : {ctl::ControllerKind::nnetv2, ctl::ControllerKind::dannet}) {
    const auto spec = ctl::ControllerSpec::make(kind, true, false);
    const auto a = train::train(spec, small_set(), quick(), &val_set());
    const auto b = train::train(spec, small_set(), quick(), &val_set());
    EXPECT_EQ(ctl::serialize_checkpoint(a.params), ctl::serialize_checkpoint(b.params));
    EXPECT_EQ(a.curve.train, b.curve.train);
    EXPECT_EQ(a.curve.val, b.curve.val);
    EXPECT_EQ(a.curve.train.size(), 3u);
    EXPECT_EQ(a.curve.val.size(), 3u);

    auto other = quick();
    other.seed = 8;
    const auto c = train::train(spec, small_set(), other);
    EXPECT_NE(ctl::serialize_checkpoint(a.params), ctl::serialize_checkpoint(c.params));
  }
}

TEST(Train, ZeroLearningRateKeepsInitialParameters) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::annet, true, false);
  auto cfg = quick(4);
  cfg.lr = 0.0;
  cfg.dropout_p = 0.0;
  const auto r = train::train(spec, small_set(), cfg, &val_set());
  nn::Rng init = nn::Rng(cfg.seed).fork(1);
  auto fresh = ctl::build_controller(spec, init);
  for (std::size_t i = 0; i < fresh.theta.size(); ++i) {
    EXPECT_TRUE(fresh.theta.value(i) == r.params.theta.value(i));
  }
  for (std::size_t i = 0; i < fresh.psi.size(); ++i) {
    EXPECT_TRUE(fresh.psi.value(i) == r.params.psi.value(i));
  }
  for (std::size_t e = 1; e < cfg.epochs; ++e) {
    EXPECT_EQ(r.curve.val[e], r.curve.val[0]);
    EXPECT_NEAR(r.curve.train[e], r.curve.train[0], 1e-12);
  }
}

TEST(Train, LossDecreases) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::nnetv2, true, false);
  const auto r = train::train(spec, small_set(), quick(30));
  EXPECT_LT(r.curve.train.back(), 0.5 * r.curve.train.front());
}

TEST(Train, BatchLargerThanDatasetAndBadInputs) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::nnet, false, false);
  auto cfg = quick(2);
  cfg.batch_size = 1 << 20;
  EXPECT_NO_THROW(train::train(spec, small_set(), cfg));
  EXPECT_THROW(train::train(spec, data::Dataset{}, cfg), DataError);
  cfg.epochs = 0;
  EXPECT_THROW(train::train(spec, small_set(), cfg), std::invalid_argument);
  cfg.epochs = 1;
  cfg.lr = -1.0;
  EXPECT_THROW(train::train(spec, small_set(), cfg), std::invalid_argument);
}

TEST(Validate, PureAndRepeatable) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::dannet, true, true);
  const auto r = train::train(spec, small_set(), quick(2));
  const std::string before = ctl::serialize_checkpoint(r.params);
  const double a = validate(r.params, val_set());
  const double b = validate(r.params, val_set());
  EXPECT_EQ(a, b);
  EXPECT_EQ(ctl::serialize_checkpoint(r.params), before);
  EXPECT_THROW(validate(r.params, data::Dataset{}), DataError);
}

TEST(Validate, PerfectPredictionIsZero) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::nnet, true, false);
  nn::Rng rng(1);
  auto params = ctl::build_controller(spec, rng);
  for (std::size_t i = 0; i < params.theta.size(); ++i) {
    for (double& v : params.theta.value(i).values()) v = 0.0;
  }
  data::Dataset ds = small_set();
  for (auto& s : ds.samples) s.u = {0.0, 0.0, 0.0};
  params.norm = data::normalization_for(ds.norm, spec);
  EXPECT_EQ(validate(params, ds), 0.0);
}

TEST(Validate, NormalizationShapeMismatch) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::nnet, false, false);
  nn::Rng rng(1);
  auto params = ctl::build_controller(spec, rng);
  params.norm = ctl::Normalization{{0, 0, 0, 0}, {1, 1, 1, 1}};
  EXPECT_THROW(validate(params, small_set()), ShapeError);
}

TEST(MultiTrial, IdenticalSeedsGiveZeroStd) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::nnet, true, false);
  const auto r = multi_trial(spec, small_set(), val_set(), quick(3), std::vector<std::uint64_t>{5, 5});
  ASSERT_EQ(r.std_val.size(), 3u);
  for (double s : r.std_val) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(r.mean_val, r.curves[0].val);
}

TEST(MultiTrial, MeanAndStdMatchRecomputation) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::nnetv2, true, false);
  const auto r = multi_trial(spec, small_set(), val_set(), quick(3), 4);
  ASSERT_EQ(r.curves.size(), 4u);
  EXPECT_EQ(r.seeds, trial_seeds(7, 4));
  for (std::size_t e = 0; e < 3; ++e) {
    long double sum = 0;
    for (const auto& c : r.curves) sum += c.val[e];
    const long double mean = sum / 4;
    long double ss = 0;
    for (const auto& c : r.curves) ss += (c.val[e] - mean) * (c.val[e] - mean);
    EXPECT_NEAR(r.mean_val[e], static_cast<double>(mean), 1e-12);
    EXPECT_NEAR(r.std_val[e], static_cast<double>(std::sqrt(ss / 3)), 1e-12);
  }

  const auto csv = lines(multi_trial_csv(r));
  ASSERT_EQ(csv.size(), 4u);
  EXPECT_EQ(csv[0], "epoch,mean_val_mse,std_val_mse,trial_0,trial_1,trial_2,trial_3");
  const auto row = util::parse_double_list(csv[3]);
  EXPECT_EQ(row[0], 3.0);
  EXPECT_EQ(row[1], r.mean_val[2]);
  EXPECT_EQ(row[6], r.curves[3].val[2]);

  EXPECT_THROW(multi_trial(spec, small_set(), val_set(), quick(1), 1), std::invalid_argument);
}

TEST(MultiTrial, ThreadCountDoesNotChangeResults) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::annet, true, false);
  const auto a = multi_trial(spec, small_set(), val_set(), quick(2), 3, 1);
  const auto b = multi_trial(spec, small_set(), val_set(), quick(2), 3, 3);
  EXPECT_EQ(multi_trial_csv(a), multi_trial_csv(b));
}

TEST(Trace, ColumnsRowsAndMaskSums) {
  const auto spec = ctl::ControllerSpec::make(ctl::ControllerKind::dannet, true, false);
  const auto r = train::train(spec, small_set(), quick(2));
  const auto demo = corpus(1, 3).front();
  const auto rows = lines(trace_comparison(r.params, demo));
  ASSERT_EQ(rows.size(), demo.records.size() + 1);
  EXPECT_EQ(rows[0],
            "t,demo_u_theta1,demo_u_theta2,demo_u_g,pred_u_theta1,pred_u_theta2,pred_u_g,"
            "m_theta1_rad,m_theta2_rad,m_p_d_bar,m_p_t_bar,m_u_theta1,m_u_theta2,m_u_g");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto v = util::parse_double_list(rows[i]);
    ASSERT_EQ(v.size(), 14u);
    EXPECT_NEAR(v[7] + v[8] + v[9] + v[10], 1.0, 1e-12);
    EXPECT_NEAR(v[11] + v[12] + v[13], 1.0, 1e-12);
  }

  const auto plain = train::train(ctl::ControllerSpec::make(ctl::ControllerKind::nnet, false, false),
                           small_set(), quick(1));
  EXPECT_EQ(lines(trace_comparison(plain.params, demo))[0],
            "t,demo_u_theta1,demo_u_theta2,demo_u_g,pred_u_theta1,pred_u_theta2,pred_u_g");
}

TEST(Trace, MemorizedDemoIsReproduced) {
  const auto demo = corpus(1, 4, 20.0, true).front();
  const auto ds = data::flatten({demo}, data::Variant::d1);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 16;
  cfg.lr = 3e-4;
  cfg.dropout_p = 0.0;
  cfg.seed = 1;
  const auto r = train::train(ctl::ControllerSpec::make(ctl::ControllerKind::nnetv2, true, false), ds, cfg);
  // The sharp curl/lift switches and the final stop tick stay blurred; a 2000-epoch
  // run leaves 15 of 233 rows above 0.05.
  std::size_t rows = 0, close = 0;
  double total = 0.0;
  for (const auto& row : lines(trace_comparison(r.params, demo))) {
    if (row[0] == 't') continue;
    const auto v = util::parse_double_list(row);
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double e = std::abs(v[4 + k] - v[1 + k]);
      worst = std::max(worst, e);
      total += e;
    }
    ++rows;
    close += worst < 0.05 ? 1 : 0;
  }
  ASSERT_EQ(rows, demo.records.size());
  EXPECT_GE(static_cast<double>(close) / static_cast<double>(rows), 0.9);
  EXPECT_LT(total / static_cast<double>(3 * rows), 0.02);
}

TEST(Grid, ParseAndExpand) {
  const auto g = ExperimentGrid::parse(
      "datasets=d1,D_II\ncontrollers=nnet,rf,annet\nuse_pt=yes\nattention_extended=no,yes\n"
      "rollouts=4\nepochs=2\nseed=9\n");
  EXPECT_EQ(g.datasets.size(), 2u);
  EXPECT_EQ(g.rollouts, 4u);
  EXPECT_EQ(g.train.epochs, 2u);
  EXPECT_EQ(g.train.batch_size, 512u);
  EXPECT_EQ(g.seed, 9u);
  const auto [cells, skipped] = expand(g);
  // Per dataset: nnet (ext skipped), rf (both skipped), annet (both run).
  EXPECT_EQ(cells.size(), 6u);
  EXPECT_EQ(skipped.size(), 6u);
  EXPECT_EQ(cells[0].label(), "d1_nnet_pt1_ext0");
  EXPECT_EQ(ExperimentGrid::parse(g.str()).str(), g.str());

  EXPECT_THROW(ExperimentGrid::parse("colour=red\n"), DataError);
  EXPECT_THROW(ExperimentGrid::parse("controllers=svm\n"), DataError);
  EXPECT_THROW(ExperimentGrid::parse("use_pt=maybe\n"), DataError);
  EXPECT_THROW(ExperimentGrid::parse("rollouts=0\n"), DataError);
}

TEST(Grid, OneCellGivesOneRowAndRepeats) {
  const auto g = ExperimentGrid::parse(
      "datasets=d2\ncontrollers=nnetv2\nuse_pt=yes\nattention_extended=no\n"
      "eval_conditions=winter_ice\nrollouts=3\ndemos=3\nrate_hz=100\nepochs=2\nseed=4\n");
  const fs::path dir = fs::temp_directory_path() / "pileload_grid_test";
  fs::remove_all(dir);
  const auto r = run_experiment_grid(g, dir);
  ASSERT_EQ(r.cells.size(), 1u);
  const auto results = lines(results_csv(r));
  ASSERT_EQ(results.size(), 2u);
  EXPECT_EQ(results[0],
            "dataset,controller,p_t,s_prime,condition,successes,rollouts,success_pct,"
            "final_train_loss,seed,checkpoint");
  EXPECT_EQ(results[1].rfind("D_II,NNetV2,yes,no,winter_ice,", 0), 0u);

  const auto t3 = lines(table_3_csv(r, g));
  ASSERT_EQ(t3.size(), 7u);
  EXPECT_EQ(t3[0], "controller,p_t,D_II,D_I");
  EXPECT_EQ(t3[1], "RF,no,n/a,n/a");
  EXPECT_EQ(t3[6].rfind("NNetV2,yes,", 0), 0u);
  EXPECT_NE(t3[6], "NNetV2,yes,n/a,n/a");
  const auto t4 = lines(table_4_csv(r, g));
  ASSERT_EQ(t4.size(), 10u);
  EXPECT_EQ(t4[0], "controller,p_t,s_prime,D_I,D_II");
  const auto t2 = lines(table_2_csv(r, g));
  ASSERT_EQ(t2.size(), 2u);
  EXPECT_EQ(t2[1], "D_II,winter_ice,n/a,n/a,n/a");

  for (const char* f : {"results.csv", "table_2.csv", "table_3.csv", "table_4.csv", "manifest.txt",
                        "checkpoints/d2_nnetv2_pt1_ext0.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const std::string ckpt = util::read_file(dir / "checkpoints/d2_nnetv2_pt1_ext0.ckpt");
  EXPECT_EQ(util::git_blob_sha1(ckpt), r.cells[0].checkpoint_sha1);
  EXPECT_NE(util::read_file(dir / "manifest.txt").find(r.cells[0].checkpoint_sha1),
            std::string::npos);

  const auto again = run_experiment_grid(g);
  EXPECT_EQ(results_csv(again), results_csv(r));
  fs::remove_all(dir);
}

TEST(Hash, GitBlobIds) {
  EXPECT_EQ(util::git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(util::git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

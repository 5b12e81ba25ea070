#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "pileload/controllers/checkpoint.hpp"
#include "pileload/controllers/reference.hpp"
#include "pileload/errors.hpp"
#include "pileload/simulator/rollout.hpp"
#include "pileload/training/experiment.hpp"
#include "pileload/training/multi_trial.hpp"
#include "pileload/training/trace.hpp"
#include "pileload/training/trainer.hpp"
#include "pileload/util/hash.hpp"
#include "pileload/util/log.hpp"
#include "pileload/util/text.hpp"

namespace fs = std::filesystem;
using namespace pileload;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kCheckFailed = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) { return util::format_double(v); }

void print(const std::string& line) { std::cout << line << '\n'; }

ctl::ControllerKind kind_or_throw(const std::string& name) {
  auto k = ctl::parse_kind(name);
  if (!k) throw UsageError("unknown controller '" + name + "' (nnet|nnetv2|annet|dannet)");
  return *k;
}

ctl::ControllerSpec spec_or_throw(const std::string& controller, bool use_pt, bool extended) {
  const auto kind = kind_or_throw(controller);
  if (extended && kind == ctl::ControllerKind::nnet) {
    throw UsageError(
        "--attention-extended needs an attention controller (annet, dannet) or nnetv2, which "
        "takes the extra signals by concatenation; nnet has neither");
  }
  try {
    auto spec = ctl::ControllerSpec::make(kind, use_pt, extended);
    spec.validate();
    return spec;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::string curve_csv(const train::LossCurve& curve) {
  std::string out = curve.val.empty() ? "epoch,train_loss\n" : "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < curve.train.size(); ++e) {
    out += std::to_string(e + 1) + "," + fmt(curve.train[e]);
    if (!curve.val.empty()) out += "," + fmt(curve.val[e]);
    out += "\n";
  }
  return out;
}

// gen-demos

struct GenArgs {
  std::size_t n = 72;
  std::string condition = "summer";
  double rate_hz = 500.0;
  double full_fraction = 52.0 / 72.0;
  double jitter = 0.0;
  std::string out;
  std::uint64_t seed = 1;
};

int cmd_gen_demos(const GenArgs& a) {
  if (a.n == 0) throw UsageError("--n must be at least 1");
  const auto cond = sim::resolve_condition(a.condition);
  sim::GenerationConfig cfg;
  cfg.rate_hz = a.rate_hz;
  cfg.full_fraction = a.full_fraction;
  cfg.expert_jitter = a.jitter;
  nn::Rng rng(a.seed);
  print("seed=" + std::to_string(a.seed) + " condition=" + cond.name + " n=" +
        std::to_string(a.n));
  const auto demos = sim::generate_demonstrations(a.n, cond, rng, cfg);
  data::save_demonstrations(demos, a.out);

  util::KeyValues kv;
  kv.set("condition", cond.name);
  kv.set("seed", std::to_string(a.seed));
  kv.set("rate_hz", a.rate_hz);
  kv.set("full_fraction", a.full_fraction);
  kv.set("expert_jitter", a.jitter);
  kv.set("demos", std::to_string(demos.size()));
  std::size_t ideal = 0;
  std::string ids, fills;
  for (const auto& d : demos) {
    if (d.final_fill() >= data::DatasetSpec{}.ideal_fill_threshold) ++ideal;
    ids += (ids.empty() ? "" : ",") + d.id;
    fills += (fills.empty() ? "" : ",") + fmt(d.final_fill());
  }
  kv.set("ideal_demos", std::to_string(ideal));
  kv.set("demo_ids", ids);
  kv.set("final_fill", fills);
  util::write_file(fs::path(a.out) / "corpus.txt", kv.str());
  util::write_file(fs::path(a.out) / "condition.txt", sim::condition_to_text(cond));
  print("wrote " + std::to_string(demos.size()) + " demos (" + std::to_string(ideal) +
        " ideal) to " + a.out);
  return kOk;
}

// build-dataset

struct BuildArgs {
  std::string demos;
  std::string variant = "d1";
  std::string out;
  double threshold = 0.99;
  double target_hz = 20.0;
};

int cmd_build_dataset(const BuildArgs& a) {
  const auto variant = data::parse_variant(a.variant);
  if (!variant) throw UsageError("unknown variant '" + a.variant + "' (d1|d2)");
  const auto demos = data::load_demonstrations(a.demos);
  if (demos.empty()) throw DataError("no demonstrations in " + a.demos);
  const data::DatasetSpec spec{*variant, a.threshold, a.target_hz};
  const auto ds = data::build_dataset(demos, spec);
  data::save_dataset(ds, a.out);
  print("variant=" + std::string(data::to_string(ds.variant)) + " demos=" +
        std::to_string(ds.demo_ids.size()) + "/" + std::to_string(demos.size()) +
        " samples=" + std::to_string(ds.size()) + " rate_hz=" + fmt(ds.rate_hz));
  print("single_action_fraction=" + fmt(data::single_action_fraction(ds)));
  return kOk;
}

// train

struct TrainArgs {
  std::string dataset;
  std::string val;
  std::string controller = "nnetv2";
  bool use_pt = false;
  bool extended = false;
  train::TrainConfig cfg;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  const auto spec = spec_or_throw(a.controller, a.use_pt, a.extended);
  print("epochs=" + std::to_string(a.cfg.epochs) + " batch=" + std::to_string(a.cfg.batch_size) +
        " lr=" + fmt(a.cfg.lr) + " dropout=" + fmt(a.cfg.dropout_p) +
        " seed=" + std::to_string(a.cfg.seed));
  const auto ds = data::load_dataset(a.dataset);
  std::optional<data::Dataset> val;
  if (!a.val.empty()) val = data::load_dataset(a.val);
  const auto result = train::train(spec, ds, a.cfg, val ? &*val : nullptr);
  fs::create_directories(a.out);
  const std::string bytes = ctl::serialize_checkpoint(result.params);
  util::write_file(fs::path(a.out) / "model.ckpt", bytes);
  util::write_file(fs::path(a.out) / "loss_curve.csv", curve_csv(result.curve));
  print("controller=" + std::string(ctl::to_string(spec.kind)) + " params=" +
        std::to_string(result.params.parameter_count()) + " samples=" + std::to_string(ds.size()));
  print("final_train_loss=" + fmt(result.curve.train.back()) +
        (val ? " final_val_mse=" + fmt(result.curve.val.back()) : ""));
  print("checkpoint=" + (fs::path(a.out) / "model.ckpt").string() +
        " sha1=" + util::git_blob_sha1(bytes));
  return kOk;
}

// eval

struct EvalArgs {
  std::string checkpoint;
  bool expert = false;
  std::string condition = "summer";
  std::size_t n = 30;
  std::uint64_t seed = 1;
  std::string out;
  unsigned threads = 1;
};

int cmd_eval(const EvalArgs& a) {
  if (a.expert == !a.checkpoint.empty()) {
    throw UsageError("give exactly one of --checkpoint and --expert");
  }
  if (a.n == 0) throw UsageError("--n must be at least 1");
  const auto cond = sim::resolve_condition(a.condition);
  std::unique_ptr<sim::Policy> policy;
  if (a.expert) {
    policy = std::make_unique<sim::ExpertPolicy>();
  } else {
    policy = std::make_unique<sim::NeuralPolicy>(
        std::make_shared<const ctl::ControllerParams>(ctl::load_checkpoint(a.checkpoint)));
  }
  nn::Rng rng(a.seed);
  const auto summary = sim::evaluate_success(*policy, cond, a.n, rng, {}, a.threads);
  print("seed=" + std::to_string(a.seed) + " condition=" + cond.name + " rollouts=" +
        std::to_string(a.n));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", summary.percent);
  print("success=" + std::to_string(summary.successes) + "/" + std::to_string(a.n) + " rate=" +
        buf + "%");
  if (!a.out.empty()) {
    std::string log = "rollout,success,steps,termination,final_fill\n";
    for (std::size_t i = 0; i < summary.results.size(); ++i) {
      const auto& r = summary.results[i];
      log += std::to_string(i) + "," + (r.success ? "1" : "0") + "," + std::to_string(r.steps) +
             "," + std::string(sim::to_string(r.termination)) + "," + fmt(r.final_state.fill) +
             "\n";
    }
    util::write_file(a.out, log);
  }
  return kOk;
}

// multi-trial

struct MultiArgs {
  std::string train_dir;
  std::string val_dir;
  std::string controller = "nnetv2";
  bool use_pt = false;
  bool extended = false;
  std::size_t trials = 20;
  train::TrainConfig cfg;
  unsigned threads = 1;
  std::string out;
};

int cmd_multi_trial(const MultiArgs& a) {
  if (a.trials < 2) throw UsageError("--trials must be at least 2");
  const auto spec = spec_or_throw(a.controller, a.use_pt, a.extended);
  print("epochs=" + std::to_string(a.cfg.epochs) + " batch=" + std::to_string(a.cfg.batch_size) +
        " lr=" + fmt(a.cfg.lr) + " trials=" + std::to_string(a.trials) +
        " seed=" + std::to_string(a.cfg.seed));
  const auto tr = data::load_dataset(a.train_dir);
  const auto va = data::load_dataset(a.val_dir);
  const auto r = train::multi_trial(spec, tr, va, a.cfg, a.trials, a.threads);
  util::write_file(a.out, train::multi_trial_csv(r));
  print("final_val_mse mean=" + fmt(r.final_mean()) + " std=" + fmt(r.final_std()));
  return kOk;
}

// experiment

int cmd_experiment(const std::string& grid_file, const std::string& out) {
  const auto grid = train::ExperimentGrid::load(grid_file);
  print("seed=" + std::to_string(grid.seed));
  const auto r = train::run_experiment_grid(grid, fs::path(out));
  print("cells=" + std::to_string(r.cells.size()) + " skipped=" + std::to_string(r.skipped.size()) +
        " out=" + out);
  return kOk;
}

// inspect

int cmd_inspect(const std::string& checkpoint, const std::string& demo, const std::string& out) {
  const auto params = ctl::load_checkpoint(checkpoint);
  const auto d = data::read_demonstration(demo);
  util::write_file(out, train::trace_comparison(params, d));
  print("rows=" + std::to_string(d.records.size()) + " out=" + out);
  return kOk;
}

// gradcheck

int cmd_gradcheck(const std::string& controller, std::uint64_t seed, std::size_t rows) {
  std::vector<ctl::ControllerKind> kinds;
  if (controller == "all") {
    kinds = {ctl::ControllerKind::nnet, ctl::ControllerKind::nnetv2, ctl::ControllerKind::annet,
             ctl::ControllerKind::dannet};
  } else {
    kinds = {kind_or_throw(controller)};
  }
  print("seed=" + std::to_string(seed) + " h=1e-06 bound=1e-05");
  bool ok = true;
  for (auto kind : kinds) {
    const auto spec = ctl::ControllerSpec::make(kind, true, false);
    nn::Rng rng(seed);
    nn::Rng init = rng.fork(1);
    nn::Rng data_rng = rng.fork(2);
    auto params = ctl::build_controller(spec, init);
    const auto batch = ctl::random_batch(spec, rows, data_rng);
    const auto r = ctl::check_gradients(params, batch, 1e-6);
    const bool pass = r.checked == params.parameter_count() && r.max_rel_error < 1e-5;
    ok = ok && pass;
    print(std::string(ctl::to_string(kind)) + " params=" + std::to_string(r.checked) +
          " max_rel_error=" + fmt(r.max_rel_error) + " worst=" + r.worst +
          (pass ? " PASS" : " FAIL"));
  }
  return ok ? kOk : kCheckFailed;
}

void add_train_flags(CLI::App* cmd, train::TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", cfg.batch_size, "minibatch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", cfg.lr, "RAdam learning rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--dropout", cfg.dropout_p, "dropout probability")->check(CLI::Range(0.0, 0.99));
  cmd->add_option("--seed", cfg.seed, "training seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pilectl: demonstrations, datasets, training and evaluation of loader controllers"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-demos", "generate scripted-expert demonstrations");
  c_gen->add_option("--n", gen.n, "number of demonstrations");
  c_gen->add_option("--condition", gen.condition, "condition name or profile file");
  c_gen->add_option("--rate-hz", gen.rate_hz, "logging rate")->check(CLI::PositiveNumber);
  c_gen->add_option("--full-fraction", gen.full_fraction, "fraction of full-bucket demos")
      ->check(CLI::Range(0.0, 1.0));
  c_gen->add_option("--expert-jitter", gen.jitter, "relative jitter of expert gains")
      ->check(CLI::Range(0.0, 0.5));
  c_gen->add_option("--out", gen.out, "output directory")->required();
  c_gen->add_option("--seed", gen.seed, "corpus seed");

  BuildArgs build;
  auto* c_build = app.add_subcommand("build-dataset", "flatten a corpus into a dataset");
  c_build->add_option("--demos", build.demos, "demonstration directory")->required();
  c_build->add_option("--variant", build.variant, "d1 (all, native rate) or d2 (ideal, 20 Hz)");
  c_build->add_option("--out", build.out, "dataset directory")->required();
  c_build->add_option("--ideal-threshold", build.threshold, "final fill of an ideal demo");
  c_build->add_option("--target-hz", build.target_hz, "d2 rate")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a controller");
  c_train->add_option("--dataset", tr.dataset, "dataset directory")->required();
  c_train->add_option("--val", tr.val, "validation dataset directory");
  c_train->add_option("--controller", tr.controller, "nnet|nnetv2|annet|dannet");
  c_train->add_flag("--use-pt", tr.use_pt, "add the telescope pressure p_t to s");
  c_train->add_flag("--attention-extended", tr.extended, "feed p_l, p_b, a as s'");
  add_train_flags(c_train, tr.cfg);
  c_train->add_option("--out", tr.out, "output directory")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "closed-loop success rate");
  c_eval->add_option("--checkpoint", ev.checkpoint, "controller checkpoint");
  c_eval->add_flag("--expert", ev.expert, "evaluate the scripted expert instead");
  c_eval->add_option("--condition", ev.condition, "condition name or profile file");
  c_eval->add_option("--n", ev.n, "rollouts");
  c_eval->add_option("--seed", ev.seed, "rollout seed");
  c_eval->add_option("--out", ev.out, "per-rollout CSV log");
  c_eval->add_option("--threads", ev.threads, "worker threads")->check(CLI::PositiveNumber);

  MultiArgs mt;
  auto* c_multi = app.add_subcommand("multi-trial", "validation curves over repeated trainings");
  c_multi->add_option("--train", mt.train_dir, "training dataset directory")->required();
  c_multi->add_option("--val", mt.val_dir, "validation dataset directory")->required();
  c_multi->add_option("--controller", mt.controller, "nnetv2|annet|dannet|nnet");
  c_multi->add_flag("--use-pt", mt.use_pt, "add p_t to s");
  c_multi->add_flag("--attention-extended", mt.extended, "feed p_l, p_b, a as s'");
  c_multi->add_option("--trials", mt.trials, "number of trainings");
  add_train_flags(c_multi, mt.cfg);
  c_multi->add_option("--threads", mt.threads, "worker threads")->check(CLI::PositiveNumber);
  c_multi->add_option("--out", mt.out, "curve CSV")->required();

  std::string grid_file, exp_out;
  auto* c_exp = app.add_subcommand("experiment", "run an experiment grid and write the tables");
  c_exp->add_option("--grid-file", grid_file, "key=value grid")->required();
  c_exp->add_option("--out", exp_out, "output directory")->required();

  std::string ins_ckpt, ins_demo, ins_out;
  auto* c_ins = app.add_subcommand("inspect", "predicted vs demonstrated controls and masks");
  c_ins->add_option("--checkpoint", ins_ckpt, "controller checkpoint")->required();
  c_ins->add_option("--demo", ins_demo, "demonstration CSV")->required();
  c_ins->add_option("--out", ins_out, "trace CSV")->required();

  std::string gc_controller = "all";
  std::uint64_t gc_seed = 1;
  std::size_t gc_rows = 8;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference check of the gradients");
  c_gc->add_option("--controller", gc_controller, "nnet|nnetv2|annet|dannet|all");
  c_gc->add_option("--seed", gc_seed, "instance seed");
  c_gc->add_option("--rows", gc_rows, "batch rows")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_gen) return cmd_gen_demos(gen);
    if (*c_build) return cmd_build_dataset(build);
    if (*c_train) return cmd_train(tr);
    if (*c_eval) return cmd_eval(ev);
    if (*c_multi) return cmd_multi_trial(mt);
    if (*c_exp) return cmd_experiment(grid_file, exp_out);
    if (*c_ins) return cmd_inspect(ins_ckpt, ins_demo, ins_out);
    if (*c_gc) return cmd_gradcheck(gc_controller, gc_seed, gc_rows);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsage;
}

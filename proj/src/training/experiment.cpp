#include "pileload/training/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "pileload/controllers/checkpoint.hpp"
#include "pileload/errors.hpp"
#include "pileload/simulator/rollout.hpp"
#include "pileload/training/multi_trial.hpp"
#include "pileload/util/hash.hpp"
#include "pileload/util/log.hpp"
#include "pileload/util/text.hpp"

namespace pileload::train {

namespace {

constexpr std::string_view kNotAvailable = "n/a";

std::string yes_no(bool v) { return v ? "yes" : "no"; }

std::string table_name(data::Variant v) { return v == data::Variant::d1 ? "D_I" : "D_II"; }

std::string column_name(GridController c) {
  switch (c) {
    case GridController::nnet:
      return "NNet";
    case GridController::nnetv2:
      return "NNetV2";
    case GridController::annet:
      return "ANNet";
    case GridController::dannet:
      return "DANNet";
    case GridController::rf:
      return "RF";
  }
  return "?";
}

std::string percent_text(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", p);
  return buf;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& value, const std::string& key, F&& one) {
  std::vector<T> out;
  for (auto item : util::split(value, ',')) {
    const auto token = std::string(util::trim(item));
    if (token.empty()) continue;
    const auto parsed = one(token);
    if (!parsed) throw DataError("grid: bad value '" + token + "' for " + key);
    out.push_back(*parsed);
  }
  if (out.empty()) throw DataError("grid: empty list for " + key);
  return out;
}

std::optional<bool> parse_bool(std::string_view s) {
  if (s == "yes" || s == "true" || s == "1") return true;
  if (s == "no" || s == "false" || s == "0") return false;
  return std::nullopt;
}

std::size_t parse_count(const util::KeyValues& kv, const std::string& key, bool allow_zero) {
  const auto v = util::parse_int(kv.get(key));
  if (!v || *v < (allow_zero ? 0 : 1)) {
    throw DataError("grid: bad value '" + kv.get(key) + "' for " + key);
  }
  return static_cast<std::size_t>(*v);
}

template <typename T>
std::string join(const std::vector<T>& items, auto&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += fmt(items[i]);
  }
  return out;
}

const CellResult* find_cell(const GridResult& r, data::Variant d, GridController c, bool pt,
                            bool ext) {
  for (const auto& cell : r.cells) {
    if (cell.cell.dataset == d && cell.cell.controller == c && cell.cell.use_pt == pt &&
        cell.cell.extended == ext) {
      return &cell;
    }
  }
  return nullptr;
}

std::string cell_text(const GridResult& r, data::Variant d, GridController c, bool pt, bool ext,
                      const std::string& condition) {
  const CellResult* cell = find_cell(r, d, c, pt, ext);
  if (!cell) return std::string(kNotAvailable);
  for (const auto& cr : cell->conditions) {
    if (cr.condition == condition) return percent_text(cr.percent);
  }
  return std::string(kNotAvailable);
}

ctl::ControllerKind to_kind(GridController c) {
  switch (c) {
    case GridController::nnet:
      return ctl::ControllerKind::nnet;
    case GridController::nnetv2:
      return ctl::ControllerKind::nnetv2;
    case GridController::annet:
      return ctl::ControllerKind::annet;
    case GridController::dannet:
      return ctl::ControllerKind::dannet;
    case GridController::rf:
      break;
  }
  throw std::invalid_argument("no network for rf");
}

}  // namespace

std::string_view to_string(GridController c) {
  switch (c) {
    case GridController::nnet:
      return "nnet";
    case GridController::nnetv2:
      return "nnetv2";
    case GridController::annet:
      return "annet";
    case GridController::dannet:
      return "dannet";
    case GridController::rf:
      return "rf";
  }
  return "?";
}

std::optional<GridController> parse_grid_controller(std::string_view name) {
  if (name == "rf" || name == "RF") return GridController::rf;
  const auto kind = ctl::parse_kind(name);
  if (!kind) return std::nullopt;
  switch (*kind) {
    case ctl::ControllerKind::nnet:
      return GridController::nnet;
    case ctl::ControllerKind::nnetv2:
      return GridController::nnetv2;
    case ctl::ControllerKind::annet:
      return GridController::annet;
    case ctl::ControllerKind::dannet:
      return GridController::dannet;
  }
  return std::nullopt;
}

ExperimentGrid ExperimentGrid::parse(const std::string& text, const std::string& origin) {
  const auto kv = util::KeyValues::parse(text, origin);
  static const std::vector<std::string> known = {
      "datasets", "controllers", "use_pt", "attention_extended", "eval_conditions",
      "table_condition", "rollouts", "train_condition", "demos", "full_fraction", "rate_hz",
      "epochs", "batch_size", "lr", "dropout", "seed", "threads"};
  for (const auto& [key, value] : kv.entries()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw DataError(origin + ": unknown key '" + key + "'");
    }
  }
  ExperimentGrid g;
  if (auto v = kv.find("datasets")) {
    g.datasets = parse_list<data::Variant>(*v, "datasets", data::parse_variant);
  }
  if (auto v = kv.find("controllers")) {
    g.controllers = parse_list<GridController>(*v, "controllers", [](const std::string& s) {
      return parse_grid_controller(s);
    });
  }
  if (auto v = kv.find("use_pt")) g.use_pt = parse_list<bool>(*v, "use_pt", parse_bool);
  if (auto v = kv.find("attention_extended")) {
    g.attention_extended = parse_list<bool>(*v, "attention_extended", parse_bool);
  }
  if (auto v = kv.find("eval_conditions")) {
    g.eval_conditions = parse_list<std::string>(
        *v, "eval_conditions", [](const std::string& s) { return std::optional<std::string>(s); });
  }
  if (auto v = kv.find("table_condition")) g.table_condition = std::string(util::trim(*v));
  if (kv.has("rollouts")) g.rollouts = parse_count(kv, "rollouts", false);
  if (auto v = kv.find("train_condition")) g.train_condition = std::string(util::trim(*v));
  if (kv.has("demos")) g.demos = parse_count(kv, "demos", false);
  if (kv.has("full_fraction")) g.full_fraction = kv.get_double("full_fraction");
  if (kv.has("rate_hz")) g.rate_hz = kv.get_double("rate_hz");
  if (kv.has("epochs")) g.train.epochs = parse_count(kv, "epochs", false);
  if (kv.has("batch_size")) g.train.batch_size = parse_count(kv, "batch_size", false);
  if (kv.has("lr")) g.train.lr = kv.get_double("lr");
  if (kv.has("dropout")) g.train.dropout_p = kv.get_double("dropout");
  if (kv.has("seed")) g.seed = parse_count(kv, "seed", true);
  if (kv.has("threads")) g.threads = static_cast<unsigned>(parse_count(kv, "threads", false));
  if (!(g.full_fraction >= 0.0 && g.full_fraction <= 1.0)) {
    throw DataError(origin + ": full_fraction must be in [0, 1]");
  }
  if (!(g.rate_hz > 0.0)) throw DataError(origin + ": rate_hz must be positive");
  if (!(g.train.lr >= 0.0)) throw DataError(origin + ": lr must be >= 0");
  return g;
}

ExperimentGrid ExperimentGrid::load(const std::filesystem::path& path) {
  return parse(util::read_file(path), path.string());
}

std::string ExperimentGrid::str() const {
  util::KeyValues kv;
  kv.set("datasets", join(datasets, [](data::Variant v) { return std::string(data::to_string(v)); }));
  kv.set("controllers",
         join(controllers, [](GridController c) { return std::string(to_string(c)); }));
  kv.set("use_pt", join(use_pt, [](bool b) { return yes_no(b); }));
  kv.set("attention_extended", join(attention_extended, [](bool b) { return yes_no(b); }));
  kv.set("eval_conditions", join(eval_conditions, [](const std::string& s) { return s; }));
  kv.set("table_condition", table_condition);
  kv.set("rollouts", std::to_string(rollouts));
  kv.set("train_condition", train_condition);
  kv.set("demos", std::to_string(demos));
  kv.set("full_fraction", full_fraction);
  kv.set("rate_hz", rate_hz);
  kv.set("epochs", std::to_string(train.epochs));
  kv.set("batch_size", std::to_string(train.batch_size));
  kv.set("lr", train.lr);
  kv.set("dropout", train.dropout_p);
  kv.set("seed", std::to_string(seed));
  kv.set("threads", std::to_string(threads));
  return kv.str();
}

std::string GridCell::label() const {
  return std::string(data::to_string(dataset)) + "_" + std::string(to_string(controller)) +
         "_pt" + (use_pt ? "1" : "0") + "_ext" + (extended ? "1" : "0");
}

std::pair<std::vector<GridCell>, std::vector<SkippedCell>> expand(const ExperimentGrid& grid) {
  std::vector<GridCell> cells;
  std::vector<SkippedCell> skipped;
  for (auto d : grid.datasets) {
    for (auto c : grid.controllers) {
      for (bool pt : grid.use_pt) {
        for (bool ext : grid.attention_extended) {
          const GridCell cell{d, c, pt, ext};
          if (c == GridController::rf) {
            skipped.push_back({cell, "random forest baseline is not implemented"});
            continue;
          }
          try {
            ctl::ControllerSpec::make(to_kind(c), pt, ext).validate();
          } catch (const std::invalid_argument& e) {
            skipped.push_back({cell, e.what()});
            continue;
          }
          cells.push_back(cell);
        }
      }
    }
  }
  return {cells, skipped};
}

GridResult run_experiment_grid(const ExperimentGrid& grid,
                               const std::optional<std::filesystem::path>& out_dir) {
  auto [cells, skipped] = expand(grid);
  GridResult result;
  result.skipped = skipped;
  for (const auto& s : skipped) util::log_info("skip " + s.cell.label() + ": " + s.reason);

  const nn::Rng master(grid.seed);
  const sim::ConditionProfile train_cond = sim::resolve_condition(grid.train_condition);
  std::vector<sim::ConditionProfile> eval_conds;
  for (const auto& name : grid.eval_conditions) eval_conds.push_back(sim::resolve_condition(name));

  sim::GenerationConfig gen;
  gen.rate_hz = grid.rate_hz;
  gen.full_fraction = grid.full_fraction;
  nn::Rng corpus_rng = master.fork(1);
  const auto demos = sim::generate_demonstrations(grid.demos, train_cond, corpus_rng, gen);
  util::log_info("corpus: " + std::to_string(demos.size()) + " demos in " + train_cond.name);

  std::vector<data::Dataset> datasets;
  for (auto v : grid.datasets) {
    data::DatasetSpec spec = v == data::Variant::d1 ? data::DatasetSpec::d1() : data::DatasetSpec::d2();
    datasets.push_back(data::build_dataset(demos, spec));
    result.datasets.push_back(std::string(data::to_string(v)) + "\n" +
                              data::dataset_manifest(datasets.back()));
  }
  auto dataset_for = [&](data::Variant v) -> const data::Dataset& {
    for (std::size_t i = 0; i < grid.datasets.size(); ++i) {
      if (grid.datasets[i] == v) return datasets[i];
    }
    throw std::logic_error("dataset variant not built");
  };

  if (out_dir) std::filesystem::create_directories(*out_dir / "checkpoints");
  const std::uint64_t cell_root = nn::Rng::derive_seed(grid.seed, 2);
  const nn::Rng eval_root = master.fork(3);

  result.cells.resize(cells.size());
  parallel_for(cells.size(), grid.threads, [&](std::size_t i) {
    const GridCell& cell = cells[i];
    CellResult& out = result.cells[i];
    out.cell = cell;
    out.seed = nn::Rng::derive_seed(cell_root, i);
    const data::Dataset& ds = dataset_for(cell.dataset);
    const auto spec = ctl::ControllerSpec::make(to_kind(cell.controller), cell.use_pt, cell.extended);
    TrainConfig cfg = grid.train;
    cfg.seed = out.seed;
    util::log_info("train " + cell.label() + " on " + std::to_string(ds.size()) + " samples");
    TrainResult trained = train(spec, ds, cfg);
    out.final_train_loss = trained.curve.train.back();

    const std::string bytes = ctl::serialize_checkpoint(trained.params);
    out.checkpoint = cell.label() + ".ckpt";
    out.checkpoint_sha1 = util::git_blob_sha1(bytes);
    if (out_dir) util::write_file(*out_dir / "checkpoints" / out.checkpoint, bytes);

    const auto params = std::make_shared<const ctl::ControllerParams>(std::move(trained.params));
    const sim::NeuralPolicy policy(params);
    for (std::size_t j = 0; j < eval_conds.size(); ++j) {
      nn::Rng rng = eval_root.fork(j);
      const auto summary = sim::evaluate_success(policy, eval_conds[j], grid.rollouts, rng);
      out.conditions.push_back(
          {eval_conds[j].name, summary.successes, grid.rollouts, summary.percent});
      util::log_info("  " + cell.label() + " " + eval_conds[j].name + ": " +
                     percent_text(summary.percent) + "%");
    }
  });

  if (out_dir) {
    util::write_file(*out_dir / "results.csv", results_csv(result));
    util::write_file(*out_dir / "table_2.csv", table_2_csv(result, grid));
    util::write_file(*out_dir / "table_3.csv", table_3_csv(result, grid));
    util::write_file(*out_dir / "table_4.csv", table_4_csv(result, grid));
    util::write_file(*out_dir / "manifest.txt", run_manifest(result, grid));
  }
  return result;
}

std::string results_csv(const GridResult& result) {
  std::string out =
      "dataset,controller,p_t,s_prime,condition,successes,rollouts,success_pct,final_train_loss,"
      "seed,checkpoint\n";
  for (const auto& cell : result.cells) {
    for (const auto& cr : cell.conditions) {
      out += table_name(cell.cell.dataset) + "," + column_name(cell.cell.controller) + "," +
             yes_no(cell.cell.use_pt) + "," + yes_no(cell.cell.extended) + "," + cr.condition +
             "," + std::to_string(cr.successes) + "," + std::to_string(cr.rollouts) + "," +
             percent_text(cr.percent) + "," + util::format_double(cell.final_train_loss) + "," +
             std::to_string(cell.seed) + "," + cell.checkpoint + "\n";
    }
  }
  return out;
}

std::string table_2_csv(const GridResult& result, const ExperimentGrid& grid) {
  std::string out = "train_dataset,test_condition,NNet,RF,NNetV2\n";
  for (const auto& name : grid.eval_conditions) {
    const std::string cond = sim::resolve_condition(name).name;
    out += "D_II," + cond;
    for (auto c : {GridController::nnet, GridController::rf, GridController::nnetv2}) {
      out += "," + cell_text(result, data::Variant::d2, c, false, false, cond);
    }
    out += "\n";
  }
  return out;
}

std::string table_3_csv(const GridResult& result, const ExperimentGrid& grid) {
  const std::string cond = sim::resolve_condition(grid.table_condition).name;
  std::string out = "controller,p_t,D_II,D_I\n";
  for (auto c : {GridController::rf, GridController::nnet, GridController::nnetv2}) {
    for (bool pt : {false, true}) {
      out += column_name(c) + "," + yes_no(pt) + "," +
             cell_text(result, data::Variant::d2, c, pt, false, cond) + "," +
             cell_text(result, data::Variant::d1, c, pt, false, cond) + "\n";
    }
  }
  return out;
}

std::string table_4_csv(const GridResult& result, const ExperimentGrid& grid) {
  const std::string cond = sim::resolve_condition(grid.table_condition).name;
  std::string out = "controller,p_t,s_prime,D_I,D_II\n";
  const std::pair<bool, bool> blocks[] = {{false, false}, {true, false}, {true, true}};
  for (auto [pt, ext] : blocks) {
    for (auto c : {GridController::nnetv2, GridController::annet, GridController::dannet}) {
      out += column_name(c) + "," + yes_no(pt) + "," + yes_no(ext) + "," +
             cell_text(result, data::Variant::d1, c, pt, ext, cond) + "," +
             cell_text(result, data::Variant::d2, c, pt, ext, cond) + "\n";
    }
  }
  return out;
}

std::string run_manifest(const GridResult& result, const ExperimentGrid& grid) {
  std::string out = "[grid]\n" + grid.str() + "\n[cells]\n";
  for (const auto& cell : result.cells) {
    out += cell.cell.label() + " seed=" + std::to_string(cell.seed) + " checkpoint=" +
           cell.checkpoint + " sha1=" + cell.checkpoint_sha1 + "\n";
  }
  out += "\n[skipped]\n";
  for (const auto& s : result.skipped) out += s.cell.label() + ": " + s.reason + "\n";
  for (const auto& ds : result.datasets) {
    const auto nl = ds.find('\n');
    out += "\n[dataset " + ds.substr(0, nl) + "]\n" + ds.substr(nl + 1);
  }
  return out;
}

}  // namespace pileload::train

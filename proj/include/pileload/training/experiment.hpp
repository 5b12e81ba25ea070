#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pileload/dataset/dataset.hpp"
#include "pileload/training/trainer.hpp"

namespace pileload::train {

/// Controller column of a grid. RF appears in the tables but has no
/// implementation here; its cells are skipped and print as n/a.
enum class GridController { nnet, nnetv2, annet, dannet, rf };
std::string_view to_string(GridController c);
std::optional<GridController> parse_grid_controller(std::string_view name);

/// Cross product of the axes; every combination is one cell. Read from a
/// key=value file, lists comma separated, booleans yes/no.
struct ExperimentGrid {
  std::vector<data::Variant> datasets = {data::Variant::d1, data::Variant::d2};
  std::vector<GridController> controllers = {GridController::nnet, GridController::nnetv2,
                                             GridController::annet, GridController::dannet};
  std::vector<bool> use_pt = {false, true};
  std::vector<bool> attention_extended = {false, true};
  /// Names or profile paths; each one is a row of table 2.
  std::vector<std::string> eval_conditions = {"summer", "winter_ice"};
  /// Condition whose success rate fills tables 3 and 4.
  std::string table_condition = "winter_ice";
  std::size_t rollouts = 30;

  std::string train_condition = "summer";
  std::size_t demos = 72;
  double full_fraction = 52.0 / 72.0;
  double rate_hz = 500.0;

  TrainConfig train;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  static ExperimentGrid parse(const std::string& text, const std::string& origin = "grid");
  static ExperimentGrid load(const std::filesystem::path& path);
  std::string str() const;
};

struct GridCell {
  data::Variant dataset = data::Variant::d1;
  GridController controller = GridController::nnetv2;
  bool use_pt = false;
  bool extended = false;

  std::string label() const;  // e.g. d1_annet_pt1_ext0
};

struct ConditionResult {
  std::string condition;
  std::size_t successes = 0;
  std::size_t rollouts = 0;
  double percent = 0.0;
};

struct CellResult {
  GridCell cell;
  std::uint64_t seed = 0;
  double final_train_loss = 0.0;
  std::vector<ConditionResult> conditions;
  std::string checkpoint;  // file name under checkpoints/
  std::string checkpoint_sha1;
};

struct SkippedCell {
  GridCell cell;
  std::string reason;
};

struct GridResult {
  std::vector<CellResult> cells;  // in grid order
  std::vector<SkippedCell> skipped;
  std::vector<std::string> datasets;  // dataset manifests by variant, "variant\n" + manifest
};

/// Cells in axis order (dataset, controller, use_pt, extended), with the
/// ones that violate a controller invariant moved to `skipped`.
std::pair<std::vector<GridCell>, std::vector<SkippedCell>> expand(const ExperimentGrid& grid);

/// Generates the training corpus, builds each dataset variant, trains every
/// valid cell and evaluates it on every condition. With `out_dir` the
/// checkpoints, results and tables are written there.
GridResult run_experiment_grid(const ExperimentGrid& grid,
                               const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// dataset,controller,p_t,s_prime,condition,successes,rollouts,success_pct,final_train_loss,seed,checkpoint
std::string results_csv(const GridResult& result);
/// train_dataset,test_condition,NNet,RF,NNetV2 (D_II, no p_t, no s').
std::string table_2_csv(const GridResult& result, const ExperimentGrid& grid);
/// controller,p_t,D_II,D_I for RF/NNet/NNetV2 with and without p_t.
std::string table_3_csv(const GridResult& result, const ExperimentGrid& grid);
/// controller,p_t,s_prime,D_I,D_II for NNetV2/ANNet/DANNet.
std::string table_4_csv(const GridResult& result, const ExperimentGrid& grid);

/// Config, seeds, dataset manifests and checkpoint hashes.
std::string run_manifest(const GridResult& result, const ExperimentGrid& grid);

}  // namespace pileload::train

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segadv/attacks/universal.hpp"
#include "segadv/defenses/pipeline.hpp"
#include "segadv/harness/config.hpp"
#include "segadv/harness/dataset.hpp"
#include "segadv/metrics/metrics.hpp"
#include "segadv/segnet/model.hpp"

namespace segadv::harness {

enum class AttackKind {
  kNone,
  kFgsm,
  kIterativeFgsm,
  kLlcm,
  kIterativeLlcm,
  kSsmm,
  kDnnm,
  kUap,
  kFff,
  kNoise,  // seeded uniform +-eps, a random baseline
};

AttackKind parse_attack(std::string_view name);
std::string_view to_string(AttackKind kind);
bool is_iterative(AttackKind kind);
bool is_universal(AttackKind kind);

// Step size used when none is configured: 1 for iterative attacks, eps for
// single-step ones, never above eps. Universal attacks report 0.
double resolve_lambda(AttackKind kind, double epsilon, std::optional<double> configured);

struct ExperimentConfig {
  std::filesystem::path checkpoint;
  std::filesystem::path dataset;
  std::filesystem::path output_dir;
  Split split = Split::kVal;
  AttackKind attack = AttackKind::kLlcm;
  std::vector<double> epsilons{2.0, 4.0, 8.0, 16.0};
  std::optional<double> lambda;
  std::optional<std::size_t> iterations;
  int objective_class = kCar;  // DNNM
  std::vector<defenses::Pipeline> defenses;  // each variant evaluated; empty = undefended only
  defenses::NlmConfig nlm;
  std::filesystem::path quilt_db;  // empty: build from the train split
  std::size_t quilt_db_count = defenses::kDefaultPatchCount;
  std::size_t uap_train_images = 32;
  std::size_t uap_passes = 5;
  std::size_t fff_steps = 100;
  double fff_step_size = 2e5;
  std::size_t max_images = 0;  // 0 = whole split
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::optional<int> ignore_class;
  bool record_wallclock = true;
  std::size_t panels = 3;  // first K images get mask panels

  // Sweep strictly increasing and non-negative, workers >= 1, NLM settings valid.
  void validate() const;
};

// Applies a key=value entry; unknown keys raise UsageError.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
ExperimentConfig experiment_from_config(const std::vector<ConfigEntry>& entries);

struct ResultRow {
  std::string split;
  std::string image_id;  // "ALL" for the aggregate row of a block
  std::string attack;
  double epsilon = 0.0;
  double lambda = 0.0;
  std::string defense;  // "none" when undefended; miou_def then equals miou_adv
  double miou_clean = 0.0;
  double miou_adv = 0.0;
  double miou_def = 0.0;
  double q = 0.0;  // miou_adv / miou_clean, NaN when miou_clean = 0
  double wallclock_ms = 0.0;
};

struct Panel {
  std::string name;  // file stem
  Image image;       // clean | adversarial | defended masks in palette colours
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<Panel> panels;
};

struct CleanEvaluation {
  std::vector<LabelMask> predictions;
  std::vector<metrics::ConfusionMatrix> per_image;
  metrics::ConfusionMatrix total{1};
  double miou = 0.0;
};

CleanEvaluation evaluate_clean(const segnet::SegModel& model, const std::vector<segnet::Sample>& samples,
                               std::optional<int> ignore_class, std::size_t workers = 1);

// Clean predictions and confusion matrices keyed by (model, split); each key
// is evaluated once and shared afterwards.
class CleanEvalCache {
 public:
  std::shared_ptr<const CleanEvaluation> get(const std::string& key, const segnet::SegModel& model,
                                             const std::vector<segnet::Sample>& samples,
                                             std::optional<int> ignore_class, std::size_t workers = 1);
  std::size_t evaluations() const { return evaluations_; }

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const CleanEvaluation>> entries_;
  std::size_t evaluations_ = 0;
};

struct ExperimentInputs {
  const segnet::SegModel& model;
  const Dataset& data;
  std::string model_key;  // identifies the model in the clean cache
  const defenses::PatchDatabase* quilt_db = nullptr;  // overrides config.quilt_db
};

ResultTable run_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs,
                           CleanEvalCache* cache = nullptr);
// Loads checkpoint and dataset named by the config first.
ResultTable run_experiment(const ExperimentConfig& config);

inline constexpr std::string_view kResultsHeader =
    "split,image_id,attack,epsilon,lambda,defense,miou_clean,miou_adv,miou_def,Q,wallclock_ms";
inline constexpr std::string_view kSummaryHeader =
    "attack,epsilon,lambda,defense,images,miou_clean,miou_adv,miou_def,Q,wallclock_ms";

std::string format_results_csv(const ResultTable& table);
// Means of the per-image rows of every (attack, epsilon, defense) block;
// aggregate rows are not included in the means.
std::string format_summary_csv(const ResultTable& table);

// results.csv, summary.csv and panels/<name>.png under dir.
void emit_report(const ResultTable& table, const std::filesystem::path& dir);

}  // namespace segadv::harness

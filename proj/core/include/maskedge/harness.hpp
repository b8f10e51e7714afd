#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maskedge/loss.hpp"
#include "maskedge/model.hpp"
#include "maskedge/synthdata.hpp"

namespace maskedge {

/// One training/evaluation experiment: a loss variant trained on one
/// synthetic dataset over several model seeds.
struct ExperimentConfig {
  LossConfig loss;
  DatasetSpec dataset;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int steps = 3000;
  int batch_size = 2;
  double learning_rate = 0.01;
  int eval_every = 100;
  std::string output_dir;         // empty -> in-memory only
  bool edge_head_enabled = true;  // false -> baseline regardless of alpha
  std::string config_id;          // derived from the config when empty

  void validate() const;
  /// config_id if set, otherwise derived: "baseline" when the edge head is
  /// inert, else filter/p/alpha plus variant suffixes, plus "_m<size>" for
  /// non-default mask sizes.
  std::string id() const;
};

std::string derive_config_id(const ExperimentConfig& config);

/// One logged training step (or the step-0 evaluation record, whose loss
/// fields are held-out-set means).
struct TrainRecord {
  int step = 0;
  uint64_t seed = 0;
  std::string config_id;
  double loss_mask = 0.0;
  double loss_edge = 0.0;  // before the alpha scaling; 0 when the head is inert
  double loss_total = 0.0;
  std::optional<double> eval_mean_iou;
  std::optional<double> eval_mean_bce;

  bool operator==(const TrainRecord&) const = default;
};

inline constexpr std::string_view kTrainRecordCsvHeader =
    "step,seed,config_id,loss_mask,loss_edge,loss_total,eval_mean_iou,eval_mean_bce";

/// Trains each seed deterministically and logs one record per step plus a
/// step-0 evaluation record. With a nonempty output_dir, writes
/// <dir>/<id>/seed_<seed>.csv incrementally, a final checkpoint per seed and
/// a merged <dir>/<id>.csv.
std::vector<TrainRecord> run_experiment(const ExperimentConfig& config);

struct EvalMetrics {
  double mean_iou = 0.0;
  double mean_bce = 0.0;
};

/// Intersection-over-union of the thresholded prediction (pred >= threshold
/// counts as foreground) against a binary mask; 1.0 when both are empty.
double mask_iou(const Grid2D& pred, const Grid2D& gt, double threshold = 0.5);

/// Mean IoU of thresholded predictions (>= 0.5 is foreground) and mean
/// pixel-wise cross entropy over a nonempty evaluation set.
EvalMetrics evaluate(const MaskHead& head, const std::vector<Sample>& eval_set);

enum class SweepAxis { kFilter, kP, kAlpha, kMaskSize, kSmoothing, kFormulation };

std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepRun {
  ExperimentConfig config;
  std::vector<TrainRecord> records;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::kFilter;
  std::vector<SweepRun> runs;
};

/// The configurations a sweep runs, always including an alpha = 0 baseline.
std::vector<ExperimentConfig> sweep_configs(SweepAxis axis,
                                            const ExperimentConfig& base);

/// Runs every axis configuration over the shared seeds/dataset. With a
/// nonempty output_dir also writes a "sweep.manifest" so reports can be
/// rebuilt from disk.
SweepReport run_sweep(SweepAxis axis, const ExperimentConfig& base);

/// Rebuilds a SweepReport from a directory written by run_sweep.
SweepReport load_sweep(const std::string& dir);

inline constexpr std::string_view kReportSummaryHeader =
    "config_id,mask_size,alpha,final_mean_iou,final_mean_bce,final_mean_loss_mask,"
    "aulc_loss_mask,pct_steps_below_baseline,rel_improvement_aulc_pct";

inline constexpr std::string_view kReportTrajectoryHeader =
    "step,config_id,mean_loss_mask,std_loss_mask,mean_loss_total,"
    "rel_improvement_pct,rel_improvement_ma20_pct";

struct ReportFiles {
  std::string summary_csv;
  std::string trajectory_csv;
  std::string text;
};

/// Per-step relative improvement of loss_mask against the baseline sharing
/// the config's mask size, plus a final-metric summary table. Throws if the
/// sweep lacks a baseline.
ReportFiles compare_report(const SweepReport& sweep);

/// Writes summary.csv, trajectory.csv and report.txt under `dir`.
void write_report(const ReportFiles& files, const std::string& dir);

std::string to_csv(const std::vector<TrainRecord>& records);
std::vector<TrainRecord> parse_train_csv(const std::string& text);
void write_train_csv(const std::string& path, const std::vector<TrainRecord>& records);
std::vector<TrainRecord> load_train_csv(const std::string& path);

/// Line-oriented "key = value" files; '#' starts a comment. Returns the
/// key -> value map, later entries overriding earlier ones.
std::map<std::string, std::string> parse_key_value_text(const std::string& text);
std::map<std::string, std::string> load_key_value_file(const std::string& path);

}  // namespace maskedge

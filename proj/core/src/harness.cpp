#include "maskedge/harness.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "internal/csv_line.hpp"
#include "internal/format.hpp"
#include "maskedge/rng.hpp"

namespace maskedge {

namespace {

namespace fs = std::filesystem;

constexpr uint64_t kBatchStreamTag = 0x6261746368ULL;  // "batch"

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

struct EvalSummary {
  double mean_iou = 0.0;
  double mean_bce = 0.0;
  double mean_loss_mask = 0.0;
  double mean_loss_edge = 0.0;
  double mean_loss_total = 0.0;
};

EvalSummary evaluate_with_losses(const MaskHead& head,
                                 const std::vector<Sample>& eval_set,
                                 const LossConfig& loss_config) {
  if (eval_set.empty()) {
    throw std::invalid_argument("evaluate: evaluation set must be nonempty");
  }
  EvalSummary summary;
  for (const Sample& sample : eval_set) {
    auto [pred, cache] = forward(head, sample.image, sample.class_id);
    summary.mean_iou += mask_iou(pred, sample.gt_mask);
    const CombinedLossResult loss = combined_mask_loss(pred, sample.gt_mask, loss_config);
    summary.mean_bce += loss.mask_value;
    summary.mean_loss_mask += loss.mask_value;
    summary.mean_loss_edge += loss.edge_value_raw;
    summary.mean_loss_total += loss.value;
  }
  const double inv_n = 1.0 / eval_set.size();
  summary.mean_iou *= inv_n;
  summary.mean_bce *= inv_n;
  summary.mean_loss_mask *= inv_n;
  summary.mean_loss_edge *= inv_n;
  summary.mean_loss_total *= inv_n;
  return summary;
}

}  // namespace

double mask_iou(const Grid2D& pred, const Grid2D& gt, double threshold) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("mask_iou: dimension mismatch");
  int intersection = 0, uni = 0;
  for (int i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] >= threshold;
    const bool t = gt[i] != 0.0;
    intersection += p && t;
    uni += p || t;
  }
  return uni == 0 ? 1.0 : static_cast<double>(intersection) / uni;
}

void ExperimentConfig::validate() const {
  loss.validate();
  dataset.validate();
  if (seeds.empty()) throw std::invalid_argument("ExperimentConfig: at least one seed");
  if (steps < 0) throw std::invalid_argument("ExperimentConfig: steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("ExperimentConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("ExperimentConfig: learning rate must be positive");
  }
  if (eval_every < 1) throw std::invalid_argument("ExperimentConfig: eval_every must be >= 1");
}

std::string derive_config_id(const ExperimentConfig& config) {
  std::string id;
  if (!config.edge_head_enabled || config.loss.alpha == 0.0) {
    id = "baseline";
  } else {
    id = lowercase(to_string(config.loss.filter_set));
    id += "_p" + std::to_string(config.loss.p);
    id += "_a" + internal::format_double(config.loss.alpha);
    if (config.loss.smooth_gt) id += "_sgt";
    if (config.loss.smooth_pred) id += "_spred";
    if (config.loss.include_magnitude) id += "_mag";
    if (config.loss.formulation == Formulation::kProductPW) id += "_pw";
    if (config.loss.formulation == Formulation::kExpProductPW) id += "_exppw";
  }
  if (config.dataset.mask_size != 28) {
    id += "_m" + std::to_string(config.dataset.mask_size);
  }
  return id;
}

std::string ExperimentConfig::id() const {
  return config_id.empty() ? derive_config_id(*this) : config_id;
}

EvalMetrics evaluate(const MaskHead& head, const std::vector<Sample>& eval_set) {
  const EvalSummary s = evaluate_with_losses(head, eval_set, LossConfig{.alpha = 0.0});
  return {s.mean_iou, s.mean_bce};
}

std::vector<TrainRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::string id = config.id();

  LossConfig effective = config.loss;
  if (!config.edge_head_enabled) effective.alpha = 0.0;

  auto [train_set, eval_set] = generate_dataset(config.dataset);
  const int image_size = config.dataset.effective_image_size();

  const bool writing = !config.output_dir.empty();
  fs::path run_dir;
  if (writing) {
    run_dir = fs::path(config.output_dir) / id;
    fs::create_directories(run_dir);
  }

  std::vector<TrainRecord> all_records;
  for (const uint64_t seed : config.seeds) {
    MaskHead head = init_weights(image_size, config.dataset.mask_size,
                                 kNumShapeClasses, seed);
    OptimizerState optimizer = make_optimizer(head, config.learning_rate);
    Rng batch_rng(mix64(seed, kBatchStreamTag));

    std::ofstream csv;
    if (writing) {
      csv.open(run_dir / ("seed_" + std::to_string(seed) + ".csv"));
      if (!csv) throw std::runtime_error("run_experiment: cannot open seed CSV");
      csv << kTrainRecordCsvHeader << '\n';
    }
    const auto emit = [&](const TrainRecord& r) {
      all_records.push_back(r);
      if (writing) {
        csv << internal::train_record_csv_line(r) << '\n';
        if (!csv) throw std::runtime_error("run_experiment: CSV write failure");
      }
    };

    // Step-0 record: held-out metrics and held-out mean losses at init.
    {
      const EvalSummary s = evaluate_with_losses(head, eval_set, effective);
      emit({0, seed, id, s.mean_loss_mask, s.mean_loss_edge, s.mean_loss_total,
            s.mean_iou, s.mean_bce});
    }

    for (int step = 1; step <= config.steps; ++step) {
      ParamGrads batch_grads = make_zero_grads(head);
      double mean_mask = 0.0, mean_edge = 0.0, mean_total = 0.0;
      for (int b = 0; b < config.batch_size; ++b) {
        const Sample& sample = train_set[batch_rng.uniform_int(config.dataset.n_train)];
        auto [pred, cache] = forward(head, sample.image, sample.class_id);
        const CombinedLossResult loss =
            combined_mask_loss(pred, sample.gt_mask, effective);
        const ParamGrads g = backward(head, cache, loss.grad_wrt_pred);
        accumulate_grads(batch_grads, g);
        mean_mask += loss.mask_value;
        mean_edge += loss.edge_value_raw;
        mean_total += loss.value;
      }
      const double inv_batch = 1.0 / config.batch_size;
      scale_grads(batch_grads, inv_batch);
      mean_mask *= inv_batch;
      mean_edge *= inv_batch;
      mean_total *= inv_batch;
      sgd_step(head, batch_grads, optimizer);

      TrainRecord record{step, seed, id, mean_mask, mean_edge, mean_total,
                         std::nullopt, std::nullopt};
      if (step % config.eval_every == 0 || step == config.steps) {
        const EvalMetrics metrics = evaluate(head, eval_set);
        record.eval_mean_iou = metrics.mean_iou;
        record.eval_mean_bce = metrics.mean_bce;
      }
      emit(record);
    }

    if (writing) {
      save_checkpoint((run_dir / ("seed_" + std::to_string(seed) + ".ckpt")).string(),
                      head, seed, config.steps);
    }
  }

  if (writing) {
    write_train_csv((fs::path(config.output_dir) / (id + ".csv")).string(),
                    all_records);
  }
  return all_records;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kFilter: return "filter";
    case SweepAxis::kP: return "p";
    case SweepAxis::kAlpha: return "alpha";
    case SweepAxis::kMaskSize: return "mask_size";
    case SweepAxis::kSmoothing: return "smoothing";
    case SweepAxis::kFormulation: return "formulation";
  }
  throw std::invalid_argument("to_string: unknown sweep axis");
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "filter") return SweepAxis::kFilter;
  if (text == "p") return SweepAxis::kP;
  if (text == "alpha") return SweepAxis::kAlpha;
  if (text == "mask_size") return SweepAxis::kMaskSize;
  if (text == "smoothing") return SweepAxis::kSmoothing;
  if (text == "formulation") return SweepAxis::kFormulation;
  throw std::invalid_argument("unknown sweep axis: " + std::string(text));
}

std::vector<ExperimentConfig> sweep_configs(SweepAxis axis,
                                            const ExperimentConfig& base) {
  base.validate();
  std::vector<ExperimentConfig> configs;
  ExperimentConfig variant = base;
  variant.config_id.clear();
  variant.edge_head_enabled = true;

  const auto push = [&configs](ExperimentConfig c) { configs.push_back(std::move(c)); };
  const auto baseline_of = [](ExperimentConfig c) {
    c.loss.alpha = 0.0;
    return c;
  };

  switch (axis) {
    case SweepAxis::kFilter:
      for (const FilterSetName f : sweep_filter_sets()) {
        ExperimentConfig c = variant;
        c.loss.filter_set = f;
        push(std::move(c));
      }
      push(baseline_of(variant));
      break;
    case SweepAxis::kP:
      for (const int p : {1, 2, 3, 4}) {
        ExperimentConfig c = variant;
        c.loss.p = p;
        push(std::move(c));
      }
      push(baseline_of(variant));
      break;
    case SweepAxis::kAlpha:
      for (const double a : {0.5, 1.0, 8.0, 16.0}) {
        ExperimentConfig c = variant;
        c.loss.p = 2;
        c.loss.alpha = a;
        push(std::move(c));
      }
      {
        ExperimentConfig c = variant;
        c.loss.p = 4;
        c.loss.alpha = 1.0 / 16.0;
        push(std::move(c));
      }
      push(baseline_of(variant));
      break;
    case SweepAxis::kMaskSize:
      for (const int size : {28, 56}) {
        ExperimentConfig c = variant;
        c.dataset.mask_size = size;
        c.dataset.image_size = 0;  // keep the 2x default
        push(baseline_of(c));
        push(std::move(c));
      }
      break;
    case SweepAxis::kSmoothing:
      for (const auto& [gt, pred] : std::vector<std::pair<bool, bool>>{
               {false, false}, {true, false}, {false, true}, {true, true}}) {
        ExperimentConfig c = variant;
        c.loss.smooth_gt = gt;
        c.loss.smooth_pred = pred;
        push(std::move(c));
      }
      push(baseline_of(variant));
      break;
    case SweepAxis::kFormulation:
      for (const Formulation f : {Formulation::kStandard, Formulation::kProductPW,
                                  Formulation::kExpProductPW}) {
        ExperimentConfig c = variant;
        c.loss.formulation = f;
        push(std::move(c));
      }
      push(baseline_of(variant));
      break;
  }
  return configs;
}

SweepReport run_sweep(SweepAxis axis, const ExperimentConfig& base) {
  SweepReport report;
  report.axis = axis;
  for (const ExperimentConfig& config : sweep_configs(axis, base)) {
    report.runs.push_back({config, run_experiment(config)});
  }
  if (!base.output_dir.empty()) {
    std::ofstream manifest(fs::path(base.output_dir) / "sweep.manifest");
    if (!manifest) throw std::runtime_error("run_sweep: cannot write manifest");
    manifest << "maskedge-sweep 1 " << to_string(axis) << '\n';
    for (const SweepRun& run : report.runs) {
      manifest << run.config.id() << ' ' << run.config.dataset.mask_size << ' '
               << internal::format_double(run.config.loss.alpha) << ' '
               << run.config.id() << ".csv\n";
    }
  }
  return report;
}

SweepReport load_sweep(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "sweep.manifest");
  if (!manifest) {
    throw std::runtime_error("load_sweep: missing sweep.manifest in " + dir);
  }
  std::string magic, axis_name;
  int version = 0;
  manifest >> magic >> version >> axis_name;
  if (!manifest || magic != "maskedge-sweep" || version != 1) {
    throw std::runtime_error("load_sweep: bad manifest header");
  }
  SweepReport report;
  report.axis = parse_sweep_axis(axis_name);
  std::string id, csv_rel;
  int mask_size = 0;
  double alpha = 0.0;
  while (manifest >> id >> mask_size >> alpha >> csv_rel) {
    SweepRun run;
    run.config.config_id = id;
    run.config.dataset.mask_size = mask_size;
    run.config.loss.alpha = alpha;
    if (alpha == 0.0) run.config.edge_head_enabled = false;
    run.records = load_train_csv((fs::path(dir) / csv_rel).string());
    report.runs.push_back(std::move(run));
  }
  return report;
}

std::map<std::string, std::string> parse_key_value_text(const std::string& text) {
  std::map<std::string, std::string> entries;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (const size_t hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto trim = [](std::string s) {
      const auto is_space = [](unsigned char c) { return std::isspace(c); };
      while (!s.empty() && is_space(s.front())) s.erase(s.begin());
      while (!s.empty() && is_space(s.back())) s.pop_back();
      return s;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) entries[key] = value;
  }
  return entries;
}

std::map<std::string, std::string> load_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_key_value_text(text);
}

}  // namespace maskedge

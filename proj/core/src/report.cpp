#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "internal/csv_line.hpp"
#include "internal/format.hpp"
#include "maskedge/harness.hpp"

namespace maskedge {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  size_t pos = 0;
  while (true) {
    const size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return fields;
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("CSV: bad ") + what + ": " + s);
  }
  return v;
}

long long parse_int(const std::string& s, const char* what) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("CSV: bad ") + what + ": " + s);
  }
  return v;
}

// Per-config mean/std trajectories over seeds plus final-step metrics.
struct ConfigStats {
  std::string id;
  int mask_size = 28;
  double alpha = 0.0;
  bool is_baseline = false;
  std::vector<int> steps;  // training steps (>= 1), ascending
  std::vector<double> mean_mask;
  std::vector<double> std_mask;
  std::vector<double> mean_total;
  double final_mean_iou = 0.0;
  double final_mean_bce = 0.0;
  double final_mean_loss_mask = 0.0;
  double aulc_loss_mask = 0.0;
};

ConfigStats build_stats(const SweepRun& run) {
  ConfigStats stats;
  stats.id = run.config.id();
  stats.mask_size = run.config.dataset.mask_size;
  stats.alpha = run.config.loss.alpha;
  stats.is_baseline = !run.config.edge_head_enabled || run.config.loss.alpha == 0.0;

  std::map<int, std::vector<const TrainRecord*>> by_step;
  int final_step = 0;
  for (const TrainRecord& r : run.records) {
    by_step[r.step].push_back(&r);
    final_step = std::max(final_step, r.step);
  }

  for (const auto& [step, records] : by_step) {
    if (step >= 1) {
      double mean_mask = 0.0, mean_total = 0.0;
      for (const TrainRecord* r : records) {
        mean_mask += r->loss_mask;
        mean_total += r->loss_total;
      }
      mean_mask /= records.size();
      mean_total /= records.size();
      double var = 0.0;
      for (const TrainRecord* r : records) {
        const double d = r->loss_mask - mean_mask;
        var += d * d;
      }
      const double std_mask =
          records.size() > 1 ? std::sqrt(var / (records.size() - 1)) : 0.0;
      stats.steps.push_back(step);
      stats.mean_mask.push_back(mean_mask);
      stats.std_mask.push_back(std_mask);
      stats.mean_total.push_back(mean_total);
    }
    if (step == final_step) {
      int n_iou = 0, n_bce = 0;
      for (const TrainRecord* r : records) {
        stats.final_mean_loss_mask += r->loss_mask;
        if (r->eval_mean_iou) {
          stats.final_mean_iou += *r->eval_mean_iou;
          ++n_iou;
        }
        if (r->eval_mean_bce) {
          stats.final_mean_bce += *r->eval_mean_bce;
          ++n_bce;
        }
      }
      stats.final_mean_loss_mask /= records.size();
      if (n_iou > 0) stats.final_mean_iou /= n_iou;
      if (n_bce > 0) stats.final_mean_bce /= n_bce;
    }
  }
  if (!stats.mean_mask.empty()) {
    double acc = 0.0;
    for (const double v : stats.mean_mask) acc += v;
    stats.aulc_loss_mask = acc / stats.mean_mask.size();
  }
  return stats;
}

double relative_improvement_pct(double baseline, double value) {
  return baseline == 0.0 ? 0.0 : (baseline - value) / baseline * 100.0;
}

}  // namespace

std::string to_csv(const std::vector<TrainRecord>& records) {
  std::string out(kTrainRecordCsvHeader);
  out += '\n';
  for (const TrainRecord& r : records) {
    out += internal::train_record_csv_line(r);
    out += '\n';
  }
  return out;
}

std::vector<TrainRecord> parse_train_csv(const std::string& text) {
  std::vector<TrainRecord> records;
  size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    if (first) {
      if (line != kTrainRecordCsvHeader) {
        throw std::invalid_argument("CSV: unexpected header: " + line);
      }
      first = false;
      continue;
    }
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 8) throw std::invalid_argument("CSV: bad field count: " + line);
    TrainRecord r;
    r.step = static_cast<int>(parse_int(f[0], "step"));
    r.seed = static_cast<uint64_t>(parse_int(f[1], "seed"));
    r.config_id = f[2];
    r.loss_mask = parse_double(f[3], "loss_mask");
    r.loss_edge = parse_double(f[4], "loss_edge");
    r.loss_total = parse_double(f[5], "loss_total");
    if (!f[6].empty()) r.eval_mean_iou = parse_double(f[6], "eval_mean_iou");
    if (!f[7].empty()) r.eval_mean_bce = parse_double(f[7], "eval_mean_bce");
    records.push_back(std::move(r));
  }
  if (first) throw std::invalid_argument("CSV: missing header");
  return records;
}

void write_train_csv(const std::string& path, const std::vector<TrainRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_train_csv: cannot open " + path);
  out << to_csv(records);
  if (!out) throw std::runtime_error("write_train_csv: write failure on " + path);
}

std::vector<TrainRecord> load_train_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_train_csv: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_train_csv(text);
}

ReportFiles compare_report(const SweepReport& sweep) {
  std::vector<ConfigStats> stats;
  stats.reserve(sweep.runs.size());
  for (const SweepRun& run : sweep.runs) stats.push_back(build_stats(run));

  std::map<int, const ConfigStats*> baselines;  // mask_size -> baseline stats
  for (const ConfigStats& s : stats) {
    if (s.is_baseline) baselines[s.mask_size] = &s;
  }
  if (baselines.empty()) {
    throw std::invalid_argument("compare_report: sweep contains no baseline config");
  }

  ReportFiles files;
  files.summary_csv = std::string(kReportSummaryHeader) + '\n';
  files.trajectory_csv = std::string(kReportTrajectoryHeader) + '\n';

  std::string text = "sweep axis: " + to_string(sweep.axis) + "\n";
  text +=
      "config_id                       final_iou  final_bce  aulc_mask  "
      "below_baseline%  improvement%\n";

  for (const ConfigStats& s : stats) {
    const auto it = baselines.find(s.mask_size);
    if (it == baselines.end()) {
      throw std::invalid_argument(
          "compare_report: no baseline for mask size " + std::to_string(s.mask_size));
    }
    const ConfigStats& base = *it->second;
    if (base.steps != s.steps) {
      throw std::invalid_argument("compare_report: step grids differ from baseline");
    }

    int below = 0;
    std::vector<double> rel(s.steps.size());
    for (size_t k = 0; k < s.steps.size(); ++k) {
      rel[k] = relative_improvement_pct(base.mean_mask[k], s.mean_mask[k]);
      below += s.mean_mask[k] < base.mean_mask[k];
    }
    const double pct_below =
        s.steps.empty() ? 0.0 : 100.0 * below / static_cast<double>(s.steps.size());
    const double improvement =
        relative_improvement_pct(base.aulc_loss_mask, s.aulc_loss_mask);

    // Trailing window-20 moving average of the relative improvement.
    double window_sum = 0.0;
    for (size_t k = 0; k < s.steps.size(); ++k) {
      window_sum += rel[k];
      if (k >= 20) window_sum -= rel[k - 20];
      const double ma = window_sum / std::min<size_t>(k + 1, 20);
      files.trajectory_csv += std::to_string(s.steps[k]);
      files.trajectory_csv += ',';
      files.trajectory_csv += s.id;
      files.trajectory_csv += ',';
      files.trajectory_csv += internal::format_double(s.mean_mask[k]);
      files.trajectory_csv += ',';
      files.trajectory_csv += internal::format_double(s.std_mask[k]);
      files.trajectory_csv += ',';
      files.trajectory_csv += internal::format_double(s.mean_total[k]);
      files.trajectory_csv += ',';
      files.trajectory_csv += internal::format_double(rel[k]);
      files.trajectory_csv += ',';
      files.trajectory_csv += internal::format_double(ma);
      files.trajectory_csv += '\n';
    }

    files.summary_csv += s.id;
    files.summary_csv += ',';
    files.summary_csv += std::to_string(s.mask_size);
    files.summary_csv += ',';
    files.summary_csv += internal::format_double(s.alpha);
    files.summary_csv += ',';
    files.summary_csv += internal::format_double(s.final_mean_iou);
    files.summary_csv += ',';
    files.summary_csv += internal::format_double(s.final_mean_bce);
    files.summary_csv += ',';
    files.summary_csv += internal::format_double(s.final_mean_loss_mask);
    files.summary_csv += ',';
    files.summary_csv += internal::format_double(s.aulc_loss_mask);
    files.summary_csv += ',';
    files.summary_csv += internal::format_double(pct_below);
    files.summary_csv += ',';
    files.summary_csv += internal::format_double(improvement);
    files.summary_csv += '\n';

    char row[256];
    std::snprintf(row, sizeof(row), "%-31s %9.4f %10.6f %10.6f %16.1f %13.2f\n",
                  s.id.c_str(), s.final_mean_iou, s.final_mean_bce,
                  s.aulc_loss_mask, pct_below, improvement);
    text += row;
  }
  files.text = std::move(text);
  return files;
}

void write_report(const ReportFiles& files, const std::string& dir) {
  fs::create_directories(dir);
  const auto dump = [&dir](const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("write_report: cannot open " + name);
    out << content;
    if (!out) throw std::runtime_error("write_report: write failure on " + name);
  };
  dump("summary.csv", files.summary_csv);
  dump("trajectory.csv", files.trajectory_csv);
  dump("report.txt", files.text);
}

}  // namespace maskedge

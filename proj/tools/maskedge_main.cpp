// maskedge CLI: train and sweep edge-agreement mask experiments, generate
// synthetic datasets, rebuild reports and run the gradient-check battery.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maskedge/gradcheck.hpp"
#include "maskedge/harness.hpp"

namespace {

struct CliOptions {
  std::string filter = "Sobel";
  int p = 2;
  double alpha = 1.0;
  int mask_size = 28;
  int image_size = 0;
  bool smooth_gt = false;
  bool smooth_pred = false;
  std::string formulation = "Standard";
  bool magnitude = false;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int steps = 3000;
  double lr = 0.01;
  int batch_size = 2;
  int eval_every = 100;
  int n_train = 512;
  int n_eval = 128;
  double noise_std = 0.05;
  uint64_t data_seed = 0;
  bool disable_edge = false;
  std::string out;
};

// One "key = value" file binding per flag; the file fills options that were
// not passed on the command line.
struct FileBinding {
  std::string key;
  CLI::Option* option;
  std::function<void(const std::string&)> apply;
};

struct ExperimentCli {
  std::string config_path;
  std::vector<FileBinding> bindings;
};

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw CLI::ValidationError("expected a boolean, got '" + text + "'");
}

std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> seeds;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    const std::string item = text.substr(pos, next - pos);
    if (!item.empty()) seeds.push_back(std::stoull(item));
    pos = next + 1;
  }
  if (seeds.empty()) throw CLI::ValidationError("expected a seed list");
  return seeds;
}

ExperimentCli add_experiment_options(CLI::App& cmd, CliOptions& opts) {
  ExperimentCli cli;
  const auto bind = [&cli](const char* key, CLI::Option* option, auto setter) {
    cli.bindings.push_back({key, option, std::move(setter)});
  };
  const auto str_setter = [](std::string& field) {
    return [&field](const std::string& v) { field = v; };
  };
  const auto int_setter = [](int& field) {
    return [&field](const std::string& v) { field = std::stoi(v); };
  };
  const auto double_setter = [](double& field) {
    return [&field](const std::string& v) { field = std::stod(v); };
  };
  const auto bool_setter = [](bool& field) {
    return [&field](const std::string& v) { field = parse_bool(v); };
  };

  bind("filter",
       cmd.add_option("--filter", opts.filter,
                      "Edge filter set: Sobel|Prewitt|Kayyali|Roberts|Laplace|"
                      "SobelAndLaplace"),
       str_setter(opts.filter));
  bind("p", cmd.add_option("--p", opts.p, "Exponent of the L^p edge loss"),
       int_setter(opts.p));
  bind("alpha",
       cmd.add_option("--alpha", opts.alpha,
                      "Edge loss weighting factor (0 = baseline)"),
       double_setter(opts.alpha));
  bind("mask-size",
       cmd.add_option("--mask-size", opts.mask_size, "Mask resolution (28 or 56)"),
       int_setter(opts.mask_size));
  bind("image-size",
       cmd.add_option("--image-size", opts.image_size,
                      "Input image resolution (0 = twice the mask size)"),
       int_setter(opts.image_size));
  bind("smooth-gt",
       cmd.add_flag("--smooth-gt", opts.smooth_gt, "Gaussian-smooth the ground truth"),
       bool_setter(opts.smooth_gt));
  bind("smooth-pred",
       cmd.add_flag("--smooth-pred", opts.smooth_pred,
                    "Gaussian-smooth the prediction"),
       bool_setter(opts.smooth_pred));
  bind("formulation",
       cmd.add_option("--formulation", opts.formulation,
                      "Standard|ProductPW|ExpProductPW"),
       str_setter(opts.formulation));
  bind("magnitude",
       cmd.add_flag("--magnitude", opts.magnitude,
                    "Append the gradient-magnitude response channel"),
       bool_setter(opts.magnitude));
  bind("seeds", cmd.add_option("--seeds", opts.seeds, "Model seeds")->delimiter(','),
       [&opts](const std::string& v) { opts.seeds = parse_seed_list(v); });
  bind("steps", cmd.add_option("--steps", opts.steps, "Training steps per seed"),
       int_setter(opts.steps));
  bind("lr", cmd.add_option("--lr", opts.lr, "Learning rate"),
       double_setter(opts.lr));
  bind("batch-size", cmd.add_option("--batch-size", opts.batch_size, "Minibatch size"),
       int_setter(opts.batch_size));
  bind("eval-every",
       cmd.add_option("--eval-every", opts.eval_every, "Evaluation cadence in steps"),
       int_setter(opts.eval_every));
  bind("n-train", cmd.add_option("--n-train", opts.n_train, "Training set size"),
       int_setter(opts.n_train));
  bind("n-eval", cmd.add_option("--n-eval", opts.n_eval, "Held-out set size"),
       int_setter(opts.n_eval));
  bind("noise-std",
       cmd.add_option("--noise-std", opts.noise_std, "Gaussian image noise stddev"),
       double_setter(opts.noise_std));
  bind("data-seed", cmd.add_option("--data-seed", opts.data_seed, "Dataset seed"),
       [&opts](const std::string& v) { opts.data_seed = std::stoull(v); });
  bind("disable-edge",
       cmd.add_flag("--disable-edge", opts.disable_edge,
                    "Disable the edge head code path entirely"),
       bool_setter(opts.disable_edge));
  bind("out", cmd.add_option("--out", opts.out, "Output directory"),
       str_setter(opts.out));
  cmd.add_option("--config", cli.config_path,
                 "Read options from a 'key = value' file; command-line flags "
                 "take precedence");
  return cli;
}

// Applies file entries to every option the command line left untouched.
void apply_config_file(const ExperimentCli& cli) {
  if (cli.config_path.empty()) return;
  const auto entries = maskedge::load_key_value_file(cli.config_path);
  for (const auto& [key, value] : entries) {
    const auto it =
        std::find_if(cli.bindings.begin(), cli.bindings.end(),
                     [&key](const FileBinding& b) { return b.key == key; });
    if (it == cli.bindings.end()) {
      throw std::runtime_error("unknown config file key: " + key);
    }
    if (it->option->count() == 0) it->apply(value);
  }
}

maskedge::ExperimentConfig to_experiment_config(const CliOptions& opts) {
  maskedge::ExperimentConfig config;
  config.loss.filter_set = maskedge::parse_filter_set_name(opts.filter);
  config.loss.p = opts.p;
  config.loss.alpha = opts.alpha;
  config.loss.smooth_gt = opts.smooth_gt;
  config.loss.smooth_pred = opts.smooth_pred;
  config.loss.formulation = maskedge::parse_formulation(opts.formulation);
  config.loss.include_magnitude = opts.magnitude;
  config.dataset.n_train = opts.n_train;
  config.dataset.n_eval = opts.n_eval;
  config.dataset.mask_size = opts.mask_size;
  config.dataset.image_size = opts.image_size;
  config.dataset.seed = opts.data_seed;
  config.dataset.noise_std = opts.noise_std;
  config.seeds = opts.seeds;
  config.steps = opts.steps;
  config.batch_size = opts.batch_size;
  config.learning_rate = opts.lr;
  config.eval_every = opts.eval_every;
  config.output_dir = opts.out;
  config.edge_head_enabled = !opts.disable_edge;
  return config;
}

void print_final_metrics(const std::vector<maskedge::TrainRecord>& records) {
  int final_step = 0;
  for (const auto& r : records) final_step = std::max(final_step, r.step);
  for (const auto& r : records) {
    if (r.step != final_step || !r.eval_mean_bce) continue;
    std::printf("seed %llu: step %d  loss_mask %.6f  eval_iou %.4f  eval_bce %.6f\n",
                static_cast<unsigned long long>(r.seed), r.step, r.loss_mask,
                r.eval_mean_iou.value_or(0.0), *r.eval_mean_bce);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edge-agreement mask training experiments"};
  app.require_subcommand(1);

  CliOptions run_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "Train one configuration");
  const ExperimentCli run_cli = add_experiment_options(*run_cmd, run_opts);

  CliOptions sweep_opts;
  std::string axis = "filter";
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Run an ablation sweep plus its report");
  sweep_cmd->add_option("--axis", axis,
                        "filter|p|alpha|mask_size|smoothing|formulation");
  const ExperimentCli sweep_cli = add_experiment_options(*sweep_cmd, sweep_opts);

  std::string report_in, report_out;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Rebuild the comparison report of a sweep directory");
  report_cmd->add_option("--in", report_in, "Sweep directory (with sweep.manifest)")
      ->required();
  report_cmd->add_option("--out", report_out, "Report directory (default: --in)");

  int gc_instances = 20;
  int gc_model_instances = 5;
  uint64_t gc_seed = 20240817;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient check battery");
  gradcheck_cmd->add_option("--instances", gc_instances, "Random instances per check");
  gradcheck_cmd->add_option("--model-instances", gc_model_instances,
                            "Random instances per model parameter check");
  gradcheck_cmd->add_option("--seed", gc_seed, "RNG seed");

  CliOptions gen_opts;
  std::string gen_out = "dataset.txt";
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate and dump a dataset");
  gen_cmd->add_option("--out", gen_out, "Output file");
  gen_cmd->add_option("--mask-size", gen_opts.mask_size, "Mask resolution (28 or 56)");
  gen_cmd->add_option("--image-size", gen_opts.image_size,
                      "Image resolution (0 = twice the mask size)");
  gen_cmd->add_option("--n-train", gen_opts.n_train, "Training samples");
  gen_cmd->add_option("--n-eval", gen_opts.n_eval, "Held-out samples");
  gen_cmd->add_option("--noise-std", gen_opts.noise_std, "Gaussian image noise stddev");
  gen_cmd->add_option("--seed", gen_opts.data_seed, "Dataset seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      apply_config_file(run_cli);
      const maskedge::ExperimentConfig config = to_experiment_config(run_opts);
      std::printf("running config %s (%zu seeds, %d steps)\n", config.id().c_str(),
                  config.seeds.size(), config.steps);
      const auto records = maskedge::run_experiment(config);
      print_final_metrics(records);
      if (!config.output_dir.empty()) {
        std::printf("records written under %s\n", config.output_dir.c_str());
      }
    } else if (sweep_cmd->parsed()) {
      apply_config_file(sweep_cli);
      const maskedge::SweepAxis sweep_axis = maskedge::parse_sweep_axis(axis);
      const maskedge::ExperimentConfig base = to_experiment_config(sweep_opts);
      const auto configs = maskedge::sweep_configs(sweep_axis, base);
      std::printf("sweep %s: %zu configurations\n", axis.c_str(), configs.size());
      for (const auto& c : configs) std::printf("  %s\n", c.id().c_str());
      const maskedge::SweepReport sweep = maskedge::run_sweep(sweep_axis, base);
      const maskedge::ReportFiles files = maskedge::compare_report(sweep);
      std::fputs(files.text.c_str(), stdout);
      if (!base.output_dir.empty()) {
        maskedge::write_report(files, base.output_dir);
        std::printf("report written under %s\n", base.output_dir.c_str());
      }
    } else if (report_cmd->parsed()) {
      const maskedge::SweepReport sweep = maskedge::load_sweep(report_in);
      const maskedge::ReportFiles files = maskedge::compare_report(sweep);
      std::fputs(files.text.c_str(), stdout);
      maskedge::write_report(files, report_out.empty() ? report_in : report_out);
    } else if (gradcheck_cmd->parsed()) {
      const auto results =
          maskedge::gradcheck::run_battery(gc_seed, gc_instances, gc_model_instances);
      long failed = 0;
      for (const auto& r : results) {
        std::printf("%-42s %s  (%ld elements, max rel err %.2e)\n", r.label.c_str(),
                    r.passed() ? "ok" : "FAIL", r.checked, r.max_rel_err);
        failed += r.failed;
      }
      if (failed > 0) {
        std::fprintf(stderr, "gradcheck: %ld element(s) failed\n", failed);
        return 1;
      }
    } else if (gen_cmd->parsed()) {
      maskedge::DatasetSpec spec;
      spec.n_train = gen_opts.n_train;
      spec.n_eval = gen_opts.n_eval;
      spec.mask_size = gen_opts.mask_size;
      spec.image_size = gen_opts.image_size;
      spec.seed = gen_opts.data_seed;
      spec.noise_std = gen_opts.noise_std;
      auto [train, eval] = maskedge::generate_dataset(spec);
      std::vector<maskedge::Sample> all = std::move(train);
      all.insert(all.end(), std::make_move_iterator(eval.begin()),
                 std::make_move_iterator(eval.end()));
      maskedge::save_dataset(gen_out, all, spec);
      std::printf("wrote %zu samples to %s\n", all.size(), gen_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

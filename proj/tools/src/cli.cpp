#include "semcom_cli/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "semcom/checkpoint.hpp"
#include "semcom/config.hpp"
#include "semcom/error.hpp"
#include "semcom/evaluation.hpp"

#ifndef SEMCOM_VERSION
#define SEMCOM_VERSION "unknown"
#endif

namespace semcom::cli {

namespace fs = std::filesystem;

namespace {

const char* kModule = "cli";

// Records every path a run creates so a failed run can be undone.
class Outputs {
 public:
  void claim(const fs::path& path) {
    if (!fs::exists(path)) created_.push_back(path);
  }
  void rollback() noexcept {
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) {
      std::error_code ec;
      fs::remove_all(*it, ec);
    }
    created_.clear();
  }

 private:
  std::vector<fs::path> created_;
};

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text, Outputs& outputs) {
  outputs.claim(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(kModule, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(kModule, "failed writing " + path.string());
}

struct Context {
  const RunConfig& run;
  Settings settings;
  Outputs& outputs;
  std::ostream& out;

  fs::path dataset() const { return run.dataset.value_or(run.output_dir / "corpus"); }
  fs::path checkpoint() const {
    return run.checkpoint.value_or(run.output_dir / "checkpoint_final.semc");
  }
  LoadOptions load_options() const {
    const auto& enc = settings.model.encoder;
    return {enc.input_height, enc.input_width, enc.input_channels};
  }
  std::vector<AnnotatedFrame> load() const {
    auto frames = load_dataset(dataset(), load_options());
    if (frames.empty()) throw DatasetError(kModule, "no frames in " + dataset().string());
    return frames;
  }
  FrameSet test_frames() const {
    const DatasetSplits splits = split(load(), split_spec(settings));
    if (splits.test.empty()) throw DatasetError(kModule, "test split is empty");
    return to_frame_set(splits.test, settings.data.blob_sigma);
  }
};

void cmd_synth(Context& ctx) {
  const fs::path root = ctx.dataset();
  ctx.outputs.claim(root);
  write_dataset(synth_generate(synthetic_config(ctx.settings)), root);
  ctx.out << "wrote " << ctx.settings.data.synth_frames << " frames to " << root.string() << '\n';
}

void cmd_train(Context& ctx) {
  const DatasetSplits splits = split(ctx.load(), split_spec(ctx.settings));
  if (splits.train.empty()) throw DatasetError(kModule, "training split is empty");
  const FrameSet train = to_frame_set(splits.train, ctx.settings.data.blob_sigma);
  const FrameSet validation = splits.validation.empty()
                                  ? FrameSet{}
                                  : to_frame_set(splits.validation, ctx.settings.data.blob_sigma);

  Trainer trainer(SemComModel::build(resolved_model_config(ctx.settings), ctx.settings.train.seed),
                  ctx.settings.train);
  FitOptions options;
  options.checkpoint_dir = ctx.run.output_dir;
  options.validate = validation.size() > 0;
  ctx.outputs.claim(ctx.run.output_dir / "checkpoint_best.semc");
  ctx.outputs.claim(ctx.run.output_dir / "checkpoint_final.semc");
  const FitResult result = fit(trainer, train, validation, options);

  std::ostringstream csv;
  write_loss_csv(csv, result.history);
  write_text(ctx.run.output_dir / "loss_history.csv", csv.str(), ctx.outputs);
  const LossReport& last = result.history.back();
  ctx.out << "trained " << result.epochs_run << " epochs"
          << (result.stopped_by_threshold ? " (loss threshold reached)" : "")
          << ", last " << split_name(last.split) << " total " << last.total << '\n';
}

void cmd_eval(Context& ctx) {
  const Trainer trainer = checkpoint_load(ctx.checkpoint());
  const FrameSet test = ctx.test_frames();
  const real snr = ctx.run.snr_db.value_or(trainer.model().channel().snr_db);
  const MetricsReport report = evaluate(trainer.model(), test, snr, ctx.settings.train.seed,
                                        ctx.settings.train.batch_size);
  std::ostringstream csv;
  write_metrics_csv(csv, {report}, {"semcom"});
  write_text(ctx.run.output_dir / "metrics.csv", csv.str(), ctx.outputs);
  ctx.out << compare_report({report}, {"semcom"});
}

void cmd_sweep(Context& ctx) {
  const Trainer trainer = checkpoint_load(ctx.checkpoint());
  const FrameSet test = ctx.test_frames();
  const real snr = ctx.run.snr_db.value_or(trainer.model().channel().snr_db);
  const std::vector<real> grid = ctx.run.p_grid.value_or(default_p_grid());
  const SweepResult sweep = p_sweep(trainer.model(), test, grid, snr, ctx.settings.train.seed,
                                    ctx.settings.train.batch_size);
  std::ostringstream csv;
  write_sweep_csv(csv, sweep);
  write_text(ctx.run.output_dir / "p_sweep.csv", csv.str(), ctx.outputs);
  ctx.out << "best p " << sweep.best_p() << " (MAE " << sweep.curve[sweep.argmin].mae << ")\n";
}

// Density maps are the encoder outputs when a checkpoint is available,
// otherwise the ground-truth maps.
void cmd_overhead(Context& ctx) {
  const std::vector<AnnotatedFrame> frames = ctx.load();
  std::vector<DensityMap> maps;
  const bool have_model = ctx.run.checkpoint.has_value() || fs::exists(ctx.checkpoint());
  if (have_model) {
    const Trainer trainer = checkpoint_load(ctx.checkpoint());
    const FrameSet set = to_frame_set(frames, ctx.settings.data.blob_sigma);
    NoGradGuard guard;
    const std::size_t batch = ctx.settings.train.batch_size;
    for (std::size_t begin = 0; begin < set.size(); begin += batch) {
      const std::size_t end = std::min(set.size(), begin + batch);
      const Tensor d = trainer.model().encoder().encode(set.slice(begin, end).images);
      const std::size_t h = d.dim(2), w = d.dim(3);
      for (std::size_t i = 0; i < end - begin; ++i) {
        DensityMap map = DensityMap::zeros(h, w);
        const auto src = d.data().subspan(i * h * w, h * w);
        std::copy(src.begin(), src.end(), map.values.begin());
        maps.push_back(std::move(map));
      }
    }
  } else {
    for (const auto& f : frames) {
      maps.push_back(make_gt_density(f.dots, f.height(), f.width(), ctx.settings.data.blob_sigma));
    }
  }
  const OverheadReport report = overhead(frames, maps);
  std::ostringstream csv;
  write_overhead_csv(csv, report);
  write_text(ctx.run.output_dir / "overhead.csv", csv.str(), ctx.outputs);
  ctx.out << "raw " << report.raw_bytes << " B, encoded " << report.encoded_bytes
          << " B, reduction " << std::fixed << std::setprecision(2) << report.reduction_pct
          << "%\n";
}

}  // namespace

const char* command_name(Command command) {
  switch (command) {
    case Command::synth: return "synth";
    case Command::train: return "train";
    case Command::eval: return "eval";
    case Command::sweep: return "sweep";
    case Command::overhead: return "overhead";
  }
  return "?";
}

std::vector<real> parse_p_grid(const std::string& text) {
  std::vector<real> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const real v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || !std::isfinite(v)) {
      throw ConfigError(kModule, "--p-grid: cannot parse '" + item + "'");
    }
    grid.push_back(v);
  }
  if (grid.empty()) throw ConfigError(kModule, "--p-grid: empty list");
  return grid;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  Outputs outputs;
  try {
    Settings settings = config.config_path ? parse_config(*config.config_path) : Settings{};
    if (config.seed) settings.train.seed = *config.seed;

    for (fs::path p = config.output_dir; !p.empty() && !fs::exists(p); p = p.parent_path()) {
      outputs.claim(p);
      if (p == p.parent_path()) break;
    }
    fs::create_directories(config.output_dir);
    std::ostringstream manifest;
    manifest << "# semcom " << SEMCOM_VERSION << '\n'
             << "# command: " << command_name(config.command) << '\n'
             << "# timestamp: " << timestamp() << '\n'
             << to_config_text(settings);
    write_text(config.output_dir / "manifest.txt", manifest.str(), outputs);

    Context ctx{config, settings, outputs, out};
    switch (config.command) {
      case Command::synth: cmd_synth(ctx); break;
      case Command::train: cmd_train(ctx); break;
      case Command::eval: cmd_eval(ctx); break;
      case Command::sweep: cmd_sweep(ctx); break;
      case Command::overhead: cmd_overhead(ctx); break;
    }
    return 0;
  } catch (const Error& e) {
    err << e.what() << '\n';
  } catch (const std::exception& e) {
    err << kModule << ": " << e.what() << '\n';
  }
  outputs.rollback();
  return 1;
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic-communication vehicle counting simulator"};
  app.require_subcommand(1, 1);
  RunConfig config;
  std::string config_path, dataset, checkpoint, p_grid;
  std::uint64_t seed = 0;
  real snr_db = 0;

  const std::vector<std::pair<Command, const char*>> commands = {
      {Command::synth, "generate a synthetic corpus"},
      {Command::train, "train a model and write checkpoints + loss history"},
      {Command::eval, "evaluate a checkpoint on the test split"},
      {Command::sweep, "sweep the residual weight p on the test split"},
      {Command::overhead, "measure raw vs transmitted byte overhead"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [command, help] : commands) {
    CLI::App* sub = app.add_subcommand(command_name(command), help);
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--out", config.output_dir, "output directory")->required();
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--dataset", dataset, "dataset root (default <out>/corpus)");
    if (command != Command::synth && command != Command::train) {
      sub->add_option("--checkpoint", checkpoint, "checkpoint (default <out>/checkpoint_final.semc)");
      sub->add_option("--snr-db", snr_db, "channel SNR for evaluation");
    }
    if (command == Command::sweep) sub->add_option("--p-grid", p_grid, "comma list of p values");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << kModule << ": " << e.what() << '\n';
    return 2;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    CLI::App* sub = subs[i];
    config.command = commands[i].first;
    if (sub->count("--config")) config.config_path = config_path;
    if (sub->count("--seed")) config.seed = seed;
    if (sub->count("--dataset")) config.dataset = dataset;
    if (sub->get_option_no_throw("--checkpoint") && sub->count("--checkpoint")) {
      config.checkpoint = checkpoint;
    }
    if (sub->get_option_no_throw("--snr-db") && sub->count("--snr-db")) config.snr_db = snr_db;
    if (sub->get_option_no_throw("--p-grid") && sub->count("--p-grid")) {
      try {
        config.p_grid = parse_p_grid(p_grid);
      } catch (const Error& e) {
        err << e.what() << '\n';
        return 2;
      }
    }
  }
  return run(config, out, err);
}

}  // namespace semcom::cli

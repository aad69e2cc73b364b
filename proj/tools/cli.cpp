#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "tsnca/checkpoint.hpp"
#include "tsnca/dataset.hpp"
#include "tsnca/errors.hpp"
#include "tsnca/pipeline.hpp"
#include "tsnca/png_io.hpp"
#include "tsnca/report.hpp"
#include "tsnca/train.hpp"

namespace tsnca::cli {
namespace fs = std::filesystem;
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  TrainConfig config;
  std::string data;
  std::string low_dir;
  std::string high_dir;
  std::string out;
  std::string log;
  std::string init;
  std::string stage1;
  std::string perceptual_weights;
  std::size_t perceptual_tap = 0;
  bool no_hs_input = false;
  bool no_ca = false;
};

struct EnhanceArgs {
  std::string input;
  std::string output;
  std::string stage1;
  std::string stage2;
  bool no_hs_input = false;
  bool dump_intermediates = false;
};

struct EvaluateArgs {
  std::string pred;
  std::string gt;
  std::string out;
};

void add_config_option(CLI::App* sub) {
  sub->add_option("--config", "Flat key=value file; keys are flag names, flags win");
}

// Fills options the command line left unset from the subcommand's --config file.
void apply_config_file(CLI::App* sub) {
  const auto* config = sub->get_option_no_throw("--config");
  if (config == nullptr || config->count() == 0) return;
  const std::string path = config->as<std::string>();
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (!item.parents.empty()) throw UsageError(path + ": sections are not supported");
    if (item.name == "config") throw UsageError(path + ": nested config files are not supported");
    auto* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr) throw UsageError(path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

void add_train_options(CLI::App* sub, TrainArgs& a, int stage) {
  auto& c = a.config;
  c.stage = stage;
  add_config_option(sub);
  sub->add_option("--data", a.data, "Dataset root containing low/ and high/");
  sub->add_option("--low", a.low_dir, "Low-light image directory (with --high)");
  sub->add_option("--high", a.high_dir, "Reference image directory (with --low)");
  sub->add_option("--out", a.out, "Checkpoint to write")->required();
  sub->add_option("--log", a.log, "Loss log CSV");
  sub->add_option("--init", a.init, "Checkpoint to resume from");
  sub->add_option("--batch", c.batch_size, "Batch size")->capture_default_str();
  sub->add_option("--crop", c.crop_size, "Square crop side")->capture_default_str();
  sub->add_option("--steps", c.max_steps, "Total optimizer steps")->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed for initialization and cropping")->capture_default_str();
  sub->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  sub->add_option("--beta1", c.beta1, "Adam beta1")->capture_default_str();
  sub->add_option("--beta2", c.beta2, "Adam beta2")->capture_default_str();
  sub->add_option("--epsilon", c.epsilon, "Adam epsilon")->capture_default_str();
  sub->add_option("--base", c.base_channels, "U-Net base channel count")->capture_default_str();
  sub->add_option("--depth", c.depth, "U-Net depth")->capture_default_str();
  sub->add_flag("--no-hs-input", a.no_hs_input, "Feed V replicated three times to the enhancer");
  if (stage == 1) {
    sub->add_flag("--ssim-loss-stage1", c.use_ssim_loss_stage1, "Subtract SSIM in the stage-one loss");
    sub->add_option("--perceptual-weights", a.perceptual_weights, "Feature extractor weights file");
    sub->add_option("--perceptual-tap", a.perceptual_tap, "Layer index the features are read at");
    sub->add_option("--extractor-seed", c.extractor_seed, "Seed of the built-in feature extractor")
        ->capture_default_str();
  } else {
    sub->add_option("--stage1", a.stage1, "Trained stage-one checkpoint")->required();
    sub->add_flag("--no-ca", a.no_ca, "Disable channel attention on skip connections");
  }
}

std::vector<ImagePair> load_dataset(const TrainArgs& a, std::ostream& err) {
  DatasetIndex index;
  if (!a.data.empty()) {
    index = DatasetIndex::discover(a.data);
  } else if (!a.low_dir.empty() && !a.high_dir.empty()) {
    index = DatasetIndex::discover(a.low_dir, a.high_dir);
  } else {
    throw UsageError("give --data, or both --low and --high");
  }
  for (const auto& p : index.unmatched) err << "warning: unmatched file " << p.string() << '\n';
  return load_pairs(index);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

int train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = args.config;
  cfg.use_hs_input = !args.no_hs_input;
  cfg.with_channel_attention = !args.no_ca;
  if (!args.perceptual_weights.empty()) cfg.perceptual_weights = args.perceptual_weights;
  if (args.perceptual_tap > 0) cfg.perceptual_tap = args.perceptual_tap;
  cfg.validate();

  const auto data = load_dataset(args, err);
  std::optional<Checkpoint> resume;
  if (!args.init.empty()) resume = read_checkpoint(fs::path(args.init));

  std::unique_ptr<std::ofstream> log;
  bool header_written = false;
  if (!args.log.empty()) {
    ensure_parent(args.log);
    log = std::make_unique<std::ofstream>(args.log);
    if (!*log) throw io::ImageIoError("cannot write " + args.log);
  }
  const StepObserver observer = [&](const LossLogRow& row) {
    if (!log) return;
    if (!header_written) {
      std::vector<std::string> names;
      for (const auto& [n, v] : row.terms) names.push_back(n);
      write_loss_log_header(*log, names);
      header_written = true;
    }
    write_loss_log_row(*log, row);
  };

  TrainResult result;
  if (cfg.stage == 1) {
    result = train_stage1(data, cfg, resume ? &*resume : nullptr, observer);
  } else {
    const Checkpoint stage1 = read_checkpoint(fs::path(args.stage1));
    result = train_stage2(data, stage1, cfg, resume ? &*resume : nullptr, observer);
  }
  ensure_parent(args.out);
  write_checkpoint(fs::path(args.out), result.checkpoint);

  out << "stage " << cfg.stage << ": " << result.checkpoint.fingerprint << " step "
      << result.checkpoint.step;
  if (!result.log.empty()) out << " final loss " << format_number(result.log.back().total);
  out << " -> " << args.out << '\n';
  return 0;
}

// Intermediate panels go to an intermediates/ directory beside the output.
fs::path dump_path(const fs::path& output, const std::string& suffix) {
  const auto dir = output.parent_path() / "intermediates";
  fs::create_directories(dir);
  return dir / (output.stem().string() + suffix + ".png");
}

int enhance(const EnhanceArgs& args, std::ostream& out) {
  const Enhancer enhancer(read_checkpoint(fs::path(args.stage1)), read_checkpoint(fs::path(args.stage2)),
                          !args.no_hs_input);
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(args.input)) {
    fs::create_directories(args.output);
    for (const auto& p : list_png_files(args.input)) jobs.emplace_back(p, fs::path(args.output) / p.filename());
  } else {
    ensure_parent(args.output);
    jobs.emplace_back(args.input, args.output);
  }
  for (const auto& [in, dst] : jobs) {
    const auto result = enhancer.run(io::read_png(in));
    io::write_png(dst, result.output);
    if (args.dump_intermediates) {
      io::write_png(dump_path(dst, "_enhanced_v"), result.enhanced_v);
      io::write_png(dump_path(dst, "_stage2_input"), result.stage2_input);
    }
    out << in.string() << " -> " << dst.string() << '\n';
  }
  return 0;
}

int evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  const auto report = evaluate_directories(args.pred, args.gt);
  if (report.rows.empty()) throw DatasetError("evaluate: no PNG files in " + args.gt);
  if (args.out.empty()) {
    write_metric_csv(out, report);
  } else {
    ensure_parent(args.out);
    std::ofstream file(args.out);
    if (!file) throw io::ImageIoError("cannot write " + args.out);
    write_metric_csv(file, report);
  }
  for (const auto& row : report.rows) {
    if (!row.report) err << "warning: " << row.name << ": " << row.error << '\n';
  }
  return 0;
}

int inspect(const std::string& path, std::ostream& out) {
  const auto ckpt = read_checkpoint(fs::path(path));
  std::size_t scalars = 0;
  for (const auto& [name, t] : ckpt.tensors) scalars += t.numel();
  out << "fingerprint: " << ckpt.fingerprint << '\n'
      << "step: " << ckpt.step << '\n'
      << "tensors: " << ckpt.tensors.size() << " (" << scalars << " values)\n"
      << "optimizer: " << (ckpt.optimizer.empty() ? "absent" : "present") << '\n';
  for (const auto& [name, t] : ckpt.tensors) out << "  " << name << ' ' << shape_to_string(t.shape()) << '\n';
  return 0;
}

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

int fail(std::ostream& err, const char* code, const std::string& what) {
  err << "error: " << code << ": " << one_line(what) << '\n';
  return code == std::string("usage") ? 2 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage low-light image enhancement", "tsnca"};
  app.require_subcommand(1);

  TrainArgs stage1_args, stage2_args;
  add_train_options(app.add_subcommand("train-stage1", "Train the brightness enhancer"), stage1_args, 1);
  add_train_options(app.add_subcommand("train-stage2", "Train the restorer on a frozen enhancer"),
                    stage2_args, 2);

  EnhanceArgs enhance_args;
  auto* enh = app.add_subcommand("enhance", "Run both stages on an image or a directory");
  add_config_option(enh);
  enh->add_option("--input", enhance_args.input, "Input PNG or directory")->required();
  enh->add_option("--output", enhance_args.output, "Output PNG or directory")->required();
  enh->add_option("--stage1", enhance_args.stage1, "Stage-one checkpoint")->required();
  enh->add_option("--stage2", enhance_args.stage2, "Stage-two checkpoint")->required();
  enh->add_flag("--no-hs-input", enhance_args.no_hs_input, "Enhancer was trained on V only");
  enh->add_flag("--dump-intermediates", enhance_args.dump_intermediates,
                "Also write the enhanced V plane and the restorer input to intermediates/");

  EvaluateArgs eval_args;
  auto* ev = app.add_subcommand("evaluate", "Score predictions against references");
  ev->add_option("--pred", eval_args.pred, "Prediction directory")->required();
  ev->add_option("--gt", eval_args.gt, "Reference directory")->required();
  ev->add_option("--out", eval_args.out, "CSV report (stdout when omitted)");

  std::string inspect_path;
  auto* insp = app.add_subcommand("inspect-checkpoint", "Print a checkpoint summary");
  insp->add_option("checkpoint", inspect_path, "Checkpoint file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage", e.what());
  }

  try {
    auto* chosen = app.get_subcommands().front();
    apply_config_file(chosen);
    const std::string name = chosen->get_name();
    if (name == "train-stage1") return train(stage1_args, out, err);
    if (name == "train-stage2") return train(stage2_args, out, err);
    if (name == "enhance") return enhance(enhance_args, out);
    if (name == "evaluate") return evaluate(eval_args, out, err);
    return inspect(inspect_path, out);
  } catch (const UsageError& e) {
    return fail(err, "usage", e.what());
  } catch (const CLI::Error& e) {
    return fail(err, "usage", e.what());
  } catch (const FingerprintMismatch& e) {
    return fail(err, "fingerprint", e.what());
  } catch (const CheckpointError& e) {
    return fail(err, "checkpoint", e.what());
  } catch (const io::ImageIoError& e) {
    return fail(err, "image", e.what());
  } catch (const DatasetError& e) {
    return fail(err, "dataset", e.what());
  } catch (const TrainingError& e) {
    return fail(err, "training", e.what());
  } catch (const ShapeError& e) {
    return fail(err, "shape", e.what());
  } catch (const RangeError& e) {
    return fail(err, "range", e.what());
  } catch (const NumericError& e) {
    return fail(err, "numeric", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(err, "config", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(err, "io", e.what());
  } catch (const std::exception& e) {
    return fail(err, "internal", e.what());
  }
}

}  // namespace tsnca::cli

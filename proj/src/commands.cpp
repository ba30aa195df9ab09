#include "zcae/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

#include <CLI11.hpp>

#include "zcae/checkpoint.hpp"
#include "zcae/config.hpp"
#include "zcae/error.hpp"
#include "zcae/gradcheck.hpp"
#include "zcae/init.hpp"
#include "zcae/ppm.hpp"

namespace zcae {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool wall_time = false;
  std::optional<std::size_t> max_epochs;
  std::string resume;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", c.out, "output directory (default: config 'output' or ./run)");
  cmd->add_option("--seed", c.seed, "run seed, overrides seeds.run");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--wall-time", c.wall_time, "record per-epoch wall time in the CSV");
  cmd->add_option("--max-epochs", c.max_epochs, "stop after this many epochs (resumable)");
  cmd->add_option("--resume", c.resume, "continue from a checkpoint written by this command");
}

struct Context {
  ExperimentConfig config;
  fs::path out;
  RunControl control;
};

Context prepare(const Common& c, std::ostream& err) {
  Context ctx;
  ctx.config = load_config(c.config);
  if (c.seed) ctx.config.seed = *c.seed;
  ctx.config.validate_paths();
  ctx.out = !c.out.empty() ? fs::path(c.out) : ctx.config.output.value_or("run");
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (!fs::is_directory(ctx.out)) {
    throw InputError("output-not-writable", "cannot create output directory " + ctx.out.string());
  }
  const fs::path copy = ctx.out / "config.json";
  if (!fs::exists(copy) || !fs::equivalent(copy, c.config)) {
    fs::copy_file(c.config, copy, fs::copy_options::overwrite_existing);
  }
  if (c.threads > 1) err << "note: training runs on one thread; --threads " << c.threads << " ignored\n";
  if (c.max_epochs) ctx.control.epoch_budget = *c.max_epochs;
  ctx.control.record_wall_time = c.wall_time;
  ctx.control.log = [&err](const std::string& line) { err << line << '\n'; };
  return ctx;
}

std::string percent(double fraction) {
  if (std::isnan(fraction)) return "nan";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << 100.0 * fraction;
  return s.str();
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << "overall=" << percent(r.overall) << '\n';
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    out << "class_" << k << '=' << percent(r.per_class[k]) << '\n';
  }
}

int cmd_pretrain(const Common& c, std::ostream& out, std::ostream& err) {
  Context ctx = prepare(c, err);
  const ExperimentConfig& cfg = ctx.config;
  Tensor4<float> data = load_experiment_data(cfg, true, false).unlabeled;
  if (data.shape().n == 0) throw InputError("dataset-empty", "no unlabeled images to pretrain on");
  standardize_all(data);

  Checkpoint ckpt;
  if (!c.resume.empty()) {
    ckpt = load_checkpoint(c.resume);
    require_compatible(ckpt.spec, cfg.network);
    if (ckpt.state.seed != cfg.seed) {
      throw InputError("checkpoint-incompatible", "checkpoint was written with a different seed");
    }
  } else {
    ckpt.spec = cfg.network;
    ckpt.stack = make_stack<float>(cfg.network);
    Rng rng = make_rng(cfg.seed, {key(Stream::init)});
    initialize_stack(ckpt.stack, data, rng);
    ckpt.state.seed = cfg.seed;
  }

  RunMetrics metrics;
  int code = kExitOk;
  try {
    greedy_pretrain(ckpt.stack, data, cfg.pretrain, ckpt.state, metrics, ctx.control);
  } catch (const DivergenceError& e) {
    err << "reason=divergence " << e.what() << '\n';
    code = kExitDivergence;
  }
  metrics.write_csv(ctx.out / "pretrain.csv");
  if (code == kExitOk) {
    save_checkpoint(ctx.out / "pretrain.zcae", ckpt);
    out << "checkpoint=" << (ctx.out / "pretrain.zcae").string() << '\n';
    if (!metrics.rows().empty()) out << "final_cost=" << metrics.rows().back().loss << '\n';
  }
  return code;
}

int cmd_finetune(const Common& c, const std::string& init_flag, std::ostream& out, std::ostream& err) {
  Context ctx = prepare(c, err);
  const ExperimentConfig& cfg = ctx.config;
  ExperimentData data = load_experiment_data(cfg, false, true);
  if (data.train.size() == 0) throw InputError("dataset-empty", "no labeled training images");

  Checkpoint ckpt;
  if (!c.resume.empty()) {
    ckpt = load_checkpoint(c.resume);
    require_compatible(ckpt.spec, cfg.network);
    if (!ckpt.head || ckpt.state.phase == Phase::pretrain) {
      throw InputError("checkpoint-incompatible", "resume needs a checkpoint written by finetune");
    }
  } else {
    std::optional<fs::path> init = cfg.init;
    if (!init_flag.empty()) init = init_flag == "random" ? std::nullopt : std::optional<fs::path>(init_flag);
    if (init_flag.empty() && !cfg.init && cfg.unsupervised) init = ctx.out / "pretrain.zcae";
    ckpt.spec = cfg.network;
    if (init) {
      if (!fs::is_regular_file(*init)) {
        throw InputError("checkpoint-not-found", "pretrained checkpoint not found: " + init->string());
      }
      Checkpoint pre = load_checkpoint(*init);
      require_compatible(pre.spec, cfg.network);
      ckpt.stack = std::move(pre.stack);
      err << "init: encoders from " << init->string() << '\n';
    } else {
      ckpt.stack = make_stack<float>(cfg.network);
      Rng rng = make_rng(cfg.seed, {key(Stream::init)});
      initialize_stack_random(ckpt.stack, rng);
      err << "init: random encoders\n";
    }
    Rng head_rng = make_rng(cfg.seed, {key(Stream::init), 2});
    ckpt.head = initialize_head(cfg.network.head_fan_in(), cfg.network.hidden, cfg.network.classes,
                                cfg.finetune_options().dropout, head_rng);
    ckpt.state = TrainState{Phase::finetune, cfg.network.conv.size(), 0, cfg.seed, {}};
  }

  Classifier<float> clf = ckpt.classifier();
  RunMetrics metrics;
  int code = kExitOk;
  try {
    finetune(clf, data.train, data.test ? &*data.test : nullptr, cfg.finetune, cfg.finetune_options(),
             ckpt.state, metrics, ctx.control);
  } catch (const DivergenceError& e) {
    err << "reason=divergence " << e.what() << '\n';
    code = kExitDivergence;
  }
  metrics.write_csv(ctx.out / "finetune.csv");
  if (code != kExitOk) return code;
  ckpt.stack.encoders = clf.encoders;
  ckpt.head = clf.head;
  save_checkpoint(ctx.out / "model.zcae", ckpt);
  out << "checkpoint=" << (ctx.out / "model.zcae").string() << '\n';
  if (ckpt.state.phase == Phase::done) {
    print_report(out, evaluate(clf, data.test ? *data.test : data.train));
  }
  return code;
}

int cmd_eval(const std::string& config_path, const std::string& model, std::ostream& out) {
  ExperimentConfig cfg = load_config(config_path);
  cfg.init.reset();
  cfg.validate_paths();
  const Checkpoint ckpt = load_checkpoint(model);
  require_compatible(ckpt.spec, cfg.network);
  ExperimentData data = load_experiment_data(cfg, false, true);
  print_report(out, evaluate(ckpt.classifier(), data.test ? *data.test : data.train));
  return kExitOk;
}

struct GradcheckArgs {
  std::string preset = "all";
  std::uint64_t seed = 0;
  bool f64 = false;
  std::size_t batch = 2;
  std::size_t samples = 200;
  std::optional<double> tolerance;
  std::optional<double> step;
  std::optional<std::size_t> input_size;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  std::vector<std::string> names = a.preset == "all" ? std::vector<std::string>{"cifar10", "stl10"}
                                                     : std::vector<std::string>{a.preset};
  GradcheckOptions opts;
  opts.seed = a.seed;
  opts.max_params = a.samples;
  opts.tolerance = a.tolerance.value_or(a.f64 ? 1e-5 : 2e-2);
  if (!a.f64) opts.step = 1e-2;
  if (a.step) opts.step = *a.step;
  bool ok = true;
  for (const auto& name : names) {
    NetworkSpec spec = network_preset(name);
    if (a.input_size) spec.in_h = spec.in_w = *a.input_size;
    const GradcheckReport r = a.f64 ? gradcheck_network<double>(spec, a.seed, a.batch, opts)
                                    : gradcheck_network<float>(spec, a.seed, a.batch, opts);
    out << "preset " << name << " (" << spec.in_c << "x" << spec.in_h << "x" << spec.in_w << ", "
        << (a.f64 ? "f64" : "f32") << ")\n"
        << r.to_text();
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitDivergence;
}

struct PreviewArgs {
  std::string input;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t count = 1;
  bool translate_flip = false;
  bool color_contrast = false;
  std::string contrast_mode = "literal";
  double max_shift = 0.05;
  double flip_probability = 0.5;
};

int cmd_augment_preview(const PreviewArgs& a, std::ostream& out) {
  if (!fs::is_regular_file(a.input)) throw InputError("dataset-not-found", "image not found: " + a.input);
  const Tensor4<float> image = read_ppm(a.input);
  fs::create_directories(a.out);
  AugmentToggles toggles;
  toggles.translate_flip = a.translate_flip;
  toggles.color_contrast = a.color_contrast;
  toggles.max_shift_fraction = a.max_shift;
  toggles.flip_probability = a.flip_probability;
  if (a.contrast_mode == "value") {
    toggles.contrast_mode = ContrastMode::value;
  } else if (a.contrast_mode != "literal") {
    throw ConfigError("--contrast-mode must be literal or value");
  }
  write_ppm(fs::path(a.out) / "before.ppm", image_of(image, 0));
  for (std::size_t i = 0; i < a.count; ++i) {
    Tensor4<float> copy = image;
    Rng rng = make_rng(a.seed, {key(Stream::augment), i});
    augment_image(image_of(copy, 0), toggles, rng);
    const fs::path path = fs::path(a.out) / ("after_" + std::to_string(i) + ".ppm");
    write_ppm(path, image_of(std::as_const(copy), 0));
    out << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

int cmd_filters_dump(const std::string& checkpoint, std::size_t layer, const std::string& path,
                     std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (layer < 1 || layer > ckpt.stack.size()) {
    throw InputError("missing-layer", "checkpoint has " + std::to_string(ckpt.stack.size()) +
                                          " layers, no layer " + std::to_string(layer));
  }
  const FilterBank<float>& f = ckpt.stack.encoders[layer - 1].filters();
  const FilterShape s = f.shape();
  if (s.c == 3 || s.c == 1) {
    write_filter_grid(path, f);
  } else {
    // One grayscale tile per (filter, input channel), a filter per row.
    const FilterBank<float> slices(FilterShape{s.k * s.c, 1, s.kh, s.kw}, f.values());
    write_filter_grid(path, slices, s.c);
  }
  out << "wrote " << path << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-bias convolutional auto-encoder toolkit", "zcae"};
  app.require_subcommand(1);

  Common pre_args;
  CLI::App* pre = app.add_subcommand("pretrain", "greedy layer-wise CAE pretraining");
  add_common(pre, pre_args);

  Common ft_args;
  std::string init;
  CLI::App* ft = app.add_subcommand("finetune", "supervised fine-tuning");
  add_common(ft, ft_args);
  ft->add_option("--init", init, "'random' or a pretraining checkpoint");

  std::string eval_config, eval_model;
  CLI::App* ev = app.add_subcommand("eval", "accuracy of a fine-tuned model");
  ev->add_option("--config", eval_config, "experiment config (JSON)")->required();
  ev->add_option("--model", eval_model, "model checkpoint")->required();

  GradcheckArgs gc_args;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc->add_option("--preset", gc_args.preset, "cifar10, stl10 or all")
      ->check(CLI::IsMember({"cifar10", "stl10", "all"}));
  gc->add_option("--seed", gc_args.seed);
  gc->add_flag("--f64", gc_args.f64, "64-bit arithmetic");
  gc->add_option("--batch", gc_args.batch)->check(CLI::PositiveNumber);
  gc->add_option("--samples", gc_args.samples, "entries per parameter tensor")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", gc_args.tolerance);
  gc->add_option("--step", gc_args.step, "central-difference step, relative to max(1, |w|)")
      ->check(CLI::PositiveNumber);
  gc->add_option("--input-size", gc_args.input_size, "override the preset's spatial input size");

  PreviewArgs pv_args;
  CLI::App* pv = app.add_subcommand("augment-preview", "write augmented copies of a P6 image");
  pv->add_option("--input", pv_args.input, "input .ppm")->required();
  pv->add_option("--out", pv_args.out, "output directory")->required();
  pv->add_option("--seed", pv_args.seed);
  pv->add_option("--count", pv_args.count)->check(CLI::PositiveNumber);
  pv->add_flag("-A,--translate-flip", pv_args.translate_flip);
  pv->add_flag("-C,--color-contrast", pv_args.color_contrast);
  pv->add_option("--contrast-mode", pv_args.contrast_mode);
  pv->add_option("--max-shift", pv_args.max_shift);
  pv->add_option("--flip-probability", pv_args.flip_probability);

  std::string fd_ckpt, fd_out;
  std::size_t fd_layer = 1;
  CLI::App* fd = app.add_subcommand("filters-dump", "write a layer's filters as a P6 grid");
  fd->add_option("--checkpoint", fd_ckpt)->required();
  fd->add_option("--layer", fd_layer);
  fd->add_option("--out", fd_out, "output .ppm")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "reason=usage " << e.what() << '\n';
    return kExitInput;
  }

  try {
    if (*pre) return cmd_pretrain(pre_args, out, err);
    if (*ft) return cmd_finetune(ft_args, init, out, err);
    if (*ev) return cmd_eval(eval_config, eval_model, out);
    if (*gc) return cmd_gradcheck(gc_args, out);
    if (*pv) return cmd_augment_preview(pv_args, out);
    if (*fd) return cmd_filters_dump(fd_ckpt, fd_layer, fd_out, out);
  } catch (const DivergenceError& e) {
    err << "reason=divergence " << e.what() << '\n';
    return kExitDivergence;
  } catch (const Error& e) {
    err << "reason=" << e.reason() << ' ' << e.what() << '\n';
    return dynamic_cast<const InputError*>(&e) ? kExitInput : kExitInternal;
  } catch (const std::exception& e) {
    err << "reason=internal " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace zcae

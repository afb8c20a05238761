// cowdiff command-line front end.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cowdiff/config.hpp"
#include "cowdiff/cow.hpp"
#include "cowdiff/diagnostics.hpp"
#include "cowdiff/gaussian_mixture.hpp"
#include "cowdiff/io.hpp"
#include "cowdiff/sampler.hpp"
#include "cowdiff/text_util.hpp"
#include "cowdiff/tiny_denoiser.hpp"

namespace fs = std::filesystem;
using namespace cowdiff;

namespace {

struct KeySpec {
  std::string name;
  std::string fallback;
  std::string help;
};

// Keys written by the tool itself; accepted in configs so a manifest can be
// fed back as a config, but otherwise ignored.
const std::set<std::string> kManifestKeys = {"command", "status", "error", "denoiser_calls",
                                             "inversion_calls", "expected_denoiser_calls",
                                             "unconditional_weight", "self_merge_contamination"};

std::vector<KeySpec> common_keys(const std::string& steps_default,
                                 const std::string& schedule_default = "sd-linear") {
  return {
      {"seed", "0", "top-level rng seed"},
      {"out", ".", "output directory"},
      {"schedule", schedule_default, "schedule preset (sd-linear, sd-scaled-linear, toy-linear)"},
      {"steps", steps_default, "sampling subsequence length"},
  };
}

std::vector<KeySpec> denoiser_keys() {
  return {
      {"mixture", "desk", "mixture preset name or mixture file (analytic denoiser)"},
      {"model", "", "trained tiny-denoiser file; takes precedence over mixture"},
  };
}

std::vector<KeySpec> shape_keys(const std::string& h, const std::string& w) {
  return {{"height", h, "canvas height"}, {"width", w, "canvas width"}, {"channels", "1", "channels"}};
}

std::vector<KeySpec> concat(std::initializer_list<std::vector<KeySpec>> parts) {
  std::vector<KeySpec> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

struct Context {
  std::string command;
  KeyValueConfig cfg;
  KeyValueConfig manifest;
  fs::path out;
};

std::string path_in(const Context& ctx, const std::string& name) { return (ctx.out / name).string(); }

std::shared_ptr<const Denoiser> load_denoiser(const KeyValueConfig& cfg, const NoiseSchedule& base) {
  const std::string model = cfg.get_string("model", "");
  if (!model.empty()) {
    auto net = TinyDenoiser::load(model);
    if (net->total_steps() != base.total_steps()) {
      throw std::invalid_argument("model was trained for T=" + std::to_string(net->total_steps()) +
                                  " but schedule has T=" + std::to_string(base.total_steps()));
    }
    return net;
  }
  return std::make_shared<GaussianMixtureDenoiser>(
      std::make_shared<const GaussianMixtureModel>(
          [&] {
            const std::string m = cfg.get_string("mixture", "desk");
            return (m == "desk" || m == "bimodal") ? mixture_preset(m) : load_mixture(m);
          }()),
      base);
}

std::shared_ptr<const GaussianMixtureDenoiser> load_mixture_denoiser(const KeyValueConfig& cfg,
                                                                     const NoiseSchedule& base) {
  if (!cfg.get_string("model", "").empty()) {
    throw std::invalid_argument("diagnose experiments need the analytic mixture denoiser");
  }
  return std::static_pointer_cast<const GaussianMixtureDenoiser>(load_denoiser(cfg, base));
}

NoiseSchedule base_schedule(const KeyValueConfig& cfg) {
  return schedule_preset(cfg.get_string("schedule", "sd-linear"));
}

NoiseSchedule sampling_schedule(const KeyValueConfig& cfg) {
  return make_subsequence(base_schedule(cfg), cfg.get_int("steps", 50));
}

ConditionSpec condition_from(const KeyValueConfig& cfg) {
  const std::string label = cfg.get_string("label", "");
  return label.empty() ? ConditionSpec::unconditional() : ConditionSpec::categorical(label);
}

Shape shape_from(const KeyValueConfig& cfg, const Denoiser& denoiser) {
  if (auto* net = dynamic_cast<const TinyDenoiser*>(&denoiser)) return net->shape();
  const Shape s{cfg.get_int("height", 16), cfg.get_int("width", 16), cfg.get_int("channels", 1)};
  if (!s.valid()) throw std::invalid_argument("invalid canvas shape " + s.str());
  return s;
}

void write_image_pair(const Context& ctx, const std::string& stem, const Canvas& canvas) {
  write_canvas(path_in(ctx, stem + ".tensor"), canvas);
  if (canvas.shape().channels == 1) write_canvas(path_in(ctx, stem + ".pgm"), canvas);
  if (canvas.shape().channels == 3) write_canvas(path_in(ctx, stem + ".ppm"), canvas);
}

void write_trace(const Context& ctx, const Trace& trace) {
  std::ofstream out(path_in(ctx, "trace.csv"));
  trace.write_csv(out);
  if (!out) throw std::runtime_error("failed writing trace.csv");
}

void record_calls(Context& ctx, const Trace& trace) {
  ctx.manifest.set("denoiser_calls", std::to_string(trace.denoiser_calls()));
  ctx.manifest.set("inversion_calls", std::to_string(trace.inversion_calls()));
}

void cmd_sample(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const NoiseSchedule base = base_schedule(cfg);
  const NoiseSchedule schedule = sampling_schedule(cfg);
  const auto denoiser = load_denoiser(cfg, base);
  const Shape shape = shape_from(cfg, *denoiser);
  const std::uint64_t seed = cfg.get_u64("seed", 0);

  LatentState x{Canvas(shape), schedule.top_step()};
  const std::string latent = cfg.get_string("latent", "");
  if (latent.empty()) {
    RngStream init = RngStream::derive(seed, "init");
    x.data = init.gaussian_canvas(shape);
  } else {
    x.data = read_canvas(latent);
  }
  if (!denoiser->accepts_shape(x.data.shape())) {
    throw std::invalid_argument("denoiser cannot evaluate shape " + x.data.shape().str());
  }
  RngStream rng = RngStream::derive(seed, "sample");
  Trace trace;
  DenoiseOptions opts;
  opts.eta = cfg.get_double("eta", 0.0);
  opts.guidance_scale = cfg.get_double("guidance", 1.0);
  opts.trace = &trace;
  const LatentState result = denoise_range(x, 0, *denoiser, condition_from(cfg), schedule, rng, opts);
  write_image_pair(ctx, "sample", result.data);
  write_trace(ctx, trace);
  record_calls(ctx, trace);
}

void cmd_invert(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const NoiseSchedule base = base_schedule(cfg);
  const NoiseSchedule schedule = sampling_schedule(cfg);
  const auto denoiser = load_denoiser(cfg, base);
  const std::string image = cfg.get_string("image", "");
  if (image.empty()) throw std::invalid_argument("invert needs image=<path>");
  const Canvas x0 = read_canvas(image);
  if (!denoiser->accepts_shape(x0.shape())) {
    throw std::invalid_argument("denoiser cannot evaluate shape " + x0.shape().str());
  }
  Trace trace;
  const auto traj = invert_trajectory({x0, 0}, *denoiser, condition_from(cfg), schedule, -1,
                                      cfg.get_double("guidance", 1.0), &trace);
  write_canvas(path_in(ctx, "latent.tensor"), traj.back().data);
  write_trace(ctx, trace);
  record_calls(ctx, trace);
}

void cmd_cow(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const NoiseSchedule base = base_schedule(cfg);
  const NoiseSchedule schedule = sampling_schedule(cfg);
  const auto denoiser = load_denoiser(cfg, base);
  const std::string image = cfg.get_string("image", "");
  if (image.empty()) throw std::invalid_argument("cow needs image=<path>");
  const Canvas condition_image = read_canvas(image);
  const Shape& is = condition_image.shape();

  COWConfig c;
  const std::string preset = cfg.get_string("preset", "custom");
  if (preset == "standard") {
    c = standard_config(schedule);
  } else if (preset != "custom") {
    throw std::invalid_argument("unknown cow preset '" + preset + "' (expected standard or custom)");
  }
  const COWConfig anchors =
      config_from_positions(schedule, cfg.get_int("t0", schedule.position_of(c.t0)),
                            cfg.get_int("t1", schedule.position_of(c.t1)),
                            cfg.get_int("t2", schedule.position_of(c.t2)));
  c.t0 = anchors.t0;
  c.t1 = anchors.t1;
  c.t2 = anchors.t2;
  c.cycles = cfg.get_int("cycles", c.cycles);
  c.eta_pre = cfg.get_double("eta_pre", c.eta_pre);
  c.eta_cycle = cfg.get_double("eta_cycle", c.eta_cycle);
  c.eta_post = cfg.get_double("eta_post", c.eta_post);
  c.guidance_scale = cfg.get_double("guidance", c.guidance_scale);
  c.background_value = cfg.get_double("background", c.background_value);
  c.replace = cfg.get_bool("replace", c.replace);
  c.replace_stride = cfg.get_int("replace_stride", c.replace_stride);
  c.conditional_inversion = cfg.get_bool("conditional_inversion", c.conditional_inversion);
  if (auto* net = dynamic_cast<const TinyDenoiser*>(denoiser.get())) {
    c.canvas_shape = net->shape();
  } else {
    c.canvas_shape = Shape{cfg.get_int("canvas_height", 16), cfg.get_int("canvas_width", 16),
                           is.channels};
  }
  c.mask = RegionMask{cfg.get_int("mask_row", 0), cfg.get_int("mask_col", 0), is.height, is.width};
  c.validate(schedule);
  const std::pair<const char*, std::string> resolved[] = {
      {"t0", std::to_string(schedule.position_of(c.t0))},
      {"t1", std::to_string(schedule.position_of(c.t1))},
      {"t2", std::to_string(schedule.position_of(c.t2))},
      {"cycles", std::to_string(c.cycles)},
      {"eta_pre", format_double(c.eta_pre)},
      {"eta_cycle", format_double(c.eta_cycle)},
      {"eta_post", format_double(c.eta_post)},
      {"guidance", format_double(c.guidance_scale)},
      {"background", format_double(c.background_value)},
      {"replace", c.replace ? "true" : "false"},
      {"replace_stride", std::to_string(c.replace_stride)},
      {"conditional_inversion", c.conditional_inversion ? "true" : "false"}};
  for (const auto& [k, v] : resolved) ctx.manifest.set(k, v);
  ctx.manifest.set("expected_denoiser_calls", std::to_string(expected_denoiser_calls(schedule, c)));

  RngStream rng = RngStream::derive(cfg.get_u64("seed", 0), "cow");
  const CowResult result = cow_sample(condition_image, condition_from(cfg), c, *denoiser, schedule, rng);
  write_image_pair(ctx, "output", result.output.data);
  write_trace(ctx, result.trace);
  record_calls(ctx, result.trace);
}

void cmd_train(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const std::string dataset_path = cfg.get_string("dataset", "");
  if (dataset_path.empty()) throw std::invalid_argument("train needs dataset=<manifest path>");
  const auto dataset = load_dataset(dataset_path);
  if (dataset.empty()) {
    throw std::invalid_argument("dataset '" + dataset_path + "' is empty: training needs at least one sample");
  }
  TrainingBudget budget;
  budget.epochs = cfg.get_int("epochs", budget.epochs);
  budget.batch_size = cfg.get_int("batch_size", budget.batch_size);
  budget.steps_per_epoch = cfg.get_int("steps_per_epoch", budget.steps_per_epoch);
  budget.learning_rate = cfg.get_double("learning_rate", budget.learning_rate);
  budget.hidden = cfg.get_int("hidden", budget.hidden);
  budget.time_features = cfg.get_int("time_features", budget.time_features);
  budget.cond_dropout = cfg.get_double("cond_dropout", budget.cond_dropout);
  budget.seed = RngStream::derive(cfg.get_u64("seed", 0), "train").seed();
  const TrainResult result = train_tiny_denoiser(dataset, base_schedule(cfg), budget);
  result.model->save(path_in(ctx, "model.cwdn"));
  std::ofstream loss(path_in(ctx, "loss.csv"));
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    loss << e + 1 << ',' << format_double(result.epoch_loss[e]) << '\n';
  }
  if (!loss) throw std::runtime_error("failed writing loss.csv");
}

void cmd_toy_data(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Shape shape{cfg.get_int("height", 8), cfg.get_int("width", 8), cfg.get_int("channels", 1)};
  if (!shape.valid()) throw std::invalid_argument("invalid shape " + shape.str());
  const auto dataset = make_toy_dataset(shape, cfg.get_int("per_class", 64),
                                        RngStream::derive(cfg.get_u64("seed", 0), "toy").seed());
  save_dataset(path_in(ctx, "dataset.txt"), dataset);
}

void write_curve(const Context& ctx, const std::string& name, const std::vector<CurvePoint>& pts,
                 const std::vector<std::string>& extra_rows = {}) {
  std::ofstream out(path_in(ctx, name));
  write_curve_csv(out, pts);
  for (const auto& row : extra_rows) out << row << '\n';
  if (!out) throw std::runtime_error("failed writing " + name);
}

void cmd_merge(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const NoiseSchedule schedule = sampling_schedule(cfg);
  const auto denoiser = load_mixture_denoiser(cfg, base_schedule(cfg));
  MergeSweepOptions o;
  o.steps = cfg.get_int_list("grid", fraction_grid(schedule, {0.1, 0.3, 0.5, 0.7, 0.9}));
  o.replicates = cfg.get_int("replicates", o.replicates);
  o.layout = parse_layout(cfg.get_string("layout", "top"));
  o.shape = shape_from(cfg, *denoiser);
  o.seed = RngStream::derive(cfg.get_u64("seed", 0), "merge").seed();
  const auto points = merge_sweep(*denoiser, schedule, o);

  // Self-merge control at the noisiest grid step.
  const int top = *std::max_element(o.steps.begin(), o.steps.end());
  double worst = 0.0;
  for (int rep = 0; rep < o.replicates; ++rep) {
    RngStream rng = RngStream::derive(o.seed ^ 0x5e1fULL, static_cast<std::uint64_t>(rep));
    const Canvas img = denoiser->model().sample(o.shape, rng);
    const MergeResult r = merge_and_regenerate(img, img, top, o.layout, *denoiser, schedule);
    worst = std::max({worst, r.contamination_a, r.contamination_b});
  }
  ctx.manifest.set("self_merge_contamination", format_double(worst));
  write_curve(ctx, "merge.csv", points,
              {"control," + std::to_string(top) + "," + format_double(worst) + ",,," +
               std::to_string(o.replicates)});
}

void cmd_disturb(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const NoiseSchedule schedule = sampling_schedule(cfg);
  const auto denoiser = load_mixture_denoiser(cfg, base_schedule(cfg));
  DisturbSweepOptions o;
  o.steps = cfg.get_int_list("grid", {100, 300, 500, 700, 900});
  o.duration = cfg.get_int("duration", o.duration);
  o.eta = cfg.get_double("eta", o.eta);
  o.replicates = cfg.get_int("replicates", o.replicates);
  const int channels = cfg.get_int("channels", 1);
  o.region = Shape{cfg.get_int("region_height", 8), cfg.get_int("region_width", 8), channels};
  o.canvas = Shape{cfg.get_int("height", 16), cfg.get_int("width", 16), channels};
  o.placement = Placement{cfg.get_int("placement_row", 0), cfg.get_int("placement_col", 0)};
  o.seed = RngStream::derive(cfg.get_u64("seed", 0), "disturb").seed();
  write_curve(ctx, "disturb.csv", disturb_sweep(*denoiser, schedule, o));
}

void cmd_sensitivity(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const NoiseSchedule schedule = sampling_schedule(cfg);
  const auto denoiser = load_mixture_denoiser(cfg, base_schedule(cfg));
  SensitivitySweepOptions o;
  o.label = cfg.get_string("label", "");
  if (o.label.empty()) throw std::invalid_argument("sensitivity needs label=<target label>");
  o.starts = cfg.get_int_list("grid", {1000, 800, 600, 400, 200});
  o.duration = cfg.get_int("duration", o.duration);
  o.guidance_scale = cfg.get_double("guidance", o.guidance_scale);
  o.eta = cfg.get_double("eta", o.eta);
  o.replicates = cfg.get_int("replicates", o.replicates);
  o.shape = shape_from(cfg, *denoiser);
  o.seed = RngStream::derive(cfg.get_u64("seed", 0), "sensitivity").seed();
  double weight = 0.0;
  for (const auto& c : denoiser->model().components()) {
    if (c.label == o.label) weight += c.weight;
  }
  ctx.manifest.set("unconditional_weight", format_double(weight));
  write_curve(ctx, "sensitivity.csv", sensitivity_sweep(*denoiser, schedule, o));
}

struct Command {
  std::string name;
  std::string description;
  std::vector<KeySpec> keys;
  std::function<void(Context&)> run;
};

std::vector<Command> commands() {
  const auto guided = std::vector<KeySpec>{{"label", "", "categorical condition (empty = unconditional)"},
                                           {"guidance", "1", "classifier-free guidance scale"}};
  return {
      {"sample", "generate from noise (or from latent=<file>)",
       concat({common_keys("50"), denoiser_keys(), shape_keys("16", "16"), guided,
               {{"eta", "0", "stochasticity"}, {"latent", "", "start latent at the top step"}}}),
       cmd_sample},
      {"invert", "deterministically invert image=<file> to the top step",
       concat({common_keys("50"), denoiser_keys(), guided, {{"image", "", "input image"}}}),
       cmd_invert},
      {"cow", "cyclic one-way diffusion from a condition image",
       concat({common_keys("50"), denoiser_keys(),
               {{"image", "", "condition image (region content)"},
                {"label", "", "categorical condition"},
                {"preset", "standard", "standard or custom"},
                {"t0", "", "position of t0 on the subsequence"},
                {"t1", "", "position of t1"},
                {"t2", "", "position of t2"},
                {"cycles", "", "destroy/construct rounds"},
                {"eta_pre", "", "eta from the top step to t1"},
                {"eta_cycle", "", "eta inside construct"},
                {"eta_post", "", "eta below t1"},
                {"guidance", "", "guidance scale"},
                {"background", "", "seed canvas background value"},
                {"canvas_height", "16", "canvas height (mixture denoiser)"},
                {"canvas_width", "16", "canvas width (mixture denoiser)"},
                {"mask_row", "0", "region top row"},
                {"mask_col", "0", "region left column"},
                {"replace", "", "enable region replacement"},
                {"replace_stride", "", "replace every n-th step"},
                {"conditional_inversion", "", "invert with the label"}}}),
       cmd_cow},
      {"train", "train the tiny denoiser on dataset=<manifest>",
       concat({common_keys("50"),
               {{"dataset", "", "dataset manifest"},
                {"epochs", "300", "epochs"},
                {"batch_size", "64", "batch size"},
                {"steps_per_epoch", "0", "optimizer steps per epoch (0 = dataset/batch)"},
                {"learning_rate", "0.002", "peak learning rate"},
                {"hidden", "128", "hidden width"},
                {"time_features", "16", "sinusoidal time features"},
                {"cond_dropout", "0.2", "null-label fraction"}}}),
       cmd_train},
      {"toy-data", "write the two-class toy dataset",
       concat({common_keys("50"), shape_keys("8", "8"), {{"per_class", "64", "images per class"}}}),
       cmd_toy_data},
  };
}

std::vector<Command> diagnose_commands() {
  return {
      {"merge", "internal-diffusion contamination sweep",
       concat({common_keys("1000", "sd-scaled-linear"), denoiser_keys(), shape_keys("16", "16"),
               {{"grid", "", "replace steps (default 10..90% of T)"},
                {"replicates", "10", "seeds per grid point"},
                {"layout", "top", "half occupied by the first image"}}}),
       cmd_merge},
      {"disturb", "disturb-and-reconstruct sweep",
       concat({common_keys("1000", "sd-scaled-linear"), denoiser_keys(), shape_keys("16", "16"),
               {{"grid", "100,300,500,700,900", "disturb steps"},
                {"duration", "100", "composite denoising steps"},
                {"eta", "1", "eta of the composite leg"},
                {"replicates", "10", "seeds per grid point"},
                {"region_height", "8", "region height"},
                {"region_width", "8", "region width"},
                {"placement_row", "0", "region top row"},
                {"placement_col", "0", "region left column"}}}),
       cmd_disturb},
      {"sensitivity", "condition-sensitivity sweep",
       concat({common_keys("1000", "sd-scaled-linear"), denoiser_keys(), shape_keys("16", "16"),
               {{"label", "", "target label"},
                {"grid", "1000,800,600,400,200", "injection start steps"},
                {"duration", "100", "injection window length"},
                {"guidance", "1", "guidance scale inside the window"},
                {"eta", "0", "sampling eta"},
                {"replicates", "1000", "runs per grid point"}}}),
       cmd_sensitivity},
  };
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int execute(const std::string& name, const Command& cmd, const std::string& config_path,
            const std::map<std::string, std::string>& flags) {
  std::set<std::string> allowed = kManifestKeys;
  for (const auto& k : cmd.keys) allowed.insert(k.name);
  Context ctx;
  ctx.command = name;
  ctx.cfg = KeyValueConfig(allowed);
  try {
    if (!config_path.empty()) ctx.cfg.load(config_path);
    for (const auto& [k, v] : flags) ctx.cfg.set(k, v);
    for (const auto& k : cmd.keys) {
      if (!ctx.cfg.has(k.name) && !k.fallback.empty()) ctx.cfg.set(k.name, k.fallback);
    }
    KeyValueConfig clean(allowed);
    for (const auto& [k, v] : ctx.cfg.values()) {
      if (kManifestKeys.count(k) == 0) clean.set(k, v);
    }
    ctx.cfg = std::move(clean);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  ctx.out = ctx.cfg.get_string("out", ".");
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory '" << ctx.out.string() << "': " << ec.message() << '\n';
    return 1;
  }
  ctx.manifest = ctx.cfg;
  ctx.manifest.set("command", name);
  int status = 0;
  try {
    cmd.run(ctx);
    ctx.manifest.set("status", "ok");
  } catch (const std::exception& e) {
    ctx.manifest.set("status", "error");
    ctx.manifest.set("error", one_line(e.what()));
    std::cerr << "error: " << e.what() << '\n';
    status = 1;
  }
  std::ofstream manifest(path_in(ctx, "manifest.txt"));
  ctx.manifest.write(manifest);
  if (!manifest) {
    std::cerr << "error: failed writing manifest\n";
    return 1;
  }
  return status;
}

struct Registered {
  CLI::App* app;
  Command command;
  std::string full_name;
  std::string config;
  std::map<std::string, std::string> values;
};

void register_command(CLI::App& parent, const Command& cmd, const std::string& prefix,
                      std::vector<std::unique_ptr<Registered>>& out) {
  auto reg = std::make_unique<Registered>();
  reg->command = cmd;
  reg->full_name = prefix + cmd.name;
  reg->app = parent.add_subcommand(cmd.name, cmd.description);
  reg->app->add_option("--config", reg->config, "key=value config file");
  for (const auto& k : cmd.keys) {
    reg->app->add_option("--" + k.name, reg->values[k.name], k.help);
  }
  out.push_back(std::move(reg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cowdiff: diffusion sampling, inversion and cyclic one-way diffusion"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Registered>> registered;
  for (const auto& cmd : commands()) register_command(app, cmd, "", registered);
  CLI::App* diagnose = app.add_subcommand("diagnose", "probe experiments");
  diagnose->require_subcommand(1);
  for (const auto& cmd : diagnose_commands()) register_command(*diagnose, cmd, "diagnose ", registered);

  CLI11_PARSE(app, argc, argv);

  for (const auto& reg : registered) {
    if (!reg->app->parsed()) continue;
    std::map<std::string, std::string> flags;
    for (const auto& k : reg->command.keys) {
      if (reg->app->count("--" + k.name) > 0) flags[k.name] = reg->values.at(k.name);
    }
    return execute(reg->full_name, reg->command, reg->config, flags);
  }
  return 2;
}

#include "cowdiff/cow.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace cowdiff {

bool RegionMask::fits(const Shape& canvas) const {
  return height > 0 && width > 0 && row >= 0 && col >= 0 && row + height <= canvas.height &&
         col + width <= canvas.width;
}

void RegionMask::validate(const Shape& canvas) const {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("region size must be positive, got " + std::to_string(height) +
                                "x" + std::to_string(width));
  }
  if (!fits(canvas)) {
    throw std::invalid_argument("region (" + std::to_string(row) + "," + std::to_string(col) + ")+" +
                                std::to_string(height) + "x" + std::to_string(width) +
                                " does not fit canvas " + canvas.str());
  }
}

const LatentState& VisualSeed::state_at(int step) const {
  if (step == 0) return composite;
  auto it = std::lower_bound(composite_trajectory.begin(), composite_trajectory.end(), step,
                             [](const LatentState& s, int t) { return s.step < t; });
  if (it == composite_trajectory.end() || it->step != step) {
    throw std::invalid_argument("seed trajectory has no state at step " + std::to_string(step));
  }
  return *it;
}

void COWConfig::validate(const NoiseSchedule& schedule) const {
  const int T = schedule.top_step();
  if (!(0 < t0 && t0 < t1 && t1 < t2 && t2 < T)) {
    throw std::invalid_argument("COW anchors must satisfy 0 < t0 < t1 < t2 < T; got t0=" +
                                std::to_string(t0) + " t1=" + std::to_string(t1) +
                                " t2=" + std::to_string(t2) + " T=" + std::to_string(T));
  }
  for (int t : {t0, t1, t2}) {
    if (!schedule.on_subsequence(t)) {
      throw std::invalid_argument("COW anchor step " + std::to_string(t) +
                                  " is not on the sampling subsequence");
    }
  }
  if (cycles < 0) throw std::invalid_argument("cycles must be >= 0");
  if (guidance_scale < 0.0) throw std::invalid_argument("guidance_scale must be >= 0");
  if (!(background_value >= -1.0 && background_value <= 1.0)) {
    throw std::invalid_argument("background_value must lie in [-1, 1]");
  }
  if (eta_pre < 0.0 || eta_cycle < 0.0 || eta_post < 0.0) {
    throw std::invalid_argument("eta values must be >= 0");
  }
  if (replace_stride < 1) throw std::invalid_argument("replace_stride must be >= 1");
  if (!canvas_shape.valid()) throw std::invalid_argument("invalid canvas shape");
  mask.validate(canvas_shape);
}

COWConfig config_from_positions(const NoiseSchedule& schedule, int t0_pos, int t1_pos,
                                int t2_pos) {
  COWConfig c;
  c.t0 = schedule.step_at_position(t0_pos);
  c.t1 = schedule.step_at_position(t1_pos);
  c.t2 = schedule.step_at_position(t2_pos);
  return c;
}

COWConfig standard_config(const NoiseSchedule& schedule) {
  if (schedule.subsequence_size() != 50) {
    throw std::invalid_argument("standard_config expects a 50-step subsequence");
  }
  COWConfig c = config_from_positions(schedule, 20, 25, 35);
  c.cycles = 60;
  c.guidance_scale = 7.5;
  c.eta_pre = 1.0;
  c.eta_cycle = 1.0;
  c.eta_post = 0.0;
  return c;
}

Phase phase_of(int step, const COWConfig& config) {
  if (step > config.t2) return Phase::Chaos;
  if (step >= config.t1) return Phase::SemanticFormation;
  return Phase::QualityBoosting;
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::Chaos:
      return "chaos";
    case Phase::SemanticFormation:
      return "semantic_formation";
    case Phase::QualityBoosting:
      return "quality_boosting";
  }
  return "?";
}

long expected_denoiser_calls(const NoiseSchedule& schedule, const COWConfig& config) {
  const long s = schedule.position_of(schedule.top_step());
  const long band = schedule.position_of(config.t2) - schedule.position_of(config.t1);
  return s + static_cast<long>(config.cycles) * band;
}

Canvas compose_seed_canvas(const Canvas& condition_image, const RegionMask& mask,
                           const Shape& canvas_shape, double background_value) {
  mask.validate(canvas_shape);
  const Shape& cs = condition_image.shape();
  if (cs.height != mask.height || cs.width != mask.width || cs.channels != canvas_shape.channels) {
    throw std::invalid_argument("condition image " + cs.str() + " does not match region " +
                                std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                                "x" + std::to_string(canvas_shape.channels));
  }
  Canvas canvas(canvas_shape, background_value);
  canvas.paste(condition_image, mask.row, mask.col);
  return canvas;
}

VisualSeed seed_initialize(const Canvas& condition_image, const COWConfig& config,
                           const Denoiser& denoiser, const ConditionSpec& inversion_condition,
                           const NoiseSchedule& schedule, Trace* trace) {
  VisualSeed seed;
  seed.condition_image = condition_image;
  seed.mask = config.mask;
  seed.composite = LatentState{
      compose_seed_canvas(condition_image, config.mask, config.canvas_shape,
                          config.background_value),
      0};
  if (!denoiser.accepts_shape(config.canvas_shape)) {
    throw std::invalid_argument("denoiser cannot evaluate canvas shape " +
                                config.canvas_shape.str());
  }
  seed.composite_trajectory =
      invert_trajectory(seed.composite, denoiser, inversion_condition, schedule, -1,
                        config.guidance_scale, trace);
  return seed;
}

LatentState replace_region(const LatentState& state, const VisualSeed& seed) {
  const LatentState& src = seed.state_at(state.step);
  require_same_shape(state.data, src.data, "replace_region");
  const RegionMask& m = seed.mask;
  LatentState out = state;
  out.data.paste(src.data.crop(m.row, m.col, m.height, m.width), m.row, m.col);
  return out;
}

LatentState destroy(const LatentState& state, const COWConfig& config,
                    const NoiseSchedule& schedule, RngStream& rng, Trace* trace) {
  if (state.step != config.t1) {
    throw std::invalid_argument("destroy: state must be at t1=" + std::to_string(config.t1) +
                                ", got " + std::to_string(state.step));
  }
  LatentState out = forward_noise(state, config.t2, schedule, rng);
  if (trace) trace->record_event("destroy", config.t2);
  return out;
}

namespace {

/// Step hook that replaces after every stride-th step and always at `end`.
StepHook replacing_hook(const VisualSeed& seed, const COWConfig& config, int end,
                        const std::string& stage, Trace* trace,
                        const ReplacementObserver& observer) {
  auto counter = std::make_shared<int>(0);
  return [&seed, &config, end, stage, trace, &observer, counter](LatentState& s) {
    ++*counter;
    if (*counter % config.replace_stride != 0 && s.step != end) return;
    LatentState replaced = replace_region(s, seed);
    if (observer) observer(stage, s, replaced);
    if (trace) trace->record_event(stage + ":replace", s.step);
    s = std::move(replaced);
  };
}

}  // namespace

LatentState construct(const LatentState& state, const VisualSeed& seed, const COWConfig& config,
                      const Denoiser& denoiser, const ConditionSpec& condition,
                      const NoiseSchedule& schedule, RngStream& rng, Trace* trace,
                      const ReplacementObserver& observer) {
  if (state.step != config.t2) {
    throw std::invalid_argument("construct: state must be at t2=" + std::to_string(config.t2) +
                                ", got " + std::to_string(state.step));
  }
  DenoiseOptions opts;
  opts.eta = config.eta_cycle;
  opts.guidance_scale = config.guidance_scale;
  opts.trace = trace;
  opts.stage = "construct";
  if (config.replace) {
    opts.on_step = replacing_hook(seed, config, config.t1, "construct", trace, observer);
  }
  return denoise_range(state, config.t1, denoiser, condition, schedule, rng, opts);
}

namespace {

LatentState run_pipeline(const VisualSeed& seed, const ConditionSpec& text_condition,
                         const COWConfig& config, const Denoiser& denoiser,
                         const NoiseSchedule& schedule, RngStream& rng,
                         const ReplacementObserver& observer, Trace* trace) {
  if (seed.composite_trajectory.empty() || seed.top().step != schedule.top_step()) {
    throw std::invalid_argument("seed trajectory does not reach the top step");
  }
  LatentState x = seed.top();

  // (2) Descent from x_T to t1 with replacement.
  {
    DenoiseOptions opts;
    opts.eta = config.eta_pre;
    opts.guidance_scale = config.guidance_scale;
    opts.trace = trace;
    opts.stage = "pre_cycle";
    if (config.replace) {
      opts.on_step = replacing_hook(seed, config, config.t1, "pre_cycle", trace, observer);
    }
    x = denoise_range(x, config.t1, denoiser, text_condition, schedule, rng, opts);
  }

  // (3) Destroy / construct cycles.
  for (int c = 0; c < config.cycles; ++c) {
    x = destroy(x, config, schedule, rng, trace);
    x = construct(x, seed, config, denoiser, text_condition, schedule, rng, trace, observer);
  }

  // (4) Descent t1 -> t0.
  DenoiseOptions post;
  post.eta = config.eta_post;
  post.guidance_scale = config.guidance_scale;
  post.trace = trace;
  post.stage = "transition";
  x = denoise_range(x, config.t0, denoiser, text_condition, schedule, rng, post);

  // (5) ID preservation at t0.
  if (config.replace) {
    LatentState replaced = replace_region(x, seed);
    if (observer) observer("id_preserve", x, replaced);
    if (trace) trace->record_event("id_preserve:replace", x.step);
    x = std::move(replaced);
  }

  // (6) Quality boosting t0 -> 0.
  post.stage = "quality_boost";
  return denoise_range(x, 0, denoiser, text_condition, schedule, rng, post);
}

}  // namespace

CowResult cow_sample(const Canvas& condition_image, const ConditionSpec& text_condition,
                     const COWConfig& config, const Denoiser& denoiser,
                     const NoiseSchedule& schedule, RngStream& rng,
                     const ReplacementObserver& observer) {
  config.validate(schedule);
  denoiser.require_label(text_condition);
  CowResult result;
  const ConditionSpec inversion_condition =
      config.conditional_inversion ? text_condition : ConditionSpec::unconditional();
  const VisualSeed seed = seed_initialize(condition_image, config, denoiser, inversion_condition,
                                          schedule, &result.trace);
  result.output = run_pipeline(seed, text_condition, config, denoiser, schedule, rng, observer,
                               &result.trace);
  return result;
}

CowResult cow_sample(const VisualSeed& seed, const ConditionSpec& text_condition,
                     const COWConfig& config_in, const Denoiser& denoiser,
                     const NoiseSchedule& schedule, RngStream& rng,
                     const ReplacementObserver& observer) {
  COWConfig config = config_in;
  config.mask = seed.mask;
  config.canvas_shape = seed.composite.data.shape();
  config.validate(schedule);
  denoiser.require_label(text_condition);
  CowResult result;
  result.output = run_pipeline(seed, text_condition, config, denoiser, schedule, rng, observer,
                               &result.trace);
  return result;
}

}  // namespace cowdiff

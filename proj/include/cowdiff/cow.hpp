#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cowdiff/denoiser.hpp"
#include "cowdiff/rng.hpp"
#include "cowdiff/sampler.hpp"
#include "cowdiff/schedule.hpp"

namespace cowdiff {

/// Axis-aligned rectangle in canvas coordinates.
struct RegionMask {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;

  [[nodiscard]] bool fits(const Shape& canvas) const;
  /// Throws unless the region is non-empty and inside `canvas`.
  void validate(const Shape& canvas) const;
  [[nodiscard]] bool contains(int r, int c) const {
    return r >= row && r < row + height && c >= col && c < col + width;
  }
  [[nodiscard]] static RegionMask full(const Shape& canvas) {
    return {0, 0, canvas.height, canvas.width};
  }

  friend bool operator==(const RegionMask&, const RegionMask&) = default;
};

/// The visual condition together with the inversion trajectory of the
/// composed seed canvas. Immutable once built; safe to share between runs.
struct VisualSeed {
  Canvas condition_image;
  RegionMask mask;
  /// Composed canvas at step 0 (background plus the condition region).
  LatentState composite;
  /// Inverted composite at tau_1 < ... < tau_S (increasing step order).
  std::vector<LatentState> composite_trajectory;

  /// State at `step`: the composite for 0, otherwise the trajectory entry.
  [[nodiscard]] const LatentState& state_at(int step) const;
  [[nodiscard]] const LatentState& top() const { return composite_trajectory.back(); }
};

struct COWConfig {
  /// Cycle anchors as base-schedule steps; 0 < t0 < t1 < t2 < T.
  int t0 = 400;
  int t1 = 500;
  int t2 = 700;
  int cycles = 60;
  double eta_pre = 1.0;    // T -> t1
  double eta_cycle = 1.0;  // construct t2 -> t1
  double eta_post = 0.0;   // t1 -> t0 and t0 -> 0
  double guidance_scale = 7.5;
  double background_value = 0.0;
  Shape canvas_shape{16, 16, 1};
  RegionMask mask{0, 0, 8, 8};
  /// Replace after every `replace_stride`-th step of a segment (and always on
  /// arrival at t1).
  int replace_stride = 1;
  /// Off = baseline that keeps seed initialization but never replaces.
  bool replace = true;
  /// Invert the seed canvas under the text condition instead of unconditionally.
  bool conditional_inversion = false;

  /// Throws if anchors are off the subsequence or out of order, or if any
  /// scalar is outside its domain.
  void validate(const NoiseSchedule& schedule) const;
};

/// Builds anchors from positions along the subsequence, counted from the
/// clean end (position p maps to tau_p).
COWConfig config_from_positions(const NoiseSchedule& schedule, int t0_pos, int t1_pos, int t2_pos);

/// Standard setting on a 50-step chain: t1 = 25, t2 = 35, t0 = 20, 60 cycles,
/// guidance 7.5, eta 1 before and during cycles, 0 afterwards.
COWConfig standard_config(const NoiseSchedule& schedule);

enum class Phase { Chaos, SemanticFormation, QualityBoosting };

/// Chaos: (t2, T]; Semantic Formation: [t1, t2]; Quality Boosting: [0, t1).
Phase phase_of(int step, const COWConfig& config);
const char* phase_name(Phase phase);

/// Sampling-stage denoiser evaluations implied by the config:
/// S + cycles * (pos(t2) - pos(t1)).
long expected_denoiser_calls(const NoiseSchedule& schedule, const COWConfig& config);

Canvas compose_seed_canvas(const Canvas& condition_image, const RegionMask& mask,
                           const Shape& canvas_shape, double background_value);

VisualSeed seed_initialize(const Canvas& condition_image, const COWConfig& config,
                           const Denoiser& denoiser, const ConditionSpec& inversion_condition,
                           const NoiseSchedule& schedule, Trace* trace = nullptr);

/// Hard-pastes the seed trajectory crop at state.step into the mask region.
LatentState replace_region(const LatentState& state, const VisualSeed& seed);

/// Renoises t1 -> t2 in one jump.
LatentState destroy(const LatentState& state, const COWConfig& config,
                    const NoiseSchedule& schedule, RngStream& rng, Trace* trace = nullptr);

/// Observes every replacement with the states before and after it.
using ReplacementObserver =
    std::function<void(const std::string& stage, const LatentState& before, const LatentState& after)>;

/// Denoises t2 -> t1 with eta_cycle, replacing the region after each step.
LatentState construct(const LatentState& state, const VisualSeed& seed, const COWConfig& config,
                      const Denoiser& denoiser, const ConditionSpec& condition,
                      const NoiseSchedule& schedule, RngStream& rng, Trace* trace = nullptr,
                      const ReplacementObserver& observer = {});

struct CowResult {
  LatentState output;
  Trace trace;
};

/// Full pipeline: seed initialization, eta_pre descent to t1 with
/// replacement, `cycles` destroy/construct rounds, eta_post descent to t0,
/// replacement at t0, eta_post descent to 0.
CowResult cow_sample(const Canvas& condition_image, const ConditionSpec& text_condition,
                     const COWConfig& config, const Denoiser& denoiser,
                     const NoiseSchedule& schedule, RngStream& rng,
                     const ReplacementObserver& observer = {});

/// Same, reusing an existing seed (its mask overrides config.mask).
CowResult cow_sample(const VisualSeed& seed, const ConditionSpec& text_condition,
                     const COWConfig& config, const Denoiser& denoiser,
                     const NoiseSchedule& schedule, RngStream& rng,
                     const ReplacementObserver& observer = {});

}  // namespace cowdiff

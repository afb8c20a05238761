#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cowdiff/denoiser.hpp"
#include "cowdiff/rng.hpp"
#include "cowdiff/schedule.hpp"
#include "cowdiff/tensor.hpp"

namespace cowdiff {

/// A canvas tagged with its diffusion step (0 = clean data).
struct LatentState {
  Canvas data;
  int step = 0;

  friend bool operator==(const LatentState&, const LatentState&) = default;
};

/// One entry of a run trace. `call_index` is the running count of denoiser
/// evaluations made by sampling stages (1-based), or 0 for events that do not
/// evaluate the denoiser (renoising, replacement, inversion).
struct TraceRecord {
  std::string stage;
  int base_step = 0;
  double eta = 0.0;
  long call_index = 0;
};

class Trace {
 public:
  /// Records a sampling-stage denoiser evaluation and returns its index.
  long record_call(const std::string& stage, int base_step, double eta);
  /// Records an inversion-time evaluation; counted separately from sampling.
  void record_inversion(int base_step);
  void record_event(const std::string& stage, int base_step, double eta = 0.0);

  [[nodiscard]] const std::vector<TraceRecord>& records() const { return records_; }
  [[nodiscard]] long denoiser_calls() const { return calls_; }
  [[nodiscard]] long inversion_calls() const { return inversion_calls_; }
  [[nodiscard]] long calls_in_stage(const std::string& stage) const;

  /// CSV with header "stage,base_step,call_index".
  void write_csv(std::ostream& out) const;

 private:
  std::vector<TraceRecord> records_;
  long calls_ = 0;
  long inversion_calls_ = 0;
};

/// Single-jump forward noising from state.step to target_step:
/// sqrt(ab_t/ab_s) x_s + sqrt(1 - ab_t/ab_s) eps with one fresh canvas of draws.
LatentState forward_noise(const LatentState& state, int target_step, const NoiseSchedule& schedule,
                          RngStream& rng);

/// DDIM reverse update to prev_step using the given noise prediction. The
/// random term is only drawn when sigma > 0, so eta = 0 consumes nothing.
LatentState ddim_step(const LatentState& state, int prev_step, const Canvas& epsilon_hat,
                      double eta, const NoiseSchedule& schedule, RngStream& rng);

/// Euler step of the deterministic sampler's ODE towards higher noise.
LatentState invert_step(const LatentState& state, int next_step, const Canvas& epsilon_hat,
                        const NoiseSchedule& schedule);

/// Inverts clean data along the subsequence. Element i holds the state at
/// tau_{i+1}. Stops after `stop_step` when given (must be on the subsequence).
/// Noise predictions are taken at the current, less noisy state.
std::vector<LatentState> invert_trajectory(const LatentState& x0, const Denoiser& denoiser,
                                           const ConditionSpec& condition,
                                           const NoiseSchedule& schedule, int stop_step = -1,
                                           double guidance_scale = 1.0, Trace* trace = nullptr);

/// Called after every denoising step; may modify the state in place.
using StepHook = std::function<void(LatentState&)>;

struct DenoiseOptions {
  double eta = 0.0;
  double guidance_scale = 1.0;
  StepHook on_step;
  /// When set, guidance is only applied at steps for which it returns true;
  /// other steps evaluate the denoiser unconditionally.
  std::function<bool(int step)> guide_at;
  Trace* trace = nullptr;
  std::string stage = "sample";
};

/// Runs ddim_step across consecutive subsequence members from state.step
/// down to stop_step. Both ends must be on the subsequence (or 0).
LatentState denoise_range(LatentState state, int stop_step, const Denoiser& denoiser,
                          const ConditionSpec& condition, const NoiseSchedule& schedule,
                          RngStream& rng, const DenoiseOptions& options = {});

}  // namespace cowdiff

#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cowdiff {

/// Discrete variance-preserving noise schedule.
///
/// Step indices are 1-based for betas; `alpha_bar(0)` is the sentinel 1.0 so
/// that "denoise to step 0" needs no special case. All arithmetic is double
/// precision. Immutable after construction.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas, std::vector<int> subsequence);

  [[nodiscard]] int total_steps() const { return static_cast<int>(betas_.size()); }

  /// beta_t for t in [1, T].
  [[nodiscard]] double beta(int t) const;
  /// Cumulative product of (1 - beta_i) for i <= t; t in [0, T].
  [[nodiscard]] double alpha_bar(int t) const;

  [[nodiscard]] std::span<const double> betas() const { return betas_; }
  [[nodiscard]] std::span<const double> alpha_bars() const { return alpha_bars_; }

  /// Strictly increasing sampling steps tau_1 < ... < tau_S <= T.
  [[nodiscard]] std::span<const int> subsequence() const { return subsequence_; }
  [[nodiscard]] int subsequence_size() const { return static_cast<int>(subsequence_.size()); }
  [[nodiscard]] int top_step() const { return subsequence_.back(); }

  /// True for 0 or any subsequence member.
  [[nodiscard]] bool on_subsequence(int t) const;
  /// Position of t in the chain 0 = tau_0 < tau_1 < ... (0 for t = 0).
  [[nodiscard]] int position_of(int t) const;
  /// Inverse of position_of; position 0 maps to step 0.
  [[nodiscard]] int step_at_position(int position) const;
  /// Next lower chain member (tau_{i-1}) below an on-chain step t > 0.
  [[nodiscard]] int previous_step(int t) const;

  [[nodiscard]] bool valid_step(int t) const { return t >= 0 && t <= total_steps(); }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
  std::vector<int> subsequence_;
};

/// Linear betas from beta_start to beta_end inclusive; subsequence = all steps.
NoiseSchedule build_linear_schedule(int total_steps, double beta_start, double beta_end);
/// Betas linear in sqrt(beta) from beta_start to beta_end, then squared.
NoiseSchedule build_scaled_linear_schedule(int total_steps, double beta_start, double beta_end);

/// Copy of `schedule` with `count` uniformly strided steps ending at T.
NoiseSchedule make_subsequence(const NoiseSchedule& schedule, int count);

/// Named presets: "sd-linear" (T=1000, beta 1e-4..0.02), "sd-scaled-linear"
/// (T=1000, sqrt-linear 0.00085..0.012) and "toy-linear" (T=100, 1e-3..0.2).
NoiseSchedule schedule_preset(std::string_view name);
std::vector<std::string> schedule_preset_names();

/// DDIM stochasticity sigma for the pair t_prev < t.
double sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta);

/// Two-column text dump "t alpha_bar" for t = 0..T.
void dump_schedule(std::ostream& out, const NoiseSchedule& schedule);

}  // namespace cowdiff

#include "cowdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace cowdiff {

NoiseSchedule::NoiseSchedule(std::vector<double> betas, std::vector<int> subsequence)
    : betas_(std::move(betas)), subsequence_(std::move(subsequence)) {
  if (betas_.empty()) throw std::invalid_argument("NoiseSchedule: no steps");
  alpha_bars_.resize(betas_.size() + 1);
  alpha_bars_[0] = 1.0;
  for (std::size_t t = 1; t <= betas_.size(); ++t) {
    const double b = betas_[t - 1];
    if (!(b > 0.0 && b < 1.0)) {
      throw std::invalid_argument("NoiseSchedule: beta_" + std::to_string(t) + " = " +
                                  std::to_string(b) + " outside (0, 1)");
    }
    alpha_bars_[t] = alpha_bars_[t - 1] * (1.0 - b);
  }
  if (!(alpha_bars_.back() > 0.0)) {
    throw std::invalid_argument("NoiseSchedule: alpha_bar_T underflowed to zero");
  }
  if (subsequence_.empty()) throw std::invalid_argument("NoiseSchedule: empty subsequence");
  for (std::size_t i = 0; i < subsequence_.size(); ++i) {
    const int s = subsequence_[i];
    if (s <= 0 || s > total_steps()) {
      throw std::invalid_argument("NoiseSchedule: subsequence step " + std::to_string(s) +
                                  " outside (0, T]");
    }
    if (i > 0 && s <= subsequence_[i - 1]) {
      throw std::invalid_argument("NoiseSchedule: subsequence not strictly increasing");
    }
  }
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > total_steps()) throw std::out_of_range("beta: step " + std::to_string(t));
  return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (!valid_step(t)) throw std::out_of_range("alpha_bar: step " + std::to_string(t));
  return alpha_bars_[static_cast<std::size_t>(t)];
}

bool NoiseSchedule::on_subsequence(int t) const {
  return t == 0 || std::binary_search(subsequence_.begin(), subsequence_.end(), t);
}

int NoiseSchedule::position_of(int t) const {
  if (t == 0) return 0;
  auto it = std::lower_bound(subsequence_.begin(), subsequence_.end(), t);
  if (it == subsequence_.end() || *it != t) {
    throw std::invalid_argument("step " + std::to_string(t) + " is not on the subsequence");
  }
  return static_cast<int>(it - subsequence_.begin()) + 1;
}

int NoiseSchedule::step_at_position(int position) const {
  if (position < 0 || position > subsequence_size()) {
    throw std::out_of_range("subsequence position " + std::to_string(position) + " outside [0, " +
                            std::to_string(subsequence_size()) + "]");
  }
  return position == 0 ? 0 : subsequence_[static_cast<std::size_t>(position - 1)];
}

int NoiseSchedule::previous_step(int t) const {
  const int p = position_of(t);
  if (p == 0) throw std::invalid_argument("previous_step: already at step 0");
  return step_at_position(p - 1);
}

NoiseSchedule build_linear_schedule(int total_steps, double beta_start, double beta_end) {
  if (total_steps < 1) throw std::invalid_argument("build_linear_schedule: total_steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("build_linear_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(total_steps));
  for (int i = 0; i < total_steps; ++i) {
    const double frac = total_steps == 1 ? 0.0 : static_cast<double>(i) / (total_steps - 1);
    betas[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * frac;
  }
  std::vector<int> all(static_cast<std::size_t>(total_steps));
  for (int i = 0; i < total_steps; ++i) all[static_cast<std::size_t>(i)] = i + 1;
  return NoiseSchedule(std::move(betas), std::move(all));
}

NoiseSchedule build_scaled_linear_schedule(int total_steps, double beta_start, double beta_end) {
  const NoiseSchedule roots =
      build_linear_schedule(total_steps, std::sqrt(beta_start), std::sqrt(beta_end));
  std::vector<double> betas(roots.betas().begin(), roots.betas().end());
  for (double& b : betas) b *= b;
  std::vector<int> all(roots.subsequence().begin(), roots.subsequence().end());
  return NoiseSchedule(std::move(betas), std::move(all));
}

NoiseSchedule make_subsequence(const NoiseSchedule& schedule, int count) {
  const int T = schedule.total_steps();
  if (count < 1 || count > T) {
    throw std::invalid_argument("make_subsequence: count " + std::to_string(count) +
                                " outside [1, " + std::to_string(T) + "]");
  }
  std::vector<int> steps(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    // floor(i*T/count): strictly increasing because T >= count, last = T.
    steps[static_cast<std::size_t>(i - 1)] =
        static_cast<int>((static_cast<long long>(i) * T) / count);
  }
  return NoiseSchedule(std::vector<double>(schedule.betas().begin(), schedule.betas().end()),
                       std::move(steps));
}

NoiseSchedule schedule_preset(std::string_view name) {
  if (name == "sd-linear") return build_linear_schedule(1000, 1e-4, 0.02);
  if (name == "sd-scaled-linear") return build_scaled_linear_schedule(1000, 0.00085, 0.012);
  if (name == "toy-linear") return build_linear_schedule(100, 1e-3, 0.2);
  throw std::invalid_argument("unknown schedule preset '" + std::string(name) + "'");
}

std::vector<std::string> schedule_preset_names() { return {"sd-linear", "sd-scaled-linear", "toy-linear"}; }

double sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta) {
  if (t_prev >= t) {
    throw std::invalid_argument("sigma: need t_prev < t, got t=" + std::to_string(t) +
                                " t_prev=" + std::to_string(t_prev));
  }
  if (eta < 0.0) throw std::invalid_argument("sigma: eta must be >= 0");
  const double a_t = schedule.alpha_bar(t);
  const double a_prev = schedule.alpha_bar(t_prev);
  return eta * std::sqrt((1.0 - a_prev) / (1.0 - a_t)) * std::sqrt(1.0 - a_t / a_prev);
}

void dump_schedule(std::ostream& out, const NoiseSchedule& schedule) {
  out << "# t alpha_bar\n" << std::setprecision(17);
  for (int t = 0; t <= schedule.total_steps(); ++t) {
    out << t << ' ' << schedule.alpha_bar(t) << '\n';
  }
}

}  // namespace cowdiff

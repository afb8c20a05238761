#include "cowdiff/sampler.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cowdiff {

long Trace::record_call(const std::string& stage, int base_step, double eta) {
  ++calls_;
  records_.push_back({stage, base_step, eta, calls_});
  return calls_;
}

void Trace::record_inversion(int base_step) {
  ++inversion_calls_;
  records_.push_back({"invert", base_step, 0.0, 0});
}

void Trace::record_event(const std::string& stage, int base_step, double eta) {
  records_.push_back({stage, base_step, eta, 0});
}

long Trace::calls_in_stage(const std::string& stage) const {
  long n = 0;
  for (const auto& r : records_) {
    if (r.stage == stage && r.call_index > 0) ++n;
  }
  return n;
}

void Trace::write_csv(std::ostream& out) const {
  out << "stage,base_step,call_index\n";
  for (const auto& r : records_) out << r.stage << ',' << r.base_step << ',' << r.call_index << '\n';
}

namespace {

void require_step(const NoiseSchedule& schedule, int t, const char* what) {
  if (!schedule.valid_step(t)) {
    throw std::out_of_range(std::string(what) + ": step " + std::to_string(t) + " outside [0, " +
                            std::to_string(schedule.total_steps()) + "]");
  }
}

}  // namespace

LatentState forward_noise(const LatentState& state, int target_step, const NoiseSchedule& schedule,
                          RngStream& rng) {
  require_step(schedule, state.step, "forward_noise");
  require_step(schedule, target_step, "forward_noise");
  if (target_step <= state.step) {
    throw std::invalid_argument("forward_noise: target step " + std::to_string(target_step) +
                                " must exceed current step " + std::to_string(state.step));
  }
  const double ratio = schedule.alpha_bar(target_step) / schedule.alpha_bar(state.step);
  const double keep = std::sqrt(ratio);
  const double add = std::sqrt(1.0 - ratio);
  LatentState out{Canvas(state.data.shape()), target_step};
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = keep * state.data[i] + add * rng.gaussian();
  }
  return out;
}

LatentState ddim_step(const LatentState& state, int prev_step, const Canvas& epsilon_hat,
                      double eta, const NoiseSchedule& schedule, RngStream& rng) {
  require_step(schedule, state.step, "ddim_step");
  require_step(schedule, prev_step, "ddim_step");
  require_same_shape(state.data, epsilon_hat, "ddim_step");
  if (prev_step >= state.step) {
    throw std::invalid_argument("ddim_step: previous step " + std::to_string(prev_step) +
                                " must be below current step " + std::to_string(state.step));
  }
  const double a_t = schedule.alpha_bar(state.step);
  const double a_prev = schedule.alpha_bar(prev_step);
  const double sig = sigma(schedule, state.step, prev_step, eta);
  double dir2 = 1.0 - a_prev - sig * sig;
  if (dir2 < 0.0) {
    if (dir2 < -1e-12) {
      throw std::invalid_argument("ddim_step: eta " + std::to_string(eta) +
                                  " too large for steps " + std::to_string(state.step) + "->" +
                                  std::to_string(prev_step));
    }
    dir2 = 0.0;
  }
  const double sa_t = std::sqrt(a_t);
  const double sn_t = std::sqrt(1.0 - a_t);
  const double sa_prev = std::sqrt(a_prev);
  const double dir = std::sqrt(dir2);

  LatentState out{Canvas(state.data.shape()), prev_step};
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double x0_hat = (state.data[i] - sn_t * epsilon_hat[i]) / sa_t;
    out.data[i] = sa_prev * x0_hat + dir * epsilon_hat[i];
  }
  if (sig > 0.0) {
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += sig * rng.gaussian();
  }
  return out;
}

LatentState invert_step(const LatentState& state, int next_step, const Canvas& epsilon_hat,
                        const NoiseSchedule& schedule) {
  require_step(schedule, state.step, "invert_step");
  require_step(schedule, next_step, "invert_step");
  require_same_shape(state.data, epsilon_hat, "invert_step");
  if (next_step <= state.step) {
    throw std::invalid_argument("invert_step: next step " + std::to_string(next_step) +
                                " must exceed current step " + std::to_string(state.step));
  }
  const double a_t = schedule.alpha_bar(state.step);
  const double a_next = schedule.alpha_bar(next_step);
  if (!(a_t > 0.0) || !(a_next > 0.0)) {
    throw std::domain_error("invert_step: alpha_bar is zero");
  }
  const double sa_next = std::sqrt(a_next);
  const double inv_sa_t = 1.0 / std::sqrt(a_t);
  const double dsigma = std::sqrt((1.0 - a_next) / a_next) - std::sqrt((1.0 - a_t) / a_t);
  LatentState out{Canvas(state.data.shape()), next_step};
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = sa_next * (state.data[i] * inv_sa_t + epsilon_hat[i] * dsigma);
  }
  return out;
}

std::vector<LatentState> invert_trajectory(const LatentState& x0, const Denoiser& denoiser,
                                           const ConditionSpec& condition,
                                           const NoiseSchedule& schedule, int stop_step,
                                           double guidance_scale, Trace* trace) {
  if (x0.step != 0) throw std::invalid_argument("invert_trajectory: input must be at step 0");
  if (!x0.data.all_finite()) throw std::invalid_argument("invert_trajectory: non-finite input");
  const int last = stop_step < 0 ? schedule.top_step() : stop_step;
  if (!schedule.on_subsequence(last)) {
    throw std::invalid_argument("invert_trajectory: stop step " + std::to_string(last) +
                                " is not on the subsequence");
  }
  std::vector<LatentState> out;
  out.reserve(static_cast<std::size_t>(schedule.position_of(last)));
  LatentState cur = x0;
  for (int next : schedule.subsequence()) {
    if (next > last) break;
    const Canvas eps = guided_epsilon(denoiser, cur.data, cur.step, condition, guidance_scale);
    if (trace) trace->record_inversion(cur.step);
    cur = invert_step(cur, next, eps, schedule);
    out.push_back(cur);
  }
  return out;
}

LatentState denoise_range(LatentState state, int stop_step, const Denoiser& denoiser,
                          const ConditionSpec& condition, const NoiseSchedule& schedule,
                          RngStream& rng, const DenoiseOptions& options) {
  if (stop_step >= state.step) {
    throw std::invalid_argument("denoise_range: stop step " + std::to_string(stop_step) +
                                " must be below current step " + std::to_string(state.step));
  }
  if (!schedule.on_subsequence(state.step) || !schedule.on_subsequence(stop_step)) {
    throw std::invalid_argument("denoise_range: steps " + std::to_string(state.step) + " and " +
                                std::to_string(stop_step) + " must lie on the subsequence");
  }
  denoiser.require_label(condition);
  while (state.step > stop_step) {
    const int prev = schedule.previous_step(state.step);
    const bool guided = !options.guide_at || options.guide_at(state.step);
    const Canvas eps =
        guided ? guided_epsilon(denoiser, state.data, state.step, condition, options.guidance_scale)
               : denoiser.predict_noise(state.data, state.step, ConditionSpec::unconditional());
    if (options.trace) options.trace->record_call(options.stage, state.step, options.eta);
    state = ddim_step(state, prev, eps, options.eta, schedule, rng);
    if (options.on_step) options.on_step(state);
  }
  return state;
}

}  // namespace cowdiff

#include "cowdiff/denoiser.hpp"

#include <algorithm>
#include <stdexcept>

namespace cowdiff {

void Denoiser::require_label(const ConditionSpec& condition) const {
  if (!condition.is_conditional()) return;
  const auto known = labels();
  if (std::find(known.begin(), known.end(), *condition.label) == known.end()) {
    throw std::invalid_argument("condition label '" + *condition.label +
                                "' is not known to the denoiser");
  }
}

Canvas cfg_epsilon(const Denoiser& denoiser, const Canvas& x, int step,
                   const ConditionSpec& condition, double scale) {
  if (!condition.is_conditional()) {
    throw std::invalid_argument("cfg_epsilon: condition must be categorical");
  }
  denoiser.require_label(condition);
  if (scale == 1.0) return denoiser.predict_noise(x, step, condition);
  Canvas uncond = denoiser.predict_noise(x, step, ConditionSpec::unconditional());
  if (scale == 0.0) return uncond;
  const Canvas cond = denoiser.predict_noise(x, step, condition);
  for (std::size_t i = 0; i < uncond.size(); ++i) {
    uncond[i] = uncond[i] + scale * (cond[i] - uncond[i]);
  }
  return uncond;
}

Canvas guided_epsilon(const Denoiser& denoiser, const Canvas& x, int step,
                      const ConditionSpec& condition, double scale) {
  if (!condition.is_conditional()) return denoiser.predict_noise(x, step, condition);
  return cfg_epsilon(denoiser, x, step, condition, scale);
}

}  // namespace cowdiff

#pragma once

#include <memory>

#include "cowdiff/gaussian_mixture.hpp"
#include "cowdiff/schedule.hpp"
#include "cowdiff/tensor.hpp"

namespace cowdiff::testing {

inline Canvas scalar(double v) { return Canvas(Shape{1, 1, 1}, v); }

// Schedule whose alpha_bar is 1, 0.9, 0.81 at steps 0, 1, 2.
inline NoiseSchedule two_step_schedule() { return build_linear_schedule(2, 0.1, 0.1); }

inline std::shared_ptr<const GaussianMixtureModel> standard_normal_model() {
  return std::make_shared<const GaussianMixtureModel>(
      std::vector<MixtureComponent>{{1.0, MeanPattern::constant(0.0), 1.0, ""}});
}

inline std::shared_ptr<const GaussianMixtureModel> preset_model(const char* name) {
  return std::make_shared<const GaussianMixtureModel>(mixture_preset(name));
}

}  // namespace cowdiff::testing

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cowdiff/tensor.hpp"

namespace cowdiff {

/// Either unconditional, or a categorical label standing in for a text prompt.
struct ConditionSpec {
  std::optional<std::string> label;

  static ConditionSpec unconditional() { return {}; }
  static ConditionSpec categorical(std::string name) { return {std::move(name)}; }

  [[nodiscard]] bool is_conditional() const { return label.has_value(); }
  [[nodiscard]] std::string str() const { return label ? *label : std::string("<uncond>"); }

  friend bool operator==(const ConditionSpec&, const ConditionSpec&) = default;
};

/// Noise predictor eps(x, t, condition). Implementations are immutable after
/// construction and must be deterministic: identical inputs give bit-identical
/// outputs, and the output has the input's shape.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// `step` is a base-schedule index in [0, T].
  [[nodiscard]] virtual Canvas predict_noise(const Canvas& x, int step,
                                             const ConditionSpec& condition) const = 0;

  /// Labels accepted by categorical conditions.
  [[nodiscard]] virtual std::vector<std::string> labels() const = 0;

  /// Whether `shape` can be evaluated. Analytic models render their means at
  /// any resolution; trained networks are fixed to their training shape.
  [[nodiscard]] virtual bool accepts_shape(const Shape& shape) const = 0;

  void require_label(const ConditionSpec& condition) const;
};

/// Classifier-free guidance: eps_u + scale * (eps_c - eps_u). Scales 0 and 1
/// return the unconditional and conditional predictions untouched.
Canvas cfg_epsilon(const Denoiser& denoiser, const Canvas& x, int step,
                   const ConditionSpec& condition, double scale);

/// Guided prediction when `condition` is categorical, plain unconditional
/// prediction otherwise.
Canvas guided_epsilon(const Denoiser& denoiser, const Canvas& x, int step,
                      const ConditionSpec& condition, double scale);

}  // namespace cowdiff

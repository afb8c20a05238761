#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cowdiff/denoiser.hpp"
#include "cowdiff/rng.hpp"
#include "cowdiff/schedule.hpp"

namespace cowdiff {

/// Component mean, either an explicit tensor or a resolution-free primitive
/// rendered on demand at whatever shape is being evaluated.
class MeanPattern {
 public:
  enum class Kind { Values, Constant, HSplit, VSplit, HGradient, VGradient, Disk };

  static MeanPattern values(Canvas mean);
  static MeanPattern constant(double v);
  /// Top half `a`, bottom half `b`.
  static MeanPattern hsplit(double a, double b);
  /// Left half `a`, right half `b`.
  static MeanPattern vsplit(double a, double b);
  static MeanPattern hgradient(double left, double right);
  static MeanPattern vgradient(double top, double bottom);
  /// Centered disk of radius min(h, w)/3 holding `inside`.
  static MeanPattern disk(double inside, double outside);

  /// Parses "constant:0.5", "hsplit:0.8,-0.8", "values:0.1,0.2,..." etc.
  /// `values` requires `shape`.
  static MeanPattern parse(std::string_view text, const Shape* shape);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] bool resolution_free() const { return kind_ != Kind::Values; }
  [[nodiscard]] bool accepts(const Shape& shape) const;
  [[nodiscard]] Canvas render(const Shape& shape) const;
  [[nodiscard]] std::string str() const;
  [[nodiscard]] std::optional<Shape> explicit_shape() const;

 private:
  static MeanPattern from_params(Kind kind, double a, double b);

  Kind kind_ = Kind::Constant;
  double a_ = 0.0;
  double b_ = 0.0;
  Canvas explicit_;
};

struct MixtureComponent {
  double weight = 1.0;
  MeanPattern mean;
  double variance = 1.0;  // isotropic s^2
  std::string label;      // may be empty
};

/// Isotropic Gaussian mixture over canvases; the data distribution whose
/// optimal noise predictor is known in closed form.
class GaussianMixtureModel {
 public:
  explicit GaussianMixtureModel(std::vector<MixtureComponent> components);

  [[nodiscard]] const std::vector<MixtureComponent>& components() const { return components_; }
  [[nodiscard]] std::size_t size() const { return components_.size(); }
  /// Distinct non-empty labels in first-appearance order.
  [[nodiscard]] std::vector<std::string> labels() const;
  [[nodiscard]] bool accepts_shape(const Shape& shape) const;

  /// Indices of components consistent with the condition (all when
  /// unconditional). Throws for unknown labels.
  [[nodiscard]] std::vector<std::size_t> active_components(const ConditionSpec& condition) const;

  /// Posterior component probabilities of x_t given signal level alpha_bar,
  /// restricted to `active` and renormalized (log-sum-exp stabilized).
  [[nodiscard]] std::vector<double> responsibilities(const Canvas& x, double alpha_bar,
                                                     const std::vector<std::size_t>& active) const;

  /// Posterior mass of the components carrying `label`, for clean data.
  [[nodiscard]] double label_posterior(const Canvas& x0, const std::string& label) const;

  /// Draw x0 from the mixture (or from one fixed component).
  [[nodiscard]] Canvas sample(const Shape& shape, RngStream& rng) const;
  [[nodiscard]] Canvas sample_component(std::size_t k, const Shape& shape, RngStream& rng) const;
  /// Component whose mean is nearest in L2 (used for occupancy counts).
  [[nodiscard]] std::size_t nearest_component(const Canvas& x) const;

  [[nodiscard]] std::size_t index_of(const std::string& label) const;

 private:
  std::vector<MixtureComponent> components_;
};

/// Exact minimizer of the noise-prediction objective for mixture data:
/// (x - sqrt(ab) E[x0 | x_t]) / sqrt(1 - ab), evaluated per component as
/// sqrt(1 - ab) (x - sqrt(ab) mu_k) / (ab s_k^2 + 1 - ab) and mixed with the
/// posterior responsibilities.
Canvas analytic_epsilon(const GaussianMixtureModel& model, const Canvas& x, int step,
                        const NoiseSchedule& schedule, const ConditionSpec& condition);

class GaussianMixtureDenoiser final : public Denoiser {
 public:
  GaussianMixtureDenoiser(std::shared_ptr<const GaussianMixtureModel> model, NoiseSchedule schedule);

  [[nodiscard]] Canvas predict_noise(const Canvas& x, int step,
                                     const ConditionSpec& condition) const override;
  [[nodiscard]] std::vector<std::string> labels() const override { return model_->labels(); }
  [[nodiscard]] bool accepts_shape(const Shape& shape) const override {
    return model_->accepts_shape(shape);
  }

  [[nodiscard]] const GaussianMixtureModel& model() const { return *model_; }

 private:
  std::shared_ptr<const GaussianMixtureModel> model_;
  NoiseSchedule schedule_;
};

/// Plain-text mixture description:
///
///   # comment
///   shape 16 16 1                       (optional unless a mean uses values:)
///   component weight=0.5 variance=0.04 label=bright mean=constant:0.8
///
/// Weights must sum to 1.
GaussianMixtureModel parse_mixture(std::istream& in);
GaussianMixtureModel load_mixture(const std::string& path);
void write_mixture(std::ostream& out, const GaussianMixtureModel& model);

/// Built-in mixtures: "desk" (six patterned components used by the probe
/// experiments) and "bimodal" (two well-separated constant components).
GaussianMixtureModel mixture_preset(std::string_view name);

}  // namespace cowdiff

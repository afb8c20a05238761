#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cowdiff/denoiser.hpp"
#include "cowdiff/schedule.hpp"

namespace cowdiff {

struct LabeledImage {
  Canvas image;
  std::string label;  // empty = unlabeled
};

struct TrainingBudget {
  int epochs = 300;
  int batch_size = 64;
  /// Optimizer steps per epoch; 0 means ceil(dataset / batch_size).
  int steps_per_epoch = 0;
  double learning_rate = 2e-3;
  int hidden = 128;
  int time_features = 16;
  /// Fraction of samples trained with the null label so guidance has an
  /// unconditional branch.
  double cond_dropout = 0.2;
  std::uint64_t seed = 0;
};

/// Two-hidden-layer SiLU MLP over [pixels, time features, label one-hot]
/// predicting the injected noise. Fixed to one canvas shape.
class TinyDenoiser final : public Denoiser {
 public:
  TinyDenoiser(Shape shape, std::vector<std::string> labels, int total_steps, int hidden,
               int time_features, std::uint64_t init_seed);

  [[nodiscard]] Canvas predict_noise(const Canvas& x, int step,
                                     const ConditionSpec& condition) const override;
  [[nodiscard]] std::vector<std::string> labels() const override { return labels_; }
  [[nodiscard]] bool accepts_shape(const Shape& shape) const override { return shape == shape_; }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] int total_steps() const { return total_steps_; }
  [[nodiscard]] std::size_t parameter_count() const;

  /// Versioned little-endian binary format:
  ///   "CWDN" u32 version=1
  ///   u32 height width channels hidden time_features total_steps n_labels
  ///   n_labels x (u32 length, bytes)
  ///   f32 parameters: W1 b1 W2 b2 W3 b3 (column-major)
  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static std::shared_ptr<TinyDenoiser> load(std::istream& in);
  static std::shared_ptr<TinyDenoiser> load(const std::string& path);

  friend bool operator==(const TinyDenoiser& a, const TinyDenoiser& b);

 private:
  friend struct TinyTrainer;

  [[nodiscard]] int input_size() const;
  [[nodiscard]] int label_slot(const ConditionSpec& condition) const;
  void write_features(Eigen::Ref<Eigen::VectorXf> column, const Canvas& x, int step,
                      int label_slot) const;

  Shape shape_;
  std::vector<std::string> labels_;
  int total_steps_;
  int hidden_;
  int time_features_;
  Eigen::MatrixXf w1_, w2_, w3_;
  Eigen::VectorXf b1_, b2_, b3_;
};

struct TrainResult {
  std::shared_ptr<TinyDenoiser> model;
  std::vector<double> epoch_loss;
};

/// Trains with the standard noise-prediction objective: t uniform on [1, T],
/// x_t = sqrt(ab) x0 + sqrt(1 - ab) eps, loss |eps_hat - eps|^2, Adam with
/// cosine learning-rate decay. Deterministic for a fixed budget.seed.
TrainResult train_tiny_denoiser(const std::vector<LabeledImage>& dataset,
                                const NoiseSchedule& schedule, const TrainingBudget& budget);

/// Two-class toy set: "top" (bright upper half) and "left" (bright left half)
/// with per-sample amplitude jitter and pixel noise.
std::vector<LabeledImage> make_toy_dataset(const Shape& shape, int per_class, std::uint64_t seed);

/// Per-pixel average of the dataset images.
Canvas dataset_mean(const std::vector<LabeledImage>& dataset);

}  // namespace cowdiff

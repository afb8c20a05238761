#include "cowdiff/tiny_denoiser.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "cowdiff/rng.hpp"

namespace cowdiff {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'W', 'D', 'N'};
constexpr std::uint32_t kVersion = 1;

float silu(float z) { return z / (1.0f + std::exp(-z)); }

float silu_grad(float z) {
  const float s = 1.0f / (1.0f + std::exp(-z));
  return s * (1.0f + z * (1.0f - s));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("model file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_floats(std::ostream& out, const float* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) put_u32(out, std::bit_cast<std::uint32_t>(data[i]));
}

void get_floats(std::istream& in, float* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    data[i] = std::bit_cast<float>(get_u32(in));
    if (!std::isfinite(data[i])) throw std::runtime_error("model file has non-finite weights");
  }
}

void fill_gaussian(Eigen::MatrixXf& m, RngStream& rng, double scale) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = static_cast<float>(scale * rng.gaussian());
    }
  }
}

}  // namespace

TinyDenoiser::TinyDenoiser(Shape shape, std::vector<std::string> labels, int total_steps,
                           int hidden, int time_features, std::uint64_t init_seed)
    : shape_(shape),
      labels_(std::move(labels)),
      total_steps_(total_steps),
      hidden_(hidden),
      time_features_(time_features) {
  if (!shape_.valid()) throw std::invalid_argument("TinyDenoiser: invalid shape");
  if (total_steps_ < 1 || hidden_ < 1 || time_features_ < 2 || time_features_ % 2 != 0) {
    throw std::invalid_argument("TinyDenoiser: invalid architecture parameters");
  }
  const int d = static_cast<int>(shape_.size());
  const int in = input_size();
  RngStream rng = RngStream::derive(init_seed, "tiny-init");
  w1_.resize(hidden_, in);
  w2_.resize(hidden_, hidden_);
  w3_.resize(d, hidden_);
  fill_gaussian(w1_, rng, std::sqrt(2.0 / in));
  fill_gaussian(w2_, rng, std::sqrt(2.0 / hidden_));
  fill_gaussian(w3_, rng, 0.1 * std::sqrt(1.0 / hidden_));
  b1_ = Eigen::VectorXf::Zero(hidden_);
  b2_ = Eigen::VectorXf::Zero(hidden_);
  b3_ = Eigen::VectorXf::Zero(d);
}

int TinyDenoiser::input_size() const {
  return static_cast<int>(shape_.size()) + time_features_ + static_cast<int>(labels_.size()) + 1;
}

std::size_t TinyDenoiser::parameter_count() const {
  return static_cast<std::size_t>(w1_.size() + w2_.size() + w3_.size() + b1_.size() + b2_.size() +
                                  b3_.size());
}

int TinyDenoiser::label_slot(const ConditionSpec& condition) const {
  if (!condition.is_conditional()) return static_cast<int>(labels_.size());
  const auto it = std::find(labels_.begin(), labels_.end(), *condition.label);
  if (it == labels_.end()) {
    throw std::invalid_argument("condition label '" + *condition.label +
                                "' is not known to the denoiser");
  }
  return static_cast<int>(it - labels_.begin());
}

void TinyDenoiser::write_features(Eigen::Ref<Eigen::VectorXf> column, const Canvas& x, int step,
                                  int slot) const {
  const int d = static_cast<int>(shape_.size());
  for (int i = 0; i < d; ++i) column[i] = static_cast<float>(x[static_cast<std::size_t>(i)]);
  const double s = static_cast<double>(step) / total_steps_;
  const int half = time_features_ / 2;
  for (int k = 0; k < half; ++k) {
    // Geometric frequencies from 1 to 200 over the normalized step.
    const double freq = half == 1 ? 1.0 : std::pow(200.0, static_cast<double>(k) / (half - 1));
    column[d + 2 * k] = static_cast<float>(std::sin(freq * s));
    column[d + 2 * k + 1] = static_cast<float>(std::cos(freq * s));
  }
  const int base = d + time_features_;
  for (int j = 0; j <= static_cast<int>(labels_.size()); ++j) column[base + j] = j == slot ? 1.0f : 0.0f;
}

Canvas TinyDenoiser::predict_noise(const Canvas& x, int step, const ConditionSpec& condition) const {
  if (x.shape() != shape_) {
    throw std::invalid_argument("TinyDenoiser: input shape " + x.shape().str() +
                                " differs from model shape " + shape_.str());
  }
  if (step < 0 || step > total_steps_) {
    throw std::out_of_range("TinyDenoiser: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total_steps_) + "]");
  }
  Eigen::VectorXf in(input_size());
  write_features(in, x, step, label_slot(condition));
  const Eigen::VectorXf a1 = (w1_ * in + b1_).unaryExpr(&silu);
  const Eigen::VectorXf a2 = (w2_ * a1 + b2_).unaryExpr(&silu);
  const Eigen::VectorXf y = w3_ * a2 + b3_;
  Canvas out(shape_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(y[static_cast<Eigen::Index>(i)]);
  return out;
}

void TinyDenoiser::save(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  for (int v : {shape_.height, shape_.width, shape_.channels, hidden_, time_features_, total_steps_}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_u32(out, static_cast<std::uint32_t>(labels_.size()));
  for (const auto& l : labels_) {
    put_u32(out, static_cast<std::uint32_t>(l.size()));
    out.write(l.data(), static_cast<std::streamsize>(l.size()));
  }
  put_floats(out, w1_.data(), w1_.size());
  put_floats(out, b1_.data(), b1_.size());
  put_floats(out, w2_.data(), w2_.size());
  put_floats(out, b2_.data(), b2_.size());
  put_floats(out, w3_.data(), w3_.size());
  put_floats(out, b3_.data(), b3_.size());
  if (!out) throw std::runtime_error("failed writing model");
}

void TinyDenoiser::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  save(out);
}

std::shared_ptr<TinyDenoiser> TinyDenoiser::load(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a tiny denoiser model file");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("unsupported model version " + std::to_string(version));
  }
  std::array<int, 6> dims{};
  for (int& v : dims) {
    const std::uint32_t u = get_u32(in);
    if (u == 0 || u > (1u << 20)) throw std::runtime_error("model header has invalid dimension");
    v = static_cast<int>(u);
  }
  const std::uint32_t n_labels = get_u32(in);
  if (n_labels > 4096) throw std::runtime_error("model header has too many labels");
  std::vector<std::string> labels(n_labels);
  for (auto& l : labels) {
    const std::uint32_t len = get_u32(in);
    if (len > 4096) throw std::runtime_error("model label too long");
    l.resize(len);
    in.read(l.data(), len);
    if (!in) throw std::runtime_error("model file truncated");
  }
  auto model = std::make_shared<TinyDenoiser>(Shape{dims[0], dims[1], dims[2]}, std::move(labels),
                                              dims[5], dims[3], dims[4], 0);
  get_floats(in, model->w1_.data(), model->w1_.size());
  get_floats(in, model->b1_.data(), model->b1_.size());
  get_floats(in, model->w2_.data(), model->w2_.size());
  get_floats(in, model->b2_.data(), model->b2_.size());
  get_floats(in, model->w3_.data(), model->w3_.size());
  get_floats(in, model->b3_.data(), model->b3_.size());
  return model;
}

std::shared_ptr<TinyDenoiser> TinyDenoiser::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  return load(in);
}

bool operator==(const TinyDenoiser& a, const TinyDenoiser& b) {
  return a.shape_ == b.shape_ && a.labels_ == b.labels_ && a.total_steps_ == b.total_steps_ &&
         a.hidden_ == b.hidden_ && a.time_features_ == b.time_features_ && a.w1_ == b.w1_ &&
         a.w2_ == b.w2_ && a.w3_ == b.w3_ && a.b1_ == b.b1_ && a.b2_ == b.b2_ && a.b3_ == b.b3_;
}

// ---------------------------------------------------------------------------
// Training

struct TinyTrainer {
  struct Moments {
    Eigen::MatrixXf m, v;
    explicit Moments(const Eigen::MatrixXf& like)
        : m(Eigen::MatrixXf::Zero(like.rows(), like.cols())),
          v(Eigen::MatrixXf::Zero(like.rows(), like.cols())) {}
  };

  TinyDenoiser& net;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  // Parameters in order W1 b1 W2 b2 W3 b3, biases viewed as one-column matrices.
  std::vector<Moments> moments;

  explicit TinyTrainer(TinyDenoiser& n) : net(n) {
    moments.emplace_back(n.w1_);
    moments.emplace_back(Eigen::MatrixXf(n.b1_));
    moments.emplace_back(n.w2_);
    moments.emplace_back(Eigen::MatrixXf(n.b2_));
    moments.emplace_back(n.w3_);
    moments.emplace_back(Eigen::MatrixXf(n.b3_));
  }

  [[nodiscard]] int input_size() const { return net.input_size(); }
  void write_features(Eigen::Ref<Eigen::VectorXf> column, const Canvas& x, int t, int slot) const {
    net.write_features(column, x, t, slot);
  }

  template <typename Param>
  void adam(Param& p, const Eigen::MatrixXf& g, Moments& mo, float lr) {
    const auto b1 = static_cast<float>(beta1);
    const auto b2 = static_cast<float>(beta2);
    mo.m = b1 * mo.m + (1.0f - b1) * g;
    mo.v = b2 * mo.v + (1.0f - b2) * g.cwiseProduct(g);
    const float c1 = static_cast<float>(1.0 - std::pow(beta1, step));
    const float c2 = static_cast<float>(1.0 - std::pow(beta2, step));
    const Eigen::MatrixXf upd =
        (mo.m / c1).array() / ((mo.v / c2).array().sqrt() + static_cast<float>(epsilon));
    p -= lr * upd;
  }

  /// One optimizer step on a batch; returns the batch loss.
  double train_batch(const Eigen::MatrixXf& x, const Eigen::MatrixXf& target, float lr) {
    const Eigen::MatrixXf z1 = (net.w1_ * x).colwise() + net.b1_;
    const Eigen::MatrixXf a1 = z1.unaryExpr(&silu);
    const Eigen::MatrixXf z2 = (net.w2_ * a1).colwise() + net.b2_;
    const Eigen::MatrixXf a2 = z2.unaryExpr(&silu);
    const Eigen::MatrixXf y = (net.w3_ * a2).colwise() + net.b3_;

    const Eigen::MatrixXf diff = y - target;
    const double denom = static_cast<double>(diff.size());
    const double loss = static_cast<double>(diff.squaredNorm()) / denom;
    const Eigen::MatrixXf gy = diff * static_cast<float>(2.0 / denom);

    const Eigen::MatrixXf gw3 = gy * a2.transpose();
    const Eigen::MatrixXf gb3 = gy.rowwise().sum();
    const Eigen::MatrixXf gz2 = (net.w3_.transpose() * gy).cwiseProduct(z2.unaryExpr(&silu_grad));
    const Eigen::MatrixXf gw2 = gz2 * a1.transpose();
    const Eigen::MatrixXf gb2 = gz2.rowwise().sum();
    const Eigen::MatrixXf gz1 = (net.w2_.transpose() * gz2).cwiseProduct(z1.unaryExpr(&silu_grad));
    const Eigen::MatrixXf gw1 = gz1 * x.transpose();
    const Eigen::MatrixXf gb1 = gz1.rowwise().sum();

    // Global-norm clipping at 1.
    const double norm = std::sqrt(gw1.squaredNorm() + gb1.squaredNorm() + gw2.squaredNorm() +
                                  gb2.squaredNorm() + gw3.squaredNorm() + gb3.squaredNorm());
    const float clip = norm > 1.0 ? static_cast<float>(1.0 / norm) : 1.0f;

    ++step;
    adam(net.w1_, gw1 * clip, moments[0], lr);
    adam(net.b1_, gb1 * clip, moments[1], lr);
    adam(net.w2_, gw2 * clip, moments[2], lr);
    adam(net.b2_, gb2 * clip, moments[3], lr);
    adam(net.w3_, gw3 * clip, moments[4], lr);
    adam(net.b3_, gb3 * clip, moments[5], lr);
    return loss;
  }
};

TrainResult train_tiny_denoiser(const std::vector<LabeledImage>& dataset,
                                const NoiseSchedule& schedule, const TrainingBudget& budget) {
  if (dataset.empty()) throw std::invalid_argument("train_tiny_denoiser: dataset is empty");
  const Shape shape = dataset.front().image.shape();
  std::vector<std::string> labels;
  for (const auto& s : dataset) {
    if (s.image.shape() != shape) {
      throw std::invalid_argument("train_tiny_denoiser: sample shape " + s.image.shape().str() +
                                  " differs from " + shape.str());
    }
    if (!s.image.all_finite()) throw std::invalid_argument("train_tiny_denoiser: non-finite sample");
    if (!s.label.empty() && std::find(labels.begin(), labels.end(), s.label) == labels.end()) {
      labels.push_back(s.label);
    }
  }
  if (budget.epochs < 0 || budget.batch_size < 1 || budget.steps_per_epoch < 0 ||
      !(budget.learning_rate > 0.0) || budget.cond_dropout < 0.0 || budget.cond_dropout > 1.0) {
    throw std::invalid_argument("train_tiny_denoiser: invalid training budget");
  }

  TrainResult result;
  result.model = std::make_shared<TinyDenoiser>(shape, labels, schedule.total_steps(),
                                                budget.hidden, budget.time_features, budget.seed);
  if (budget.epochs == 0) return result;

  TinyDenoiser& net = *result.model;
  TinyTrainer trainer(net);
  RngStream rng = RngStream::derive(budget.seed, "tiny-train");
  const int n = static_cast<int>(dataset.size());
  const int steps_per_epoch =
      budget.steps_per_epoch > 0 ? budget.steps_per_epoch : (n + budget.batch_size - 1) / budget.batch_size;
  const long total_iters = static_cast<long>(steps_per_epoch) * budget.epochs;
  const int d = static_cast<int>(shape.size());
  const int null_slot = static_cast<int>(labels.size());

  Eigen::MatrixXf x(trainer.input_size(), budget.batch_size);
  Eigen::MatrixXf target(d, budget.batch_size);
  Canvas noisy(shape);
  long iter = 0;
  for (int epoch = 0; epoch < budget.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s, ++iter) {
      for (int b = 0; b < budget.batch_size; ++b) {
        const auto& sample = dataset[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
        const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.total_steps())));
        const double ab = schedule.alpha_bar(t);
        const double sa = std::sqrt(ab);
        const double sn = std::sqrt(1.0 - ab);
        for (int i = 0; i < d; ++i) {
          const double eps = rng.gaussian();
          noisy[static_cast<std::size_t>(i)] = sa * sample.image[static_cast<std::size_t>(i)] + sn * eps;
          target(i, b) = static_cast<float>(eps);
        }
        int slot = null_slot;
        if (!sample.label.empty() && rng.uniform() >= budget.cond_dropout) {
          slot = static_cast<int>(std::find(labels.begin(), labels.end(), sample.label) - labels.begin());
        }
        trainer.write_features(x.col(b), noisy, t, slot);
      }
      const double progress = total_iters > 1 ? static_cast<double>(iter) / (total_iters - 1) : 0.0;
      const double lr = budget.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
      epoch_loss += trainer.train_batch(x, target, static_cast<float>(lr));
    }
    result.epoch_loss.push_back(epoch_loss / steps_per_epoch);
  }
  return result;
}

std::vector<LabeledImage> make_toy_dataset(const Shape& shape, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw std::invalid_argument("make_toy_dataset: per_class must be >= 1");
  RngStream rng = RngStream::derive(seed, "toy-dataset");
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(2 * per_class));
  for (int i = 0; i < per_class; ++i) {
    for (int cls = 0; cls < 2; ++cls) {
      const double amp = 0.6 + 0.3 * rng.uniform();
      Canvas img(shape);
      for (int r = 0; r < shape.height; ++r) {
        for (int c = 0; c < shape.width; ++c) {
          const bool bright = cls == 0 ? (2 * r < shape.height) : (2 * c < shape.width);
          for (int ch = 0; ch < shape.channels; ++ch) {
            img.at(r, c, ch) = (bright ? amp : -amp) + 0.05 * rng.gaussian();
          }
        }
      }
      out.push_back({std::move(img), cls == 0 ? "top" : "left"});
    }
  }
  return out;
}

Canvas dataset_mean(const std::vector<LabeledImage>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("dataset_mean: empty dataset");
  Canvas mean(dataset.front().image.shape(), 0.0);
  for (const auto& s : dataset) {
    require_same_shape(mean, s.image, "dataset_mean");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s.image[i];
  }
  for (double& v : mean.values()) v /= static_cast<double>(dataset.size());
  return mean;
}

}  // namespace cowdiff

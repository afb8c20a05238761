#include "cowdiff/gaussian_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>

#include "cowdiff/text_util.hpp"

namespace cowdiff {

// ---------------------------------------------------------------------------
// MeanPattern

MeanPattern MeanPattern::values(Canvas mean) {
  if (!mean.all_finite()) throw std::invalid_argument("mixture mean has non-finite entries");
  MeanPattern p;
  p.kind_ = Kind::Values;
  p.explicit_ = std::move(mean);
  return p;
}

MeanPattern MeanPattern::constant(double v) { return from_params(Kind::Constant, v, v); }
MeanPattern MeanPattern::hsplit(double a, double b) { return from_params(Kind::HSplit, a, b); }
MeanPattern MeanPattern::vsplit(double a, double b) { return from_params(Kind::VSplit, a, b); }
MeanPattern MeanPattern::hgradient(double l, double r) { return from_params(Kind::HGradient, l, r); }
MeanPattern MeanPattern::vgradient(double t, double b) { return from_params(Kind::VGradient, t, b); }
MeanPattern MeanPattern::disk(double in, double out) { return from_params(Kind::Disk, in, out); }

MeanPattern MeanPattern::from_params(Kind kind, double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("mixture mean pattern has non-finite parameters");
  }
  MeanPattern p;
  p.kind_ = kind;
  p.a_ = a;
  p.b_ = b;
  return p;
}

std::optional<Shape> MeanPattern::explicit_shape() const {
  if (kind_ != Kind::Values) return std::nullopt;
  return explicit_.shape();
}

namespace {

struct PatternName {
  MeanPattern::Kind kind;
  const char* name;
  int arity;
};

constexpr PatternName kPatternNames[] = {
    {MeanPattern::Kind::Constant, "constant", 1},   {MeanPattern::Kind::HSplit, "hsplit", 2},
    {MeanPattern::Kind::VSplit, "vsplit", 2},       {MeanPattern::Kind::HGradient, "hgradient", 2},
    {MeanPattern::Kind::VGradient, "vgradient", 2}, {MeanPattern::Kind::Disk, "disk", 2},
};

}  // namespace

MeanPattern MeanPattern::parse(std::string_view text, const Shape* shape) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("mean pattern '" + std::string(text) + "' lacks ':'");
  }
  const std::string_view name = text.substr(0, colon);
  const std::vector<double> args = parse_double_list(text.substr(colon + 1));
  if (name == "values") {
    if (shape == nullptr) throw std::invalid_argument("values: mean requires a 'shape' line");
    return values(Canvas(*shape, args));
  }
  for (const auto& pn : kPatternNames) {
    if (name == pn.name) {
      if (static_cast<int>(args.size()) != pn.arity) {
        throw std::invalid_argument("mean pattern '" + std::string(name) + "' takes " +
                                    std::to_string(pn.arity) + " value(s)");
      }
      return from_params(pn.kind, args[0], pn.arity == 2 ? args[1] : args[0]);
    }
  }
  throw std::invalid_argument("unknown mean pattern '" + std::string(name) + "'");
}

bool MeanPattern::accepts(const Shape& shape) const {
  return resolution_free() || explicit_.shape() == shape;
}

Canvas MeanPattern::render(const Shape& shape) const {
  if (kind_ == Kind::Values) {
    if (explicit_.shape() != shape) {
      throw std::invalid_argument("mixture mean has shape " + explicit_.shape().str() +
                                  ", input has " + shape.str());
    }
    return explicit_;
  }
  Canvas out(shape);
  const int h = shape.height;
  const int w = shape.width;
  const double cy = 0.5 * (h - 1);
  const double cx = 0.5 * (w - 1);
  const double radius = std::min(h, w) / 3.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double v = a_;
      switch (kind_) {
        case Kind::Constant:
          break;
        case Kind::HSplit:
          v = (2 * r < h) ? a_ : b_;
          break;
        case Kind::VSplit:
          v = (2 * c < w) ? a_ : b_;
          break;
        case Kind::HGradient:
          v = w == 1 ? a_ : a_ + (b_ - a_) * c / (w - 1);
          break;
        case Kind::VGradient:
          v = h == 1 ? a_ : a_ + (b_ - a_) * r / (h - 1);
          break;
        case Kind::Disk: {
          const double dy = r - cy;
          const double dx = c - cx;
          v = (dy * dy + dx * dx <= radius * radius) ? a_ : b_;
          break;
        }
        case Kind::Values:
          break;
      }
      for (int ch = 0; ch < shape.channels; ++ch) out.at(r, c, ch) = v;
    }
  }
  return out;
}

std::string MeanPattern::str() const {
  if (kind_ == Kind::Values) {
    std::string s = "values:";
    for (std::size_t i = 0; i < explicit_.size(); ++i) {
      if (i) s += ',';
      s += format_double(explicit_[i]);
    }
    return s;
  }
  for (const auto& pn : kPatternNames) {
    if (pn.kind == kind_) {
      std::string s = std::string(pn.name) + ':' + format_double(a_);
      if (pn.arity == 2) s += ',' + format_double(b_);
      return s;
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------
// GaussianMixtureModel

GaussianMixtureModel::GaussianMixtureModel(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture has no components");
  double total = 0.0;
  std::optional<Shape> fixed;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("mixture weights must be positive");
    if (!(c.variance > 0.0) || !std::isfinite(c.variance)) {
      throw std::invalid_argument("mixture variances must be positive and finite");
    }
    if (c.label.find_first_of(" \t\n=#,") != std::string::npos) {
      throw std::invalid_argument("mixture label '" + c.label + "' contains reserved characters");
    }
    total += c.weight;
    if (auto s = c.mean.explicit_shape()) {
      if (fixed && *fixed != *s) throw std::invalid_argument("explicit mixture means differ in shape");
      fixed = s;
    }
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture weights sum to " + format_double(total) + ", not 1");
  }
}

std::vector<std::string> GaussianMixtureModel::labels() const {
  std::vector<std::string> out;
  for (const auto& c : components_) {
    if (!c.label.empty() && std::find(out.begin(), out.end(), c.label) == out.end()) {
      out.push_back(c.label);
    }
  }
  return out;
}

bool GaussianMixtureModel::accepts_shape(const Shape& shape) const {
  return std::all_of(components_.begin(), components_.end(),
                     [&](const MixtureComponent& c) { return c.mean.accepts(shape); });
}

std::vector<std::size_t> GaussianMixtureModel::active_components(
    const ConditionSpec& condition) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (!condition.is_conditional() || components_[k].label == *condition.label) out.push_back(k);
  }
  if (out.empty()) {
    throw std::invalid_argument("condition label '" + condition.str() +
                                "' matches no mixture component");
  }
  return out;
}

std::vector<double> GaussianMixtureModel::responsibilities(
    const Canvas& x, double alpha_bar, const std::vector<std::size_t>& active) const {
  const double sa = std::sqrt(alpha_bar);
  const double dim = static_cast<double>(x.size());
  std::vector<double> logp(active.size());
  for (std::size_t j = 0; j < active.size(); ++j) {
    const auto& comp = components_[active[j]];
    const Canvas mu = comp.mean.render(x.shape());
    const double v = alpha_bar * comp.variance + (1.0 - alpha_bar);
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - sa * mu[i];
      d2 += d * d;
    }
    logp[j] = std::log(comp.weight) - 0.5 * dim * std::log(v) - 0.5 * d2 / v;
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (double& l : logp) {
    l = std::exp(l - mx);
    z += l;
  }
  for (double& l : logp) l /= z;
  return logp;
}

double GaussianMixtureModel::label_posterior(const Canvas& x0, const std::string& label) const {
  const auto all = active_components(ConditionSpec::unconditional());
  const auto r = responsibilities(x0, 1.0, all);
  double mass = 0.0;
  bool found = false;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (components_[k].label == label) {
      mass += r[k];
      found = true;
    }
  }
  if (!found) throw std::invalid_argument("label '" + label + "' matches no mixture component");
  return std::clamp(mass, 0.0, 1.0);
}

Canvas GaussianMixtureModel::sample(const Shape& shape, RngStream& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t k = components_.size() - 1;
  for (std::size_t j = 0; j < components_.size(); ++j) {
    acc += components_[j].weight;
    if (u < acc) {
      k = j;
      break;
    }
  }
  return sample_component(k, shape, rng);
}

Canvas GaussianMixtureModel::sample_component(std::size_t k, const Shape& shape,
                                              RngStream& rng) const {
  const auto& comp = components_.at(k);
  Canvas x = comp.mean.render(shape);
  const double s = std::sqrt(comp.variance);
  for (double& v : x.values()) v += s * rng.gaussian();
  return x;
}

std::size_t GaussianMixtureModel::nearest_component(const Canvas& x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const Canvas mu = components_[k].mean.render(x.shape());
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - mu[i]) * (x[i] - mu[i]);
    if (d2 < best_d) {
      best_d = d2;
      best = k;
    }
  }
  return best;
}

std::size_t GaussianMixtureModel::index_of(const std::string& label) const {
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (components_[k].label == label) return k;
  }
  throw std::invalid_argument("label '" + label + "' matches no mixture component");
}

// ---------------------------------------------------------------------------

Canvas analytic_epsilon(const GaussianMixtureModel& model, const Canvas& x, int step,
                        const NoiseSchedule& schedule, const ConditionSpec& condition) {
  if (!schedule.valid_step(step)) {
    throw std::out_of_range("analytic_epsilon: step " + std::to_string(step) +
                            " outside schedule [0, " + std::to_string(schedule.total_steps()) + "]");
  }
  if (!x.all_finite()) throw std::invalid_argument("analytic_epsilon: non-finite input");
  const auto active = model.active_components(condition);
  const double ab = schedule.alpha_bar(step);
  const double sa = std::sqrt(ab);
  const double sn = std::sqrt(1.0 - ab);
  const auto resp = model.responsibilities(x, ab, active);

  Canvas eps(x.shape(), 0.0);
  for (std::size_t j = 0; j < active.size(); ++j) {
    if (resp[j] == 0.0) continue;
    const auto& comp = model.components()[active[j]];
    const Canvas mu = comp.mean.render(x.shape());
    const double v = ab * comp.variance + (1.0 - ab);
    const double coeff = resp[j] * sn / v;
    for (std::size_t i = 0; i < x.size(); ++i) eps[i] += coeff * (x[i] - sa * mu[i]);
  }
  return eps;
}

GaussianMixtureDenoiser::GaussianMixtureDenoiser(std::shared_ptr<const GaussianMixtureModel> model,
                                                 NoiseSchedule schedule)
    : model_(std::move(model)), schedule_(std::move(schedule)) {
  if (!model_) throw std::invalid_argument("GaussianMixtureDenoiser: null model");
}

Canvas GaussianMixtureDenoiser::predict_noise(const Canvas& x, int step,
                                              const ConditionSpec& condition) const {
  return analytic_epsilon(*model_, x, step, schedule_, condition);
}

// ---------------------------------------------------------------------------
// Text format

GaussianMixtureModel parse_mixture(std::istream& in) {
  std::optional<Shape> shape;
  std::vector<MixtureComponent> comps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tokens = split_ws(strip_comment(line));
    if (tokens.empty()) continue;
    const auto where = [&] { return "mixture line " + std::to_string(lineno) + ": "; };
    if (tokens[0] == "shape") {
      if (tokens.size() != 4) throw std::invalid_argument(where() + "shape needs H W C");
      shape = Shape{parse_int(tokens[1]), parse_int(tokens[2]), parse_int(tokens[3])};
      if (!shape->valid()) throw std::invalid_argument(where() + "invalid shape");
    } else if (tokens[0] == "component") {
      MixtureComponent c;
      bool has_mean = false;
      bool has_weight = false;
      bool has_var = false;
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const auto eq = tokens[i].find('=');
        if (eq == std::string::npos) throw std::invalid_argument(where() + "expected key=value");
        const std::string key = tokens[i].substr(0, eq);
        const std::string val = tokens[i].substr(eq + 1);
        if (key == "weight") {
          c.weight = parse_double(val);
          has_weight = true;
        } else if (key == "variance") {
          c.variance = parse_double(val);
          has_var = true;
        } else if (key == "label") {
          c.label = val;
        } else if (key == "mean") {
          c.mean = MeanPattern::parse(val, shape ? &*shape : nullptr);
          has_mean = true;
        } else {
          throw std::invalid_argument(where() + "unknown component key '" + key + "'");
        }
      }
      if (!has_mean || !has_weight || !has_var) {
        throw std::invalid_argument(where() + "component needs weight, variance and mean");
      }
      comps.push_back(std::move(c));
    } else {
      throw std::invalid_argument(where() + "unknown directive '" + tokens[0] + "'");
    }
  }
  return GaussianMixtureModel(std::move(comps));
}

GaussianMixtureModel load_mixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mixture file '" + path + "'");
  return parse_mixture(in);
}

void write_mixture(std::ostream& out, const GaussianMixtureModel& model) {
  for (const auto& c : model.components()) {
    if (auto s = c.mean.explicit_shape()) {
      out << "shape " << s->height << ' ' << s->width << ' ' << s->channels << '\n';
      break;
    }
  }
  for (const auto& c : model.components()) {
    out << "component weight=" << format_double(c.weight)
        << " variance=" << format_double(c.variance);
    if (!c.label.empty()) out << " label=" << c.label;
    out << " mean=" << c.mean.str() << '\n';
  }
}

GaussianMixtureModel mixture_preset(std::string_view name) {
  if (name == "desk") {
    return GaussianMixtureModel({
        {0.25, MeanPattern::constant(-0.6), 0.25, "dark"},
        {0.25, MeanPattern::constant(0.9), 0.25, "white"},
        {0.125, MeanPattern::hsplit(0.8, -0.8), 0.25, "top"},
        {0.125, MeanPattern::hsplit(-0.8, 0.8), 0.25, "bottom"},
        {0.125, MeanPattern::vsplit(0.8, -0.8), 0.25, "left"},
        {0.125, MeanPattern::vsplit(-0.8, 0.8), 0.25, "right"},
    });
  }
  if (name == "bimodal") {
    return GaussianMixtureModel({
        {0.3, MeanPattern::constant(-0.6), 0.05, "dark"},
        {0.7, MeanPattern::constant(0.6), 0.05, "bright"},
    });
  }
  throw std::invalid_argument("unknown mixture preset '" + std::string(name) + "'");
}

}  // namespace cowdiff

#include "cowdiff/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "cowdiff/text_util.hpp"

namespace cowdiff {

double mse(const Canvas& a, const Canvas& b) {
  require_same_shape(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double cosine_similarity(const Canvas& a, const Canvas& b) {
  require_same_shape(a, b, "cosine_similarity");
  const double na = l2_norm(a.values());
  const double nb = l2_norm(b.values());
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_similarity: zero-norm input");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

MergeLayout parse_layout(std::string_view name) {
  if (name == "top") return MergeLayout::Top;
  if (name == "bottom") return MergeLayout::Bottom;
  if (name == "left") return MergeLayout::Left;
  if (name == "right") return MergeLayout::Right;
  throw std::invalid_argument("unknown layout '" + std::string(name) +
                              "' (expected top, bottom, left or right)");
}

const char* layout_name(MergeLayout layout) {
  switch (layout) {
    case MergeLayout::Top:
      return "top";
    case MergeLayout::Bottom:
      return "bottom";
    case MergeLayout::Left:
      return "left";
    case MergeLayout::Right:
      return "right";
  }
  return "?";
}

bool in_first_half(MergeLayout layout, const Shape& shape, int row, int col) {
  switch (layout) {
    case MergeLayout::Top:
      return 2 * row < shape.height;
    case MergeLayout::Bottom:
      return 2 * row >= shape.height;
    case MergeLayout::Left:
      return 2 * col < shape.width;
    case MergeLayout::Right:
      return 2 * col >= shape.width;
  }
  return false;
}

namespace {

LatentState invert_to(const Canvas& image, int step, const Denoiser& denoiser,
                      const NoiseSchedule& schedule) {
  if (step == 0) return {image, 0};
  return invert_trajectory({image, 0}, denoiser, ConditionSpec::unconditional(), schedule, step)
      .back();
}

LatentState deterministic_to(const LatentState& state, int stop, const Denoiser& denoiser,
                             const NoiseSchedule& schedule) {
  if (state.step == stop) return state;
  RngStream unused = RngStream::zeros();
  return denoise_range(state, stop, denoiser, ConditionSpec::unconditional(), schedule, unused);
}

double masked_mse(const Canvas& a, const Canvas& b, MergeLayout layout, bool first) {
  const Shape& s = a.shape();
  double acc = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) {
      if (in_first_half(layout, s, r, c) != first) continue;
      for (int ch = 0; ch < s.channels; ++ch) {
        const double d = a.at(r, c, ch) - b.at(r, c, ch);
        acc += d * d;
        ++n;
      }
    }
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

void require_chain_step(const NoiseSchedule& schedule, int t, const char* what) {
  if (!schedule.valid_step(t) || !schedule.on_subsequence(t)) {
    throw std::invalid_argument(std::string(what) + ": step " + std::to_string(t) +
                                " is not on the sampling subsequence");
  }
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

MergeResult merge_and_regenerate(const Canvas& image_a, const Canvas& image_b, int replace_step,
                                 MergeLayout layout, const Denoiser& denoiser,
                                 const NoiseSchedule& schedule) {
  require_same_shape(image_a, image_b, "merge_and_regenerate");
  require_chain_step(schedule, replace_step, "merge_and_regenerate");
  const Shape& shape = image_a.shape();
  if (shape.height < 2 && (layout == MergeLayout::Top || layout == MergeLayout::Bottom)) {
    throw std::invalid_argument("merge_and_regenerate: need at least 2 rows to split");
  }
  if (shape.width < 2 && (layout == MergeLayout::Left || layout == MergeLayout::Right)) {
    throw std::invalid_argument("merge_and_regenerate: need at least 2 columns to split");
  }

  const LatentState za = invert_to(image_a, replace_step, denoiser, schedule);
  const LatentState zb = invert_to(image_b, replace_step, denoiser, schedule);
  LatentState merged{Canvas(shape), replace_step};
  for (int r = 0; r < shape.height; ++r) {
    for (int c = 0; c < shape.width; ++c) {
      const Canvas& src = in_first_half(layout, shape, r, c) ? za.data : zb.data;
      for (int ch = 0; ch < shape.channels; ++ch) merged.data.at(r, c, ch) = src.at(r, c, ch);
    }
  }

  const Canvas solo_a = deterministic_to(za, 0, denoiser, schedule).data;
  const Canvas solo_b = deterministic_to(zb, 0, denoiser, schedule).data;
  MergeResult out;
  out.canvas = deterministic_to(merged, 0, denoiser, schedule).data;
  out.contamination_a = masked_mse(out.canvas, solo_a, layout, true);
  out.contamination_b = masked_mse(out.canvas, solo_b, layout, false);
  return out;
}

DisturbResult disturb_and_reconstruct(const Canvas& image, int t, int duration,
                                      const Shape& canvas_shape, Placement placement,
                                      const Denoiser& denoiser, const NoiseSchedule& schedule,
                                      RngStream& rng, double eta) {
  if (eta < 0.0) throw std::invalid_argument("disturb_and_reconstruct: eta must be >= 0");
  if (duration < 0 || t - duration < 0) {
    throw std::invalid_argument("disturb_and_reconstruct: need 0 <= duration <= t");
  }
  require_chain_step(schedule, t, "disturb_and_reconstruct");
  require_chain_step(schedule, t - duration, "disturb_and_reconstruct");
  const Shape& rs = image.shape();
  if (rs.channels != canvas_shape.channels || placement.row < 0 || placement.col < 0 ||
      placement.row + rs.height > canvas_shape.height ||
      placement.col + rs.width > canvas_shape.width) {
    throw std::invalid_argument("disturb_and_reconstruct: region " + rs.str() + " at (" +
                                std::to_string(placement.row) + "," +
                                std::to_string(placement.col) + ") does not fit canvas " +
                                canvas_shape.str());
  }

  LatentState region = invert_to(image, t, denoiser, schedule);
  if (duration > 0) {
    LatentState composite{rng.gaussian_canvas(canvas_shape), t};
    composite.data.paste(region.data, placement.row, placement.col);
    DenoiseOptions opts;
    opts.eta = eta;
    composite = denoise_range(composite, t - duration, denoiser, ConditionSpec::unconditional(),
                              schedule, rng, opts);
    region = {composite.data.crop(placement.row, placement.col, rs.height, rs.width), composite.step};
  }
  const Canvas recon = deterministic_to(region, 0, denoiser, schedule).data;
  return {cosine_similarity(recon, image), mse(recon, image)};
}

double condition_sensitivity(const ConditionSpec& target, int start, int duration,
                             double guidance_scale, const GaussianMixtureDenoiser& denoiser,
                             const Shape& shape, const NoiseSchedule& schedule, RngStream& rng,
                             double eta) {
  if (!target.is_conditional()) {
    throw std::invalid_argument("condition_sensitivity: target must be a categorical condition");
  }
  denoiser.require_label(target);
  const int T = schedule.top_step();
  if (duration < 0 || start < 0 || start > T || start - duration < 0) {
    throw std::invalid_argument("condition_sensitivity: injection window outside [0, T]");
  }
  // Exact top-step marginal: a mixture draw noised to T. Matters when
  // alpha_bar(T) is not negligible.
  LatentState x = forward_noise({denoiser.model().sample(shape, rng), 0}, T, schedule, rng);
  DenoiseOptions opts;
  opts.eta = eta;
  opts.guidance_scale = guidance_scale;
  opts.guide_at = [start, duration](int step) { return step <= start && step > start - duration; };
  x = denoise_range(x, 0, denoiser, target, schedule, rng, opts);
  return denoiser.model().label_posterior(x.data, *target.label);
}

std::vector<SummaryRow> summarize(const std::vector<CurvePoint>& points) {
  std::vector<double> xs;
  std::vector<std::vector<double>> groups;
  for (const auto& p : points) {
    auto it = std::find(xs.begin(), xs.end(), p.x);
    if (it == xs.end()) {
      xs.push_back(p.x);
      groups.push_back({p.y});
    } else {
      groups[static_cast<std::size_t>(it - xs.begin())].push_back(p.y);
    }
  }
  std::vector<SummaryRow> rows;
  for (std::size_t g = 0; g < xs.size(); ++g) {
    const auto& ys = groups[g];
    SummaryRow row;
    row.x = xs[g];
    row.n = static_cast<int>(ys.size());
    row.mean = mean_of(ys);
    if (ys.size() > 1) {
      double ss = 0.0;
      for (double y : ys) ss += (y - row.mean) * (y - row.mean);
      row.stderr_mean = std::sqrt(ss / static_cast<double>(ys.size() - 1)) /
                        std::sqrt(static_cast<double>(ys.size()));
    }
    rows.push_back(row);
  }
  return rows;
}

bool is_monotone(const std::vector<SummaryRow>& rows, Trend trend, double tolerance) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double slack = tolerance * std::max(rows[i - 1].stderr_mean, rows[i].stderr_mean);
    const double rise = rows[i].mean - rows[i - 1].mean;
    if (trend == Trend::NonIncreasing ? rise > slack : -rise > slack) return false;
  }
  return true;
}

double elapsed_until_above(const std::vector<SummaryRow>& rows, double threshold, int top_step) {
  std::vector<SummaryRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const SummaryRow& a, const SummaryRow& b) { return a.x > b.x; });
  for (const auto& r : sorted) {
    if (r.mean > threshold) return top_step - r.x;
  }
  return top_step;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
  out << "kind,parameter,value,replicate,stderr,n\n";
  for (const auto& p : points) {
    out << "data," << format_double(p.x) << ',' << format_double(p.y) << ',' << p.replicate
        << ",,\n";
  }
  for (const auto& r : summarize(points)) {
    out << "summary," << format_double(r.x) << ',' << format_double(r.mean) << ",,"
        << format_double(r.stderr_mean) << ',' << r.n << '\n';
  }
}

std::vector<CurvePoint> merge_sweep(const GaussianMixtureDenoiser& denoiser,
                                    const NoiseSchedule& schedule, const MergeSweepOptions& options) {
  const auto& model = denoiser.model();
  if (model.size() < 2) throw std::invalid_argument("merge_sweep: mixture needs two components");
  std::vector<CurvePoint> points;
  for (int rep = 0; rep < options.replicates; ++rep) {
    RngStream rng = RngStream::derive(options.seed, static_cast<std::uint64_t>(rep));
    const auto ka = static_cast<std::size_t>(rng.below(model.size()));
    auto kb = static_cast<std::size_t>(rng.below(model.size() - 1));
    if (kb >= ka) ++kb;
    const Canvas a = model.sample_component(ka, options.shape, rng);
    const Canvas b = model.sample_component(kb, options.shape, rng);
    for (int step : options.steps) {
      const MergeResult r = merge_and_regenerate(a, b, step, options.layout, denoiser, schedule);
      points.push_back({static_cast<double>(step), 0.5 * (r.contamination_a + r.contamination_b),
                        static_cast<std::uint64_t>(rep)});
    }
  }
  return points;
}

std::vector<CurvePoint> disturb_sweep(const GaussianMixtureDenoiser& denoiser,
                                      const NoiseSchedule& schedule,
                                      const DisturbSweepOptions& options) {
  std::vector<CurvePoint> points;
  for (int rep = 0; rep < options.replicates; ++rep) {
    RngStream image_rng = RngStream::derive(options.seed, static_cast<std::uint64_t>(rep));
    const Canvas image = denoiser.model().sample(options.region, image_rng);
    for (int step : options.steps) {
      RngStream background = RngStream::derive(image_rng.seed(), "background");
      const DisturbResult r =
          disturb_and_reconstruct(image, step, options.duration, options.canvas,
                                  options.placement, denoiser, schedule, background, options.eta);
      points.push_back({static_cast<double>(step), r.cosine, static_cast<std::uint64_t>(rep)});
    }
  }
  return points;
}

std::vector<CurvePoint> sensitivity_sweep(const GaussianMixtureDenoiser& denoiser,
                                          const NoiseSchedule& schedule,
                                          const SensitivitySweepOptions& options) {
  const ConditionSpec target = ConditionSpec::categorical(options.label);
  std::vector<CurvePoint> points;
  for (int start : options.starts) {
    for (int rep = 0; rep < options.replicates; ++rep) {
      RngStream rng = RngStream::derive(options.seed, static_cast<std::uint64_t>(rep));
      const double y = condition_sensitivity(target, start, options.duration,
                                             options.guidance_scale, denoiser, options.shape,
                                             schedule, rng, options.eta);
      points.push_back({static_cast<double>(start), y, static_cast<std::uint64_t>(rep)});
    }
  }
  return points;
}

std::vector<int> fraction_grid(const NoiseSchedule& schedule, const std::vector<double>& fractions) {
  const auto seq = schedule.subsequence();
  std::vector<int> out;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("fraction_grid: fraction outside [0, 1]");
    const int target = static_cast<int>(std::floor(f * schedule.total_steps() + 1e-9));
    int snapped = 0;
    for (int s : seq) {
      if (s <= target) snapped = s;
    }
    out.push_back(snapped);
  }
  return out;
}

}  // namespace cowdiff

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cowdiff/gaussian_mixture.hpp"
#include "cowdiff/sampler.hpp"

namespace cowdiff {

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  std::uint64_t replicate = 0;
};

/// Seed-averaged value of one grid point.
struct SummaryRow {
  double x = 0.0;
  double mean = 0.0;
  double stderr_mean = 0.0;
  int n = 0;
};

double mse(const Canvas& a, const Canvas& b);
/// Throws when either input has zero norm.
double cosine_similarity(const Canvas& a, const Canvas& b);

/// Which part of the merged canvas image_a occupies; image_b fills the rest.
enum class MergeLayout { Top, Bottom, Left, Right };
MergeLayout parse_layout(std::string_view name);
const char* layout_name(MergeLayout layout);

/// True for canvas pixels that belong to image_a under `layout`.
bool in_first_half(MergeLayout layout, const Shape& shape, int row, int col);

struct MergeResult {
  Canvas canvas;
  double contamination_a = 0.0;
  double contamination_b = 0.0;
};

/// Inverts both images to replace_step, splices the halves, denoises
/// deterministically to 0 and scores each half against that image's own
/// solo reconstruction.
MergeResult merge_and_regenerate(const Canvas& image_a, const Canvas& image_b, int replace_step,
                                 MergeLayout layout, const Denoiser& denoiser,
                                 const NoiseSchedule& schedule);

struct Placement {
  int row = 0;
  int col = 0;
};

struct DisturbResult {
  double cosine = 0.0;
  double mse = 0.0;
};

/// Inverts `image` to step t, plants it at `placement` in a standard Gaussian
/// canvas, denoises the composite for `duration` steps with the given eta,
/// then lets the cropped region finish alone deterministically. The
/// background and any composite-leg noise come from `rng`.
DisturbResult disturb_and_reconstruct(const Canvas& image, int t, int duration,
                                      const Shape& canvas_shape, Placement placement,
                                      const Denoiser& denoiser, const NoiseSchedule& schedule,
                                      RngStream& rng, double eta = 1.0);

/// Generates from the exact step-T marginal (a mixture draw noised to T) with
/// guidance towards `target` only at steps in (start - duration, start], and
/// returns the target label's posterior mass for the final sample. Outside the
/// window the denoiser runs unconditionally.
double condition_sensitivity(const ConditionSpec& target, int start, int duration,
                             double guidance_scale, const GaussianMixtureDenoiser& denoiser,
                             const Shape& shape, const NoiseSchedule& schedule, RngStream& rng,
                             double eta = 0.0);

/// Groups points by x (in first-appearance order).
std::vector<SummaryRow> summarize(const std::vector<CurvePoint>& points);

enum class Trend { NonIncreasing, NonDecreasing };

/// Checks consecutive summary rows in order, allowing each violation up to
/// `tolerance` times the larger of the two standard errors.
bool is_monotone(const std::vector<SummaryRow>& rows, Trend trend, double tolerance = 1.0);

/// Rows are visited from the noisiest x downwards; returns top_step minus the
/// first x whose mean exceeds `threshold`, i.e. the number of denoising steps
/// elapsed before recovery. Returns top_step when no row qualifies.
double elapsed_until_above(const std::vector<SummaryRow>& rows, double threshold, int top_step);

/// Header "kind,parameter,value,replicate,stderr,n"; one "data" row per point
/// followed by one "summary" row per grid value.
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points);

struct MergeSweepOptions {
  std::vector<int> steps;
  int replicates = 10;
  MergeLayout layout = MergeLayout::Top;
  Shape shape{16, 16, 1};
  std::uint64_t seed = 0;
};

/// Per replicate, draws two images from distinct mixture components and
/// records the mean of both contamination scores at every step.
std::vector<CurvePoint> merge_sweep(const GaussianMixtureDenoiser& denoiser,
                                    const NoiseSchedule& schedule, const MergeSweepOptions& options);

struct DisturbSweepOptions {
  std::vector<int> steps;
  int duration = 100;
  double eta = 1.0;
  int replicates = 10;
  Shape region{8, 8, 1};
  Shape canvas{16, 16, 1};
  Placement placement{};
  std::uint64_t seed = 0;
};

/// y = cosine similarity. Each replicate draws one image and one background
/// stream shared across the grid.
std::vector<CurvePoint> disturb_sweep(const GaussianMixtureDenoiser& denoiser,
                                      const NoiseSchedule& schedule,
                                      const DisturbSweepOptions& options);

struct SensitivitySweepOptions {
  std::string label;
  std::vector<int> starts;
  int duration = 100;
  double guidance_scale = 1.0;
  double eta = 0.0;
  int replicates = 1000;
  Shape shape{16, 16, 1};
  std::uint64_t seed = 0;
};

std::vector<CurvePoint> sensitivity_sweep(const GaussianMixtureDenoiser& denoiser,
                                          const NoiseSchedule& schedule,
                                          const SensitivitySweepOptions& options);

/// Evenly spaced steps fraction * T for each fraction, snapped down onto the
/// subsequence.
std::vector<int> fraction_grid(const NoiseSchedule& schedule, const std::vector<double>& fractions);

}  // namespace cowdiff

#include <cmath>
#include <sstream>

#include "cowdiff/diagnostics.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cowdiff;

namespace {

int count_prefix(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("mse and cosine similarity") {
  const Canvas a(Shape{1, 2, 1}, std::vector<double>{1.0, 0.0});
  const Canvas b(Shape{1, 2, 1}, std::vector<double>{0.0, 1.0});
  const Canvas c(Shape{1, 2, 1}, std::vector<double>{-2.0, 0.0});
  CHECK(mse(a, b) == 1.0);
  CHECK(mse(a, a) == 0.0);
  CHECK(cosine_similarity(a, b) == 0.0);
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(a, c) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS(cosine_similarity(a, Canvas(Shape{1, 2, 1}, 0.0)));
  CHECK_THROWS(mse(a, Canvas(Shape{2, 1, 1}, 0.0)));
}

TEST_CASE("merge layouts") {
  const Shape s{4, 4, 1};
  CHECK(in_first_half(MergeLayout::Top, s, 1, 3));
  CHECK_FALSE(in_first_half(MergeLayout::Top, s, 2, 0));
  CHECK(in_first_half(MergeLayout::Bottom, s, 3, 0));
  CHECK(in_first_half(MergeLayout::Left, s, 3, 1));
  CHECK_FALSE(in_first_half(MergeLayout::Left, s, 0, 2));
  CHECK(in_first_half(MergeLayout::Right, s, 0, 2));
  for (auto l : {MergeLayout::Top, MergeLayout::Bottom, MergeLayout::Left, MergeLayout::Right}) {
    CHECK(parse_layout(layout_name(l)) == l);
  }
  CHECK_THROWS(parse_layout("diagonal"));
}

TEST_CASE("merge degenerate cases score zero") {
  const auto schedule = make_subsequence(schedule_preset("sd-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("desk"), schedule);
  RngStream rng(1);
  const auto a = d.model().sample_component(0, Shape{8, 8, 1}, rng);
  const auto b = d.model().sample_component(1, Shape{8, 8, 1}, rng);
  const auto self = merge_and_regenerate(a, a, 500, MergeLayout::Top, d, schedule);
  CHECK(self.contamination_a == 0.0);
  CHECK(self.contamination_b == 0.0);
  const auto clean = merge_and_regenerate(a, b, 0, MergeLayout::Left, d, schedule);
  CHECK(clean.contamination_a == 0.0);
  CHECK(clean.contamination_b == 0.0);
  const auto mixed = merge_and_regenerate(a, b, 800, MergeLayout::Top, d, schedule);
  CHECK(mixed.contamination_a > 0.0);
  CHECK(mixed.canvas.shape() == a.shape());
  CHECK_THROWS(merge_and_regenerate(a, b, 510, MergeLayout::Top, d, schedule));
}

TEST_CASE("disturb with zero duration is a plain inversion round trip") {
  const auto schedule = make_subsequence(schedule_preset("sd-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("desk"), schedule);
  RngStream img(3);
  const auto image = d.model().sample(Shape{8, 8, 1}, img);
  RngStream rng(4);
  const auto r = disturb_and_reconstruct(image, 600, 0, Shape{16, 16, 1}, {}, d, schedule, rng);
  CHECK(r.cosine > 0.99);
  CHECK(rng.draws() == 0);
  CHECK_THROWS(disturb_and_reconstruct(image, 100, 200, Shape{16, 16, 1}, {}, d, schedule, rng));
  CHECK_THROWS(disturb_and_reconstruct(image, 600, 100, Shape{16, 16, 1}, Placement{10, 10}, d,
                                       schedule, rng));
}

TEST_CASE("condition responses are probabilities") {
  const auto schedule = make_subsequence(schedule_preset("sd-scaled-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("bimodal"), schedule);
  for (std::uint64_t s = 0; s < 5; ++s) {
    RngStream rng(s);
    const double y = condition_sensitivity(ConditionSpec::categorical("dark"), 1000, 100, 3.0, d,
                                           Shape{4, 4, 1}, schedule, rng);
    CHECK(y >= 0.0);
    CHECK(y <= 1.0);
  }
  RngStream rng(0);
  CHECK_THROWS(condition_sensitivity(ConditionSpec::unconditional(), 1000, 100, 1.0, d,
                                     Shape{4, 4, 1}, schedule, rng));
  CHECK_THROWS(condition_sensitivity(ConditionSpec::categorical("dark"), 50, 100, 1.0, d,
                                     Shape{4, 4, 1}, schedule, rng));
}

TEST_CASE("full guidance throughout selects the target component") {
  const auto schedule = make_subsequence(schedule_preset("sd-scaled-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("bimodal"), schedule);
  RngStream rng(2);
  const double y = condition_sensitivity(ConditionSpec::categorical("dark"), 1000, 1000, 1.0, d,
                                         Shape{4, 4, 1}, schedule, rng);
  CHECK(y > 0.99);
}

TEST_CASE("summaries and monotonicity") {
  const std::vector<CurvePoint> pts{{1, 1.0, 0}, {2, 3.0, 0}, {1, 3.0, 1}, {2, 5.0, 1}};
  const auto rows = summarize(pts);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].x == 1);
  CHECK(rows[0].mean == 2.0);
  CHECK(rows[0].n == 2);
  CHECK(rows[0].stderr_mean == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(is_monotone(rows, Trend::NonDecreasing));
  CHECK_FALSE(is_monotone(rows, Trend::NonIncreasing, 1.0));
  CHECK(is_monotone(rows, Trend::NonIncreasing, 2.0));

  const std::vector<SummaryRow> curve{{100, 0.9, 0, 1}, {300, 0.8, 0, 1}, {500, 0.4, 0, 1}};
  CHECK(elapsed_until_above(curve, 0.5, 1000) == 700.0);
  CHECK(elapsed_until_above(curve, 0.95, 1000) == 1000.0);
}

TEST_CASE("curve csv layout") {
  const auto schedule = make_subsequence(schedule_preset("sd-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("desk"), schedule);
  MergeSweepOptions opts;
  opts.steps = fraction_grid(schedule, {0.1, 0.3, 0.5, 0.7, 0.9});
  opts.replicates = 10;
  opts.shape = Shape{4, 4, 1};
  const auto pts = merge_sweep(d, schedule, opts);
  CHECK(pts.size() == 50);
  std::ostringstream out;
  write_curve_csv(out, pts);
  const std::string text = out.str();
  CHECK(text.rfind("kind,parameter,value,replicate,stderr,n\n", 0) == 0);
  CHECK(count_prefix(text, "data,") == 50);
  CHECK(count_prefix(text, "summary,") == 5);
}

TEST_CASE("sweeps are reproducible for a fixed seed") {
  const auto schedule = make_subsequence(schedule_preset("sd-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("desk"), schedule);
  DisturbSweepOptions opts;
  opts.steps = {200, 600};
  opts.replicates = 2;
  opts.region = Shape{4, 4, 1};
  opts.canvas = Shape{8, 8, 1};
  opts.seed = 5;
  const auto a = disturb_sweep(d, schedule, opts);
  const auto b = disturb_sweep(d, schedule, opts);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].y == b[i].y);
  opts.seed = 6;
  const auto c = disturb_sweep(d, schedule, opts);
  CHECK(c[0].y != a[0].y);
}

TEST_CASE("fraction grid snaps onto the subsequence") {
  const auto schedule = make_subsequence(schedule_preset("sd-linear"), 50);
  CHECK(fraction_grid(schedule, {0.1, 0.5, 0.91, 1.0}) == std::vector<int>{100, 500, 900, 1000});
  CHECK(fraction_grid(schedule, {0.0}) == std::vector<int>{0});
  CHECK_THROWS(fraction_grid(schedule, {1.5}));
}

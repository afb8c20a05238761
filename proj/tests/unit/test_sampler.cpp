#include <cmath>

#include "cowdiff/gaussian_mixture.hpp"
#include "cowdiff/sampler.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cowdiff;
using cowdiff::testing::scalar;

TEST_CASE("ddim step golden values") {
  const auto s = testing::two_step_schedule();
  const LatentState x{scalar(1.0), 2};
  const auto eps = scalar(0.5);
  auto zeros = RngStream::zeros();
  // Deterministic update: predicted clean sample 0.86895..., then 0.98247...
  const auto prev = ddim_step(x, 1, eps, 0.0, s, zeros);
  CHECK(prev.step == 1);
  CHECK(prev.data[0] == doctest::Approx(0.9824722905297083).epsilon(1e-14));
  const double x0_hat = (1.0 - std::sqrt(0.19) * 0.5) / std::sqrt(0.81);
  CHECK(x0_hat == doctest::Approx(0.8689500586921849).epsilon(1e-14));

  const auto inv = invert_step(LatentState{scalar(1.0), 1}, 2, eps, s);
  CHECK(inv.step == 2);
  CHECK(inv.data[0] == doctest::Approx(1.0166282452275475).epsilon(1e-14));

  auto z2 = RngStream::zeros();
  CHECK(forward_noise(LatentState{scalar(1.0), 0}, 1, s, z2).data[0] ==
        doctest::Approx(0.9486832980505138).epsilon(1e-14));
}

TEST_CASE("zero noise prediction rescales by the signal ratio") {
  const auto s = schedule_preset("sd-linear");
  auto zeros = RngStream::zeros();
  const LatentState x{Canvas(Shape{2, 2, 1}, 0.3), 700};
  const auto prev = ddim_step(x, 400, Canvas(Shape{2, 2, 1}, 0.0), 0.0, s, zeros);
  const double ratio = std::sqrt(s.alpha_bar(400) / s.alpha_bar(700));
  for (double v : prev.data.values()) CHECK(v == doctest::Approx(0.3 * ratio).epsilon(1e-14));
}

TEST_CASE("final step returns the predicted clean sample") {
  const auto s = schedule_preset("sd-linear");
  RngStream rng(1);
  const LatentState x{Canvas(Shape{1, 3, 1}, std::vector<double>{0.1, -0.4, 0.9}), 20};
  const Canvas eps(Shape{1, 3, 1}, std::vector<double>{0.2, 0.0, -0.3});
  for (double eta : {0.0, 1.0}) {
    const auto out = ddim_step(x, 0, eps, eta, s, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      const double x0 = (x.data[i] - std::sqrt(1.0 - s.alpha_bar(20)) * eps[i]) / std::sqrt(s.alpha_bar(20));
      CHECK(out.data[i] == doctest::Approx(x0).epsilon(1e-13));
    }
  }
}

TEST_CASE("inversion step is a local inverse of the deterministic step") {
  const auto s = make_subsequence(schedule_preset("sd-linear"), 1000);
  GaussianMixtureDenoiser d(testing::preset_model("bimodal"), s);
  RngStream rng(4);
  auto zeros = RngStream::zeros();
  for (int t : {1, 100, 500, 900}) {
    const LatentState x{rng.gaussian_canvas(Shape{3, 3, 1}), t - 1};
    const auto eps = d.predict_noise(x.data, t - 1, ConditionSpec::unconditional());
    const auto up = invert_step(x, t, eps, s);
    const auto eps_up = d.predict_noise(up.data, t, ConditionSpec::unconditional());
    const auto down = ddim_step(up, t - 1, eps_up, 0.0, s, zeros);
    CHECK(relative_l2(down.data, x.data) < 1e-2);
    const auto exact = ddim_step(up, t - 1, eps, 0.0, s, zeros);
    CHECK(relative_l2(exact.data, x.data) < 1e-12);
  }
}

TEST_CASE("forward noising moments and composition") {
  const auto s = schedule_preset("sd-linear");
  RngStream rng(9);
  const int n = 10000;
  double m1 = 0.0, v1 = 0.0, m2 = 0.0, v2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const LatentState x0{scalar(0.7), 0};
    const auto one = forward_noise(x0, 600, s, rng).data[0];
    const auto mid = forward_noise(x0, 250, s, rng);
    const auto two = forward_noise(mid, 600, s, rng).data[0];
    m1 += one;
    v1 += one * one;
    m2 += two;
    v2 += two * two;
  }
  const double ab = s.alpha_bar(600);
  const double mean = std::sqrt(ab) * 0.7;
  m1 /= n;
  m2 /= n;
  v1 = v1 / n - m1 * m1;
  v2 = v2 / n - m2 * m2;
  CHECK(std::abs(m1 - mean) < 4.0 * std::sqrt((1.0 - ab) / n));
  CHECK(std::abs(m2 - mean) < 4.0 * std::sqrt((1.0 - ab) / n));
  CHECK(v1 == doctest::Approx(1.0 - ab).epsilon(0.05));
  CHECK(v2 == doctest::Approx(1.0 - ab).epsilon(0.05));
}

TEST_CASE("deterministic sampling consumes no draws") {
  const auto s = make_subsequence(schedule_preset("sd-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("desk"), s);
  RngStream init(1);
  const LatentState top{init.gaussian_canvas(Shape{8, 8, 1}), 1000};
  RngStream rng(2);
  const auto a = denoise_range(top, 0, d, ConditionSpec::unconditional(), s, rng);
  CHECK(rng.draws() == 0);
  RngStream other(99);
  const auto b = denoise_range(top, 0, d, ConditionSpec::unconditional(), s, other);
  CHECK(a == b);

  RngStream noisy(2);
  DenoiseOptions opts;
  opts.eta = 1.0;
  (void)denoise_range(top, 0, d, ConditionSpec::unconditional(), s, noisy, opts);
  CHECK(noisy.draws() == 49 * 64);
}

TEST_CASE("deterministic trajectory matches the single-Gaussian closed form") {
  // For N(0, s2) data the optimal predictor is linear, so each deterministic
  // step multiplies x by a known factor.
  const double s2 = 0.25;
  const auto s = make_subsequence(schedule_preset("sd-linear"), 50);
  const auto model = std::make_shared<const GaussianMixtureModel>(
      std::vector<MixtureComponent>{{1.0, MeanPattern::constant(0.0), s2, ""}});
  GaussianMixtureDenoiser d(model, s);
  const LatentState top{Canvas(Shape{1, 2, 1}, std::vector<double>{1.3, -0.4}), 1000};
  auto zeros = RngStream::zeros();
  Trace trace;
  DenoiseOptions opts;
  opts.trace = &trace;
  const auto out = denoise_range(top, 0, d, ConditionSpec::unconditional(), s, zeros, opts);
  double factor = 1.0;
  int t = 1000;
  while (t > 0) {
    const int p = s.previous_step(t);
    const double a = s.alpha_bar(t);
    const double ap = s.alpha_bar(p);
    factor *= (std::sqrt(ap * a) * s2 + std::sqrt((1.0 - ap) * (1.0 - a))) / (a * s2 + 1.0 - a);
    t = p;
  }
  CHECK(out.data[0] == doctest::Approx(1.3 * factor).epsilon(1e-9));
  CHECK(out.data[1] == doctest::Approx(-0.4 * factor).epsilon(1e-9));
  CHECK(trace.denoiser_calls() == 50);
}

TEST_CASE("inverted data reaches approximately unit scale") {
  const auto s = make_subsequence(schedule_preset("sd-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("desk"), s);
  const auto& model = d.model();
  RngStream rng(6);
  const auto x0 = model.sample(Shape{16, 16, 1}, rng);
  Trace trace;
  const auto traj = invert_trajectory(LatentState{x0, 0}, d, ConditionSpec::unconditional(), s, -1,
                                      1.0, &trace);
  REQUIRE(traj.size() == 50);
  CHECK(traj.front().step == 20);
  CHECK(traj.back().step == 1000);
  double sq = 0.0;
  for (double v : traj.back().data.values()) sq += v * v;
  const double sd = std::sqrt(sq / static_cast<double>(x0.size()));
  CHECK(sd >= 0.8);
  CHECK(sd <= 1.2);
  CHECK(trace.inversion_calls() == 50);
  CHECK(trace.denoiser_calls() == 0);

  const auto partial = invert_trajectory(LatentState{x0, 0}, d, ConditionSpec::unconditional(), s, 500);
  CHECK(partial.back().step == 500);
  CHECK(partial.back() == traj[24]);
}

TEST_CASE("denoise range validates its endpoints") {
  const auto s = make_subsequence(schedule_preset("sd-linear"), 50);
  GaussianMixtureDenoiser d(testing::preset_model("bimodal"), s);
  RngStream rng(0);
  const LatentState off{Canvas(Shape{2, 2, 1}), 510};
  CHECK_THROWS(denoise_range(off, 0, d, ConditionSpec::unconditional(), s, rng));
  const LatentState on{Canvas(Shape{2, 2, 1}), 500};
  CHECK_THROWS(denoise_range(on, 600, d, ConditionSpec::unconditional(), s, rng));
  CHECK_THROWS(denoise_range(on, 500, d, ConditionSpec::unconditional(), s, rng));
}

TEST_CASE("step hook and guide_at") {
  const auto s = make_subsequence(schedule_preset("sd-linear"), 10);
  GaussianMixtureDenoiser d(testing::preset_model("bimodal"), s);
  RngStream rng(0);
  std::vector<int> seen;
  DenoiseOptions opts;
  opts.on_step = [&](LatentState& st) { seen.push_back(st.step); };
  opts.guide_at = [](int) { return false; };
  opts.guidance_scale = 7.5;
  const LatentState top{Canvas(Shape{2, 2, 1}, 0.1), 1000};
  const auto guided_off = denoise_range(top, 0, d, ConditionSpec::categorical("dark"), s, rng, opts);
  CHECK(seen == std::vector<int>{900, 800, 700, 600, 500, 400, 300, 200, 100, 0});
  const auto uncond = denoise_range(top, 0, d, ConditionSpec::unconditional(), s, rng);
  CHECK(guided_off == uncond);
}

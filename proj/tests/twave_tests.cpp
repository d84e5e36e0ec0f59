#include <doctest.h>

#include <cmath>
#include <vector>

#include "kalium/errors.hpp"
#include "kalium/synth.hpp"
#include "kalium/twave.hpp"

using namespace kalium;

namespace {

BeatTemplate gaussian_t_template(double amplitude_mv, double center_s, double sigma_s,
                                 double fs = 500.0) {
  BeatTemplate tpl;
  tpl.sampling_rate = fs;
  tpl.r_index = static_cast<std::size_t>(std::lround(0.3 * fs));
  tpl.beats_used = 5;
  tpl.mean_rr_s = 1.0;
  const std::size_t n = static_cast<std::size_t>(std::lround(0.9 * fs));
  tpl.waveform.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - static_cast<double>(tpl.r_index)) / fs;
    const double u = (t - center_s) / sigma_s;
    tpl.waveform[i] = amplitude_mv * std::exp(-0.5 * u * u);
  }
  return tpl;
}

BeatTemplate model_template(const BeatModel& model, double k, double fs = 500.0) {
  BeatTemplate tpl;
  tpl.sampling_rate = fs;
  tpl.r_index = static_cast<std::size_t>(std::lround(0.3 * fs));
  tpl.beats_used = 5;
  tpl.mean_rr_s = 1.0;
  const std::size_t n = static_cast<std::size_t>(std::lround(0.9 * fs));
  tpl.waveform.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - static_cast<double>(tpl.r_index)) / fs;
    tpl.waveform[i] = model.value(t, k);
  }
  return tpl;
}

}  // namespace

TEST_CASE("an isolated Gaussian T wave is measured to within a percent") {
  const double a = 0.45, tc = 0.30, sigma = 0.10, fs = 500.0;
  const auto tpl = gaussian_t_template(a, tc, sigma, fs);
  const TWaveMarks marks = measure_t_wave(tpl);

  CHECK(std::abs(marks.baseline_mv) < 1e-6);
  const double peak_t =
      (static_cast<double>(marks.peak_index) - static_cast<double>(tpl.r_index)) / fs;
  CHECK(peak_t == doctest::Approx(tc).epsilon(0.01));
  CHECK(marks.amplitude_mv == doctest::Approx(a).epsilon(0.01));

  // A Gaussian's steepest slope is a * exp(-1/2) / sigma, at one sigma
  // from the center on either side.
  const double slope = a * std::exp(-0.5) / sigma;
  CHECK(marks.asc_slope_mv_s == doctest::Approx(slope).epsilon(0.02));
  CHECK(marks.desc_slope_mv_s == doctest::Approx(-slope).epsilon(0.02));
  const double asc_t =
      (static_cast<double>(marks.asc_index) - static_cast<double>(tpl.r_index)) / fs;
  const double desc_t =
      (static_cast<double>(marks.desc_index) - static_cast<double>(tpl.r_index)) / fs;
  CHECK(asc_t == doctest::Approx(tc - sigma).epsilon(0.05));
  CHECK(desc_t == doctest::Approx(tc + sigma).epsilon(0.05));
}

TEST_CASE("a full synthetic beat matches its closed-form features") {
  const BeatModel model;
  for (double k : {3.5, 4.0, 5.0, 6.5}) {
    CAPTURE(k);
    const auto tpl = model_template(model, k);
    const TWaveMarks marks = measure_t_wave(tpl);
    const AnalyticFeatures truth = analytic_features(model, k);
    CHECK(marks.amplitude_mv == doctest::Approx(truth.t_amplitude_mv).epsilon(0.02));
    CHECK(marks.asc_slope_mv_s == doctest::Approx(truth.asc_slope_mv_s).epsilon(0.03));
    CHECK(marks.desc_slope_mv_s == doctest::Approx(truth.desc_slope_mv_s).epsilon(0.03));
  }
}

TEST_CASE("measurements scale with the waveform") {
  const auto tpl = gaussian_t_template(0.3, 0.3, 0.09);
  const TWaveMarks base = measure_t_wave(tpl);
  for (double c : {2.0, 17.5, 0.5}) {
    BeatTemplate scaled = tpl;
    for (double& v : scaled.waveform) v *= c;
    const TWaveMarks marks = measure_t_wave(scaled);
    CHECK(marks.peak_index == base.peak_index);
    CHECK(marks.amplitude_mv == doctest::Approx(c * base.amplitude_mv).epsilon(1e-12));
    CHECK(marks.asc_slope_mv_s == doctest::Approx(c * base.asc_slope_mv_s).epsilon(1e-12));
    CHECK(marks.desc_slope_mv_s ==
          doctest::Approx(c * base.desc_slope_mv_s).epsilon(1e-12));
  }
}

TEST_CASE("measurements ignore a constant offset") {
  const auto tpl = gaussian_t_template(0.3, 0.3, 0.09);
  const TWaveMarks base = measure_t_wave(tpl);
  for (double offset : {0.8, -2.5}) {
    BeatTemplate shifted = tpl;
    for (double& v : shifted.waveform) v += offset;
    const TWaveMarks marks = measure_t_wave(shifted);
    CHECK(marks.peak_index == base.peak_index);
    CHECK(marks.baseline_mv == doctest::Approx(base.baseline_mv + offset).epsilon(1e-9));
    CHECK(marks.amplitude_mv == doctest::Approx(base.amplitude_mv).epsilon(1e-9));
    CHECK(marks.asc_slope_mv_s == doctest::Approx(base.asc_slope_mv_s).epsilon(1e-9));
    CHECK(marks.desc_slope_mv_s == doctest::Approx(base.desc_slope_mv_s).epsilon(1e-9));
  }
}

TEST_CASE("a flat T wave is refused") {
  const auto tpl = gaussian_t_template(0.005, 0.3, 0.10);
  CHECK_THROWS_WITH_AS(measure_t_wave(tpl), doctest::Contains("flat T wave"),
                       NumericError);
}

TEST_CASE("slope signs and peak placement hold on randomized beats") {
  Rng rng(42);
  const BeatModel base;
  for (int trial = 0; trial < 100; ++trial) {
    BeatModel model = base;
    model.t_amp_base_mv = rng.uniform(0.1, 0.6);
    model.t_sigma_base_s = rng.uniform(0.06, 0.14);
    const double k = rng.uniform(3.0, 7.0);
    BeatTemplate tpl = model_template(model, k);
    tpl.mean_rr_s = rng.uniform(0.75, 1.2);
    for (double& v : tpl.waveform) v += 0.002 * rng.gaussian();

    TWaveMarks marks;
    try {
      marks = measure_t_wave(tpl);
    } catch (const NumericError&) {
      continue;  // randomized amplitude below the flat-T gate
    }
    CAPTURE(trial);
    CHECK(marks.asc_slope_mv_s >= 0.0);
    CHECK(marks.desc_slope_mv_s <= 0.0);
    CHECK(marks.asc_index <= marks.peak_index);
    CHECK(marks.desc_index >= marks.peak_index);
    const auto window = t_search_window(tpl);
    REQUIRE(window.has_value());
    CHECK(marks.peak_index >= window->begin);
    CHECK(marks.peak_index < window->end);
    CHECK(marks.amplitude_mv ==
          doctest::Approx(tpl.waveform[marks.peak_index] - marks.baseline_mv));
  }
}

TEST_CASE("invalid smoothing cutoffs are rejected") {
  const auto tpl = gaussian_t_template(0.3, 0.3, 0.10);
  CHECK_THROWS_AS(measure_t_wave(tpl, 0.0), DataError);
  CHECK_THROWS_AS(measure_t_wave(tpl, 250.0), DataError);
  CHECK_THROWS_AS(measure_t_wave(tpl, -5.0), DataError);
}

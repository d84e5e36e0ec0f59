#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "kalium/beats.hpp"
#include "kalium/errors.hpp"
#include "kalium/synth.hpp"

using namespace kalium;

namespace {

// Beat train on an exact sample grid so templates have a closed-form oracle.
// With `periodize`, beats continue past both ends of the recording so every
// listed beat sees the same periodic neighborhood as an infinite train.
std::vector<double> beat_train(const BeatModel& model, double fs, double duration_s,
                               double first_r_s, double rr_s, double k,
                               std::vector<std::size_t>* true_peaks = nullptr,
                               bool periodize = false) {
  const std::size_t n = static_cast<std::size_t>(duration_s * fs);
  std::vector<double> x(n, 0.0);
  const double from = periodize ? first_r_s - 2.0 * rr_s : first_r_s;
  const double to = periodize ? duration_s + 0.5 : duration_s - 0.75;
  for (double r = from; r < to; r += rr_s) {
    if (true_peaks && r >= first_r_s - 1e-9 && r < duration_s - 0.75)
      true_peaks->push_back(static_cast<std::size_t>(std::llround(r * fs)));
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs - r;
      if (t > -0.5 && t < 1.2) x[i] += model.value(t, k);
    }
  }
  return x;
}

// Periodized beat: what a template cut from an infinite train must equal.
double periodized_beat(const BeatModel& model, double t_rel, double rr_s, double k) {
  double v = 0.0;
  for (int j = -2; j <= 2; ++j) v += model.value(t_rel - j * rr_s, k);
  return v;
}

EcgRecording flat_recording(double fs, double duration_s) {
  EcgRecording rec;
  rec.patient_id = "p01";
  rec.session_index = 1;
  rec.sampling_rate = fs;
  const std::size_t n = static_cast<std::size_t>(duration_s * fs);
  for (std::size_t l = 0; l < kLeadCount; ++l) {
    rec.lead_names.push_back("L" + std::to_string(l + 1));
    rec.samples.emplace_back(n, 0.0);
  }
  return rec;
}

}  // namespace

TEST_CASE("R peaks are found at the beat apices on a clean train") {
  const BeatModel model;
  const double fs = 500.0;
  std::vector<std::size_t> truth;
  const auto x = beat_train(model, fs, 60.0, 0.5, 0.8, 4.5, &truth);
  const auto peaks = detect_r_peaks(x, fs);
  REQUIRE(peaks.size() == truth.size());
  for (std::size_t i = 0; i < peaks.size(); ++i)
    CHECK(std::abs(static_cast<long>(peaks[i]) - static_cast<long>(truth[i])) <= 2);
}

TEST_CASE("R detection is invariant to scale and sign") {
  const BeatModel model;
  const double fs = 500.0;
  const auto x = beat_train(model, fs, 30.0, 0.5, 0.9, 4.0);
  const auto reference = detect_r_peaks(x, fs);
  for (double scale : {1000.0, 1e-3, -1.0}) {
    std::vector<double> y = x;
    for (double& v : y) v *= scale;
    CHECK(detect_r_peaks(y, fs) == reference);
  }
}

TEST_CASE("R detection survives measurement noise") {
  const BeatModel model;
  const double fs = 500.0;
  std::vector<std::size_t> truth;
  auto x = beat_train(model, fs, 60.0, 0.5, 0.85, 5.0, &truth);
  Rng rng(7);
  for (double& v : x) v += 0.03 * rng.gaussian();
  const auto peaks = detect_r_peaks(x, fs);
  REQUIRE(peaks.size() == truth.size());
  for (std::size_t i = 0; i < peaks.size(); ++i)
    CHECK(std::abs(static_cast<long>(peaks[i]) - static_cast<long>(truth[i])) <=
          static_cast<long>(0.01 * fs));
}

TEST_CASE("multi-lead detection pools the leads") {
  const BeatModel model;
  const double fs = 500.0;
  std::vector<std::size_t> truth;
  const auto source = beat_train(model, fs, 30.0, 0.5, 1.0, 4.0, &truth);
  std::vector<std::vector<double>> leads;
  for (double m : lead_mixing()) {
    leads.push_back(source);
    for (double& v : leads.back()) v *= m;
  }
  const auto peaks = detect_r_peaks(leads, fs);
  REQUIRE(peaks.size() == truth.size());
}

TEST_CASE("too little signal for R detection is an error") {
  CHECK_THROWS_AS(detect_r_peaks(std::vector<double>(100, 0.0), 500.0), DataError);
}

TEST_CASE("segment windows cover what the recording allows") {
  const EcgRecording rec = flat_recording(500.0, 480.0);
  SegmentSpec spec;

  const Segment center = cut_segment(rec, 240.0, spec);
  CHECK(center.coverage == doctest::Approx(1.0));
  CHECK(center.start_index == static_cast<std::size_t>(120.0 * 500.0));
  CHECK(center.leads[0].size() == static_cast<std::size_t>(240.0 * 500.0));

  // Early measurement: the left half is clipped at the recording start.
  const Segment early = cut_segment(rec, 30.0, spec);
  CHECK(early.start_index == 0);
  CHECK(early.coverage == doctest::Approx(150.0 / 240.0));

  CHECK_THROWS_WITH_AS(cut_segment(rec, -1.0, spec), doctest::Contains("outside"),
                       DataError);
  CHECK_THROWS_WITH_AS(cut_segment(rec, 480.5, spec), doctest::Contains("outside"),
                       DataError);

  // A recording shorter than half the window fails the coverage gate.
  const EcgRecording tiny = flat_recording(500.0, 100.0);
  CHECK_THROWS_WITH_AS(cut_segment(tiny, 50.0, spec), doctest::Contains("coverage"),
                       DataError);
}

TEST_CASE("causal segments use only signal before the measurement") {
  const EcgRecording rec = flat_recording(500.0, 480.0);
  SegmentSpec spec;
  spec.causal = true;
  const Segment seg = cut_segment(rec, 300.0, spec);
  CHECK(seg.start_index == static_cast<std::size_t>(60.0 * 500.0));
  CHECK(seg.leads[0].size() == static_cast<std::size_t>(240.0 * 500.0));
  CHECK(seg.coverage == doctest::Approx(1.0));
  CHECK_THROWS_AS(cut_segment(rec, 100.0, spec), DataError);  // not enough history
}

TEST_CASE("templates equal the periodized beat on a noise-free train") {
  const BeatModel model;
  const double fs = 500.0;
  const double rr = 1.0;  // beats land exactly on the sample grid
  const double k = 4.5;
  std::vector<std::size_t> peaks;
  const auto x = beat_train(model, fs, 240.0, 0.5, rr, k, &peaks, /*periodize=*/true);

  SegmentSpec spec;
  const BeatTemplate tpl = build_template(x, fs, peaks, spec);
  CHECK(tpl.r_index == 150);
  CHECK(tpl.waveform.size() == 450);
  CHECK(tpl.mean_rr_s == doctest::Approx(rr).epsilon(1e-9));
  CHECK(tpl.beats_used >= 3);
  for (std::size_t i = 0; i < tpl.waveform.size(); ++i) {
    const double t_rel = (static_cast<double>(i) - 150.0) / fs;
    CHECK(tpl.waveform[i] ==
          doctest::Approx(periodized_beat(model, t_rel, rr, k)).epsilon(1e-9));
  }
}

TEST_CASE("a corrupted beat is rejected by the correlation gate") {
  const BeatModel model;
  const double fs = 500.0;
  std::vector<std::size_t> peaks;
  auto x = beat_train(model, fs, 30.0, 0.5, 1.0, 4.5, &peaks, /*periodize=*/true);
  // Wreck the beat at 10.5 s: strong artifact across its whole window.
  const std::size_t r = static_cast<std::size_t>(10.5 * fs);
  for (std::size_t i = r - 150; i < r + 300; ++i)
    x[i] = 3.0 * std::sin(0.7 * static_cast<double>(i));

  SegmentSpec spec;
  const BeatTemplate tpl = build_template(x, fs, peaks, spec);
  CHECK(tpl.beats_used == peaks.size() - 1);
  for (std::size_t i = 0; i < tpl.waveform.size(); ++i) {
    const double t_rel = (static_cast<double>(i) - 150.0) / fs;
    CHECK(tpl.waveform[i] ==
          doctest::Approx(periodized_beat(model, t_rel, 1.0, 4.5)).epsilon(1e-9));
  }
}

TEST_CASE("too few beats is an error, before and after the correlation gate") {
  const BeatModel model;
  const double fs = 500.0;
  std::vector<std::size_t> peaks;
  auto x = beat_train(model, fs, 4.2, 0.5, 1.0, 4.5, &peaks);
  REQUIRE(peaks.size() == 3);
  SegmentSpec spec;
  CHECK_NOTHROW(build_template(x, fs, peaks, spec));

  // Corrupting one of only three beats leaves two survivors.
  const std::size_t r = peaks[1];
  for (std::size_t i = r - 150; i < r + 300; ++i) x[i] = -5.0 + 0.01 * (i % 7);
  CHECK_THROWS_WITH_AS(build_template(x, fs, peaks, spec), doctest::Contains("too few"),
                       DataError);

  CHECK_THROWS_AS(build_template(x, fs, {peaks[0], peaks[1]}, spec), DataError);
}

TEST_CASE("the T search window tracks heart rate and template length") {
  BeatTemplate tpl;
  tpl.waveform.assign(450, 0.0);
  tpl.sampling_rate = 500.0;
  tpl.r_index = 150;
  tpl.beats_used = 3;
  tpl.mean_rr_s = 1.0;
  auto window = t_search_window(tpl);
  REQUIRE(window.has_value());
  CHECK(window->begin == 150 + 75);
  CHECK(window->end == 150 + 250 + 1);

  tpl.mean_rr_s = 0.5;  // fast heart: the window shrinks to 0.6 RR
  window = t_search_window(tpl);
  REQUIRE(window.has_value());
  CHECK(window->end == 150 + 150 + 1);

  tpl.mean_rr_s = 0.2;  // window would end before it starts
  CHECK_FALSE(t_search_window(tpl).has_value());
}

TEST_CASE("lead reduction recovers a rank-1 mixing up to sign") {
  const BeatModel model;
  const double fs = 500.0;
  const double k = 5.0;
  // Build one template per lead: mixed copies of the same beat plus offsets.
  std::vector<BeatTemplate> templates(kLeadCount);
  const auto& mixing = lead_mixing();
  double norm = 0.0;
  for (double m : mixing) norm += m * m;
  norm = std::sqrt(norm);

  for (std::size_t l = 0; l < kLeadCount; ++l) {
    BeatTemplate t;
    t.waveform.resize(450);
    for (std::size_t i = 0; i < 450; ++i) {
      const double t_rel = (static_cast<double>(i) - 150.0) / fs;
      t.waveform[i] = mixing[l] * model.value(t_rel, k) + 0.2 * static_cast<double>(l);
    }
    t.sampling_rate = fs;
    t.r_index = 150;
    t.beats_used = 5;
    t.mean_rr_s = 1.0;
    templates[l] = std::move(t);
  }

  const auto [reduced, reduction] = reduce_leads(templates);
  // Weights match the mixing direction, oriented so the T wave is positive.
  for (std::size_t l = 0; l < kLeadCount; ++l)
    CHECK(reduction.weights[l] == doctest::Approx(mixing[l] / norm).epsilon(1e-6));
  // The reduced waveform is the source beat scaled by the mixing norm,
  // up to a constant from the per-lead offsets.
  const double shift = reduced.waveform[0] - norm * model.value(-150.0 / fs, k);
  for (std::size_t i = 0; i < 450; ++i) {
    const double t_rel = (static_cast<double>(i) - 150.0) / fs;
    CHECK(reduced.waveform[i] ==
          doctest::Approx(norm * model.value(t_rel, k) + shift).epsilon(1e-6));
  }
}

TEST_CASE("lead reduction flips the sign when the dominant T is negative") {
  const BeatModel model;
  const double fs = 500.0;
  std::vector<BeatTemplate> templates(kLeadCount);
  for (std::size_t l = 0; l < kLeadCount; ++l) {
    BeatTemplate t;
    t.waveform.resize(450);
    for (std::size_t i = 0; i < 450; ++i)
      t.waveform[i] = -model.value((static_cast<double>(i) - 150.0) / fs, 5.0);
    t.sampling_rate = fs;
    t.r_index = 150;
    t.beats_used = 4;
    t.mean_rr_s = 1.0;
    templates[l] = std::move(t);
  }
  const auto [reduced, reduction] = reduce_leads(templates);
  const auto window = t_search_window(reduced);
  REQUIRE(window.has_value());
  double t_max = -1e9;
  for (std::size_t i = window->begin; i < window->end; ++i)
    t_max = std::max(t_max, reduced.waveform[i]);
  CHECK(t_max > 0.0);
}

TEST_CASE("flat leads carry no T-wave energy") {
  std::vector<BeatTemplate> templates(kLeadCount);
  for (auto& t : templates) {
    t.waveform.assign(450, 0.25);
    t.sampling_rate = 500.0;
    t.r_index = 150;
    t.beats_used = 3;
    t.mean_rr_s = 1.0;
  }
  CHECK_THROWS_AS(reduce_leads(templates), NumericError);
}

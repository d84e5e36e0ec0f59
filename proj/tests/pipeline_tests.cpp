#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kalium/errors.hpp"
#include "kalium/io.hpp"
#include "kalium/pipeline.hpp"
#include "kalium/plots.hpp"
#include "kalium/regression.hpp"
#include "kalium/synth.hpp"

using namespace kalium;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kalium_unit_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 3 patients x 3 sessions x 6 measurements, noise-free, small enough to
// round-trip through files quickly.
SynthConfig small_dataset_config() {
  SynthConfig config;
  config.seed = 12;
  config.n_patients = 3;
  config.min_sessions = config.max_sessions = 3;
  config.min_measurements = config.max_measurements = 6;
  config.sampling_rate = 250.0;
  config.session_duration_s = 120.0;
  config.measurement_margin_s = 30.0;
  config.noise_std_mv = 0.0;
  config.mains_amplitude_mv = 0.0;
  config.wander_amplitude_mv = 0.0;
  return config;
}

void write_dataset(const SynthConfig& config, const fs::path& dir) {
  char name[64];
  for (const auto& session : generate_dataset(config)) {
    std::snprintf(name, sizeof name, "%s_s%02d_signal.csv",
                  session.recording.patient_id.c_str(), session.recording.session_index);
    store_recording(session.recording, dir / name);
    std::snprintf(name, sizeof name, "%s_s%02d_annotations.csv",
                  session.recording.patient_id.c_str(), session.recording.session_index);
    store_annotations(session.annotations, dir / name);
  }
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::size_t count_substrings(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (auto pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++count;
  return count;
}

std::vector<TWaveFeatureRow> feature_rows_for_sweep() {
  std::vector<TWaveFeatureRow> rows;
  Rng rng(9);
  for (const std::string pid : {"p01", "p02", "p03", "p04"}) {
    for (int session = 1; session <= 3; ++session) {
      for (int i = 0; i < 4; ++i) {
        TWaveFeatureRow row;
        row.patient_id = pid;
        row.session_index = session;
        row.time_s = 30.0 * (i + 1);
        row.k_mmol_l = rng.uniform(3.3, i == 0 ? 6.4 : 4.9);
        row.t_amplitude_mv = 0.2 + 0.15 * (row.k_mmol_l - 4.0) + 0.01 * rng.gaussian();
        row.asc_slope_mv_s = std::max(0.0, 1.0 + 0.7 * (row.k_mmol_l - 4.0));
        row.desc_slope_mv_s = std::min(0.0, -1.0 - 0.7 * (row.k_mmol_l - 4.0));
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("a full dataset round-trips through files into one row per measurement") {
  const fs::path dir = fresh_dir("full");
  const SynthConfig config = small_dataset_config();
  write_dataset(config, dir);

  const PipelineResult result = run_pipeline(dir);
  CHECK(result.rows.size() == 54);  // 3 patients x 3 sessions x 6 measurements
  CHECK(result.templates.size() == 54);
  CHECK(result.skips.empty());

  // Rows arrive in file-name order with intact identities.
  CHECK(result.rows.front().patient_id == "p01");
  CHECK(result.rows.front().session_index == 1);
  CHECK(result.rows.back().patient_id == "p03");
  CHECK(result.rows.back().session_index == 3);
  for (const auto& row : result.rows) {
    CHECK(row.t_amplitude_mv > 0.0);
    CHECK(row.asc_slope_mv_s > 0.0);
    CHECK(row.desc_slope_mv_s < 0.0);
    CHECK(row.k_mmol_l >= config.k_end_min);
  }

  // Template ids name patient, session and measurement.
  CHECK(result.templates.front().id == "p01_s1_m1");
  CHECK(result.templates.front().k_mmol_l == result.rows.front().k_mmol_l);

  // Feature tables serialize deterministically.
  CHECK(feature_table_csv(result.rows) == feature_table_csv(run_pipeline(dir).rows));
}

TEST_CASE("out-of-range measurements are skipped with a reason, not fatal") {
  SynthConfig config = small_dataset_config();
  config.n_patients = 1;
  config.min_sessions = config.max_sessions = 1;
  const SessionData session = generate_session(config, 0, 1);

  auto annotations = session.annotations;
  annotations.push_back({130.0, 4.0});  // beyond the 120 s recording

  const SessionFeatures features = process_session(session.recording, annotations);
  CHECK(features.rows.size() == 6);
  REQUIRE(features.skips.size() == 1);
  CHECK(features.skips[0].time_s == 130.0);
  CHECK(features.skips[0].patient_id == "p01");
  CHECK(features.skips[0].reason.find("outside") != std::string::npos);
}

TEST_CASE("pipeline directory errors are explicit") {
  const fs::path empty = fresh_dir("empty");
  CHECK_THROWS_WITH_AS(run_pipeline(empty), doctest::Contains("no recordings"),
                       DataError);
  CHECK_THROWS_AS(run_pipeline(empty / "not_there"), DataError);

  // A signal without its annotations file.
  const fs::path missing = fresh_dir("missing_annotations");
  SynthConfig config = small_dataset_config();
  config.n_patients = 1;
  config.min_sessions = config.max_sessions = 1;
  const SessionData session = generate_session(config, 0, 1);
  store_recording(session.recording, missing / "p01_s01_signal.csv");
  CHECK_THROWS_WITH_AS(run_pipeline(missing), doctest::Contains("annotations"),
                       DataError);

  // All measurements rejected: annotations far outside the recording.
  const fs::path rejected = fresh_dir("all_rejected");
  store_recording(session.recording, rejected / "p01_s01_signal.csv");
  store_annotations({{600.0, 4.2}, {700.0, 4.0}}, rejected / "p01_s01_annotations.csv");
  CHECK_THROWS_WITH_AS(run_pipeline(rejected), doctest::Contains("rejected"), DataError);
}

TEST_CASE("the skip log escapes its reason column") {
  const fs::path dir = fresh_dir("skiplog");
  std::vector<SkipRecord> skips = {
      {"p07", 2, 310.0, "segment coverage 0.4, measurement rejected"},
  };
  store_skip_log(skips, dir / "skips.csv");
  const std::string text = slurp(dir / "skips.csv");
  CHECK(text.find("patient_id,session_index,time_s,reason") == 0);
  CHECK(text.find("p07,2,310,segment coverage 0.4; measurement rejected") !=
        std::string::npos);
  CHECK(count_substrings(text, ",") == 3 + 3);  // header + one escaped row
}

TEST_CASE("the sweep evaluates every requested weighting setting") {
  const auto rows = feature_rows_for_sweep();
  const auto settings = default_sweep_settings();
  REQUIRE(settings.size() == 4);
  CHECK(!settings[0].has_value());
  CHECK(*settings[3] == 1.0);

  const auto sweep = run_sweep(rows, settings);
  REQUIRE(sweep.size() == 4);
  CHECK(sweep[0].label == "no weights");
  CHECK(sweep[1].label == "wr=0");
  CHECK(sweep[2].label == "wr=0.5");
  CHECK(sweep[3].label == "wr=1");
  for (const auto& row : sweep) {
    CHECK(row.report.all.count == rows.size() / 3 * 2);  // later sessions only
    CHECK(row.report.offsets.size() == 4);
  }
  CHECK(!sweep[0].report.wr.has_value());
  CHECK(*sweep[2].report.wr == 0.5);

  // Text table and CSV carry one line per setting.
  const std::string table = render_sweep_table(sweep);
  CHECK(table.find("no weights") != std::string::npos);
  CHECK(table.find("wr=1") != std::string::npos);
  const std::string csv = sweep_csv(sweep);
  CHECK(count_substrings(csv, "\n") == 5);  // header + 4 rows
  CHECK(csv.rfind("setting,wr,", 0) == 0);

  // Deterministic on repeat.
  CHECK(sweep_csv(run_sweep(rows, settings)) == csv);
}

TEST_CASE("template plots draw one polyline per series") {
  const fs::path dir = fresh_dir("template_plot");
  std::vector<TemplateSeries> series;
  for (int s = 0; s < 6; ++s) {
    TemplateSeries one;
    one.id = "p01_s1_m" + std::to_string(s);
    one.k_mmol_l = 3.5 + 0.5 * s;
    for (int i = 0; i < 200; ++i) {
      one.time_s.push_back(-0.2 + 0.004 * i);
      one.mv.push_back(std::sin(0.05 * i) * (1.0 + 0.1 * s));
    }
    series.push_back(one);
  }
  write_template_plot(series, dir / "templates.svg", dir / "templates.csv");

  const std::string svg = slurp(dir / "templates.svg");
  CHECK(count_substrings(svg, "<polyline") == 6);
  CHECK(svg.find("</svg>") != std::string::npos);

  const auto reread = load_template_table(dir / "templates.csv");
  REQUIRE(reread.size() == 6);
  CHECK(reread[2].id == "p01_s1_m2");
  CHECK(reread[2].mv.size() == 200);

  CHECK_THROWS_AS(write_template_plot({}, dir / "x.svg", dir / "x.csv"), DataError);
}

TEST_CASE("the weighting plot shows the advertised curve heights at the mode") {
  const fs::path dir = fresh_dir("weighting_plot");
  std::vector<double> ks(300, 4.0);  // sharply peaked histogram
  for (int i = 0; i < 12; ++i) ks.push_back(5.5 + 0.2 * i);
  write_weighting_plot(ks, dir / "weighting.svg", dir / "weighting.csv");

  const std::string svg = slurp(dir / "weighting.svg");
  CHECK(count_substrings(svg, "<polyline") == 3);  // wr = 0, 0.5, 1
  CHECK(count_substrings(svg, "<rect") >= 2);      // background + histogram bars

  // The CSV carries the plotted weighting curves; read the values nearest
  // the histogram mode.
  std::ifstream in(dir / "weighting.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "series,x,y");
  double best_dist = 1e9;
  std::map<std::string, double> at_mode;
  std::vector<std::pair<std::string, std::pair<double, double>>> points;
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    REQUIRE(c1 != std::string::npos);
    REQUIRE(c2 != std::string::npos);
    points.push_back({line.substr(0, c1),
                      {std::stod(line.substr(c1 + 1, c2 - c1 - 1)),
                       std::stod(line.substr(c2 + 1))}});
  }
  for (const auto& [name, xy] : points) {
    if (name.rfind("wr=", 0) != 0) continue;
    const double dist = std::abs(xy.first - 4.0);
    if (dist < best_dist) best_dist = dist;
  }
  REQUIRE(best_dist < 0.05);
  for (const auto& [name, xy] : points) {
    if (std::abs(xy.first - 4.0) > best_dist + 1e-12) continue;
    if (name == "wr=0") at_mode[name] = xy.second;
    if (name == "wr=0.5") at_mode[name] = xy.second;
    if (name == "wr=1") at_mode[name] = xy.second;
  }
  REQUIRE(at_mode.size() == 3);
  CHECK(at_mode["wr=0"] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(at_mode["wr=0.5"] == doctest::Approx(0.25).epsilon(0.05));
  CHECK(at_mode["wr=1"] == doctest::Approx(0.0).scale(1.0).epsilon(0.02));

  CHECK_THROWS_AS(write_weighting_plot({}, dir / "y.svg", dir / "y.csv"), DataError);
}

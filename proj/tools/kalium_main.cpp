#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kalium/errors.hpp"
#include "kalium/io.hpp"
#include "kalium/pipeline.hpp"
#include "kalium/plots.hpp"
#include "kalium/regression.hpp"
#include "kalium/synth.hpp"

namespace fs = std::filesystem;
using namespace kalium;

namespace {

struct SynthArgs {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string config_path;
  std::optional<std::size_t> patients;
  std::optional<int> min_sessions, max_sessions, min_measurements, max_measurements;
  std::optional<double> fs, duration, hr_min, hr_max, noise, mains, wander, high_fraction;
};

int run_synth(const SynthArgs& args) {
  SynthConfig config;
  if (!args.config_path.empty()) config = load_synth_config(args.config_path);
  config.seed = args.seed;
  if (args.patients) config.n_patients = *args.patients;
  if (args.min_sessions) config.min_sessions = *args.min_sessions;
  if (args.max_sessions) config.max_sessions = *args.max_sessions;
  if (args.min_measurements) config.min_measurements = *args.min_measurements;
  if (args.max_measurements) config.max_measurements = *args.max_measurements;
  if (args.fs) config.sampling_rate = *args.fs;
  if (args.duration) config.session_duration_s = *args.duration;
  if (args.hr_min) config.heart_rate_min_bpm = *args.hr_min;
  if (args.hr_max) config.heart_rate_max_bpm = *args.hr_max;
  if (args.noise) config.noise_std_mv = *args.noise;
  if (args.mains) config.mains_amplitude_mv = *args.mains;
  if (args.wander) config.wander_amplitude_mv = *args.wander;
  if (args.high_fraction) config.high_start_fraction = *args.high_fraction;
  config.validate();

  fs::create_directories(args.out_dir);
  std::size_t n_sessions = 0, n_measurements = 0;
  for (std::size_t p = 0; p < config.n_patients; ++p) {
    const int count = session_count(config, p);
    for (int s = 1; s <= count; ++s) {
      const SessionData session = generate_session(config, p, s);
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_s%02d", s);
      const std::string stem = session.recording.patient_id + suffix;
      store_recording(session.recording, fs::path(args.out_dir) / (stem + "_signal.csv"));
      store_annotations(session.annotations,
                        fs::path(args.out_dir) / (stem + "_annotations.csv"));
      ++n_sessions;
      n_measurements += session.annotations.size();
    }
  }
  std::fprintf(stderr, "synth: %zu patients, %zu sessions, %zu measurements -> %s\n",
               config.n_patients, n_sessions, n_measurements, args.out_dir.c_str());
  return 0;
}

struct PipelineArgs {
  std::string data_dir;
  std::string out_path;
  std::string templates_path;
  std::string skips_path;
  PipelineOptions options;
};

int run_pipeline_cmd(const PipelineArgs& args) {
  const PipelineResult result = run_pipeline(args.data_dir, args.options);
  store_feature_table(result.rows, args.out_path);
  if (!args.templates_path.empty()) store_template_table(result.templates, args.templates_path);
  fs::path skips = args.skips_path.empty()
                       ? fs::path(args.out_path).replace_extension(".skips.csv")
                       : fs::path(args.skips_path);
  store_skip_log(result.skips, skips);
  std::fprintf(stderr, "pipeline: %zu feature rows, %zu measurements skipped -> %s\n",
               result.rows.size(), result.skips.size(), args.out_path.c_str());
  for (const auto& skip : result.skips)
    std::fprintf(stderr, "  skipped %s session %d t=%gs: %s\n", skip.patient_id.c_str(),
                 skip.session_index, skip.time_s, skip.reason.c_str());
  return 0;
}

struct ModelArgs {
  std::string features_path;
  std::string out_path;  // model or report
  std::optional<double> wr;
  bool no_weights = false;
  double lambda = 0.9;
  bool cross_terms = false;
  std::vector<double> clamp;
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
};

ModelOptions to_model_options(const ModelArgs& args) {
  ModelOptions opts;
  opts.lambda = args.lambda;
  opts.wr = args.no_weights ? std::nullopt : args.wr;
  opts.basis = args.cross_terms ? PolyBasis::kTotalDegree3 : PolyBasis::kPerFeatureCubic;
  if (!args.clamp.empty()) opts.clamp_range = {args.clamp[0], args.clamp[1]};
  opts.tolerance = args.tolerance;
  opts.max_iterations = args.max_iterations;
  return opts;
}

int run_fit(const ModelArgs& args) {
  const auto rows = load_feature_table(args.features_path);
  FitTrace trace;
  const PotassiumModel model = fit_model(rows, to_model_options(args), &trace);
  store_model(model, args.out_path);
  std::fprintf(stderr, "fit: %zu rows, %zu iterations, objective %.6g%s -> %s\n",
               rows.size(), trace.iterations, trace.objective,
               trace.converged ? "" : " (iteration cap reached)", args.out_path.c_str());
  return 0;
}

int run_crossval(const ModelArgs& args) {
  const auto rows = load_feature_table(args.features_path);
  const CrossValResult result = cross_validate(rows, to_model_options(args));
  store_report(result.report, args.out_path);
  for (const auto& patient : result.report.skipped_patients)
    std::fprintf(stderr,
                 "warning: patient %s skipped (needs a first session and a later one)\n",
                 patient.c_str());
  std::fprintf(stderr,
               "crossval: %zu folds | MAE <5: %.3f  >=5: %.3f  all: %.3f -> %s\n",
               result.folds.size(), result.report.low.mae, result.report.high.mae,
               result.report.all.mae, args.out_path.c_str());
  return 0;
}

struct SweepArgs {
  std::string features_path;
  std::string out_dir;
  ModelArgs model;
};

int run_sweep_cmd(const SweepArgs& args) {
  const auto rows = load_feature_table(args.features_path);
  ModelArgs base = args.model;
  base.no_weights = false;
  const auto table = run_sweep(rows, default_sweep_settings(), to_model_options(base));

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  {
    std::ofstream csv(dir / "sweep.csv", std::ios::binary);
    csv << sweep_csv(table);
    std::ofstream txt(dir / "sweep.txt", std::ios::binary);
    txt << render_sweep_table(table);
    if (!csv.flush() || !txt.flush()) throw DataError("cannot write sweep outputs");
  }
  for (const auto& row : table) {
    std::string name = "report_" + row.label + ".json";
    std::replace(name.begin(), name.end(), ' ', '_');
    name.erase(std::remove(name.begin(), name.end(), '='), name.end());
    store_report(row.report, dir / name);
  }
  std::fputs(render_sweep_table(table).c_str(), stderr);
  return 0;
}

struct PlotArgs {
  std::string templates_path;
  std::string features_path;
  std::string out_dir;
};

int run_plot(const PlotArgs& args) {
  if (args.templates_path.empty() && args.features_path.empty())
    throw DataError("plot needs --templates and/or --features");
  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  if (!args.templates_path.empty()) {
    const auto series = load_template_table(args.templates_path);
    write_template_plot(series, dir / "templates.svg", dir / "templates_points.csv");
    std::fprintf(stderr, "plot: %zu templates -> %s\n", series.size(),
                 (dir / "templates.svg").string().c_str());
  }
  if (!args.features_path.empty()) {
    const auto rows = load_feature_table(args.features_path);
    std::vector<double> k;
    k.reserve(rows.size());
    for (const auto& row : rows) k.push_back(row.k_mmol_l);
    write_weighting_plot(k, dir / "weighting.svg", dir / "weighting_points.csv");
    std::fprintf(stderr, "plot: %zu concentration values -> %s\n", k.size(),
                 (dir / "weighting.svg").string().c_str());
  }
  return 0;
}

void add_model_flags(CLI::App* cmd, ModelArgs& args) {
  auto* wr = cmd->add_option("--wr", args.wr, "weighting ratio in [0, 1]");
  cmd->add_flag("--no-weights", args.no_weights, "identity weighting (default)")
      ->excludes(wr);
  cmd->add_option("--lambda", args.lambda, "L1 penalty weight")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--cross-terms", args.cross_terms,
                "use the full total-degree-3 basis (20 columns) instead of per-feature powers");
  cmd->add_option("--clamp", args.clamp, "prediction clamp range LO HI (mmol/l)")
      ->expected(2);
  cmd->add_option("--tol", args.tolerance, "solver tolerance on relative objective decrease");
  cmd->add_option("--max-iter", args.max_iterations, "solver iteration cap");
}

void add_pipeline_flags(CLI::App* cmd, PipelineOptions& options) {
  cmd->add_option("--hp", options.filters.hp_cutoff_hz, "highpass cutoff, Hz");
  cmd->add_option("--lp", options.filters.lp_cutoff_hz, "lowpass cutoff, Hz");
  cmd->add_option("--notch", options.filters.notch_center_hz, "notch center, Hz");
  cmd->add_option("--notch-sigma", options.filters.notch_sigma_hz, "notch width sigma, Hz");
  cmd->add_option("--half-window", options.segments.half_window_s,
                  "segment half window around a measurement, s");
  cmd->add_option("--corr-min", options.segments.beat_correlation_min,
                  "minimum beat-to-median correlation");
  cmd->add_flag("--causal", options.segments.causal,
                "use only signal before the measurement time");
  cmd->add_option("--smoothing", options.derivative_smoothing_hz,
                  "lowpass cutoff for the slope derivative, Hz");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG T-wave based blood potassium reconstruction"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-session dataset");
  synth->add_option("--out", synth_args.out_dir, "output directory")->required();
  synth->add_option("--seed", synth_args.seed, "random seed")->required();
  synth->add_option("--config", synth_args.config_path, "key = value config file");
  synth->add_option("--patients", synth_args.patients, "number of patients");
  synth->add_option("--min-sessions", synth_args.min_sessions, "sessions per patient, lower bound");
  synth->add_option("--max-sessions", synth_args.max_sessions, "sessions per patient, upper bound");
  synth->add_option("--min-measurements", synth_args.min_measurements,
                    "measurements per session, lower bound");
  synth->add_option("--max-measurements", synth_args.max_measurements,
                    "measurements per session, upper bound");
  synth->add_option("--fs", synth_args.fs, "sampling rate, Hz");
  synth->add_option("--duration", synth_args.duration, "session duration, s");
  synth->add_option("--hr-min", synth_args.hr_min, "heart rate lower bound, bpm");
  synth->add_option("--hr-max", synth_args.hr_max, "heart rate upper bound, bpm");
  synth->add_option("--noise", synth_args.noise, "white noise std, mV");
  synth->add_option("--mains", synth_args.mains, "50 Hz mains amplitude, mV");
  synth->add_option("--wander", synth_args.wander, "baseline wander amplitude, mV");
  synth->add_option("--high-fraction", synth_args.high_fraction,
                    "fraction of sessions starting above 5 mmol/l");

  PipelineArgs pipeline_args;
  auto* pipeline = app.add_subcommand("pipeline", "extract T-wave features from recordings");
  pipeline->add_option("--data", pipeline_args.data_dir, "directory with recording CSVs")
      ->required();
  pipeline->add_option("--out", pipeline_args.out_path, "feature table CSV")->required();
  pipeline->add_option("--templates", pipeline_args.templates_path,
                       "also write reduced templates to this CSV");
  pipeline->add_option("--skips", pipeline_args.skips_path,
                       "skip log path (default: <out>.skips.csv)");
  add_pipeline_flags(pipeline, pipeline_args.options);

  ModelArgs fit_args;
  auto* fit = app.add_subcommand("fit", "fit the regression model on a feature table");
  fit->add_option("--features", fit_args.features_path, "feature table CSV")->required();
  fit->add_option("--out", fit_args.out_path, "model JSON")->required();
  add_model_flags(fit, fit_args);

  ModelArgs crossval_args;
  auto* crossval =
      app.add_subcommand("crossval", "leave-one-patient-out evaluation of a feature table");
  crossval->add_option("--features", crossval_args.features_path, "feature table CSV")
      ->required();
  crossval->add_option("--out", crossval_args.out_path, "report JSON")->required();
  add_model_flags(crossval, crossval_args);

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand(
      "sweep", "cross-validate the four weighting settings (none, 0, 0.5, 1)");
  sweep->add_option("--features", sweep_args.features_path, "feature table CSV")->required();
  sweep->add_option("--out-dir", sweep_args.out_dir, "output directory")->required();
  sweep->add_option("--lambda", sweep_args.model.lambda, "L1 penalty weight");
  sweep->add_flag("--cross-terms", sweep_args.model.cross_terms,
                  "use the full total-degree-3 basis");
  sweep->add_option("--clamp", sweep_args.model.clamp, "prediction clamp range LO HI")
      ->expected(2);
  sweep->add_option("--tol", sweep_args.model.tolerance, "solver tolerance");
  sweep->add_option("--max-iter", sweep_args.model.max_iterations, "solver iteration cap");

  PlotArgs plot_args;
  auto* plot = app.add_subcommand("plot", "render template and weighting plots as SVG + CSV");
  plot->add_option("--templates", plot_args.templates_path, "template table CSV");
  plot->add_option("--features", plot_args.features_path, "feature table CSV");
  plot->add_option("--out-dir", plot_args.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (pipeline->parsed()) return run_pipeline_cmd(pipeline_args);
    if (fit->parsed()) return run_fit(fit_args);
    if (crossval->parsed()) return run_crossval(crossval_args);
    if (sweep->parsed()) return run_sweep_cmd(sweep_args);
    if (plot->parsed()) return run_plot(plot_args);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}

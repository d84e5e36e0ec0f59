#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kalium/beats.hpp"
#include "kalium/dsp.hpp"
#include "kalium/io.hpp"
#include "kalium/regression.hpp"
#include "kalium/types.hpp"

namespace kalium {

struct PipelineOptions {
  FilterSpec filters;
  SegmentSpec segments;
  double derivative_smoothing_hz = 10.0;
};

// A measurement dropped by a quality gate, with the reason.
struct SkipRecord {
  std::string patient_id;
  int session_index = 1;
  double time_s = 0.0;
  std::string reason;
};

struct SessionFeatures {
  std::vector<TWaveFeatureRow> rows;      // one per surviving measurement
  std::vector<TemplateSeries> templates;  // reduced templates, same order
  std::vector<SkipRecord> skips;
};

// Preprocesses one session and extracts T-wave features at every annotated
// measurement: segment cut, beat templating per lead, lead reduction, T-wave
// measurement. Per-measurement failures become skip records, not errors.
SessionFeatures process_session(const EcgRecording& recording,
                                const std::vector<ConcentrationSample>& annotations,
                                const PipelineOptions& options = {});

struct PipelineResult {
  std::vector<TWaveFeatureRow> rows;
  std::vector<TemplateSeries> templates;
  std::vector<SkipRecord> skips;
};

// Processes every `*_signal.csv` / `*_annotations.csv` pair under data_dir,
// sessions in file-name order (parallelized internally, output order fixed).
// Errors when no recording is found or every measurement was rejected.
PipelineResult run_pipeline(const std::filesystem::path& data_dir,
                            const PipelineOptions& options = {});

void store_skip_log(const std::vector<SkipRecord>& skips,
                    const std::filesystem::path& path);

// One row of the weighting sweep.
struct SweepRow {
  std::string label;  // "no weights" or "wr=<value>"
  std::optional<double> wr;
  EvaluationReport report;
};

// Cross-validates once per weighting setting (nullopt = identity weighting).
std::vector<SweepRow> run_sweep(const std::vector<TWaveFeatureRow>& rows,
                                const std::vector<std::optional<double>>& wr_list,
                                const ModelOptions& base = {});

// The four published settings: no weights, wr = 0, 0.5, 1.
std::vector<std::optional<double>> default_sweep_settings();

// Text table with the three strata columns (MAE +- std per stratum).
std::string render_sweep_table(const std::vector<SweepRow>& rows);
// Machine-readable equivalent, full precision.
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace kalium

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kalium/types.hpp"

namespace kalium {

// Signal CSV: header `time_s,L1,...,L8`, one row per sample, '.' decimal
// separator. patient_id and session_index are carried by the file name
// (`<patient>_s<NN>_signal.csv`); loaders fall back to the stem and
// session 1 when the name does not follow the convention.
EcgRecording load_recording(const std::filesystem::path& path);
void store_recording(const EcgRecording& rec, const std::filesystem::path& path);

// Annotation CSV: header `time_s,k_mmol_l`. Output is sorted ascending by
// time; values outside the plausibility bound [1, 10] mmol/l are rejected.
std::vector<ConcentrationSample> load_annotations(const std::filesystem::path& path);
void store_annotations(const std::vector<ConcentrationSample>& samples,
                       const std::filesystem::path& path);

// Feature table CSV: header
// `patient_id,session_index,time_s,t_amp_mv,asc_slope_mv_s,desc_slope_mv_s,k_mmol_l`.
std::vector<TWaveFeatureRow> load_feature_table(const std::filesystem::path& path);
void store_feature_table(const std::vector<TWaveFeatureRow>& rows,
                         const std::filesystem::path& path);
std::string feature_table_csv(const std::vector<TWaveFeatureRow>& rows);

// Model and report files: JSON with a top-level `format_version: 1`.
PotassiumModel load_model(const std::filesystem::path& path);
void store_model(const PotassiumModel& model, const std::filesystem::path& path);
std::string model_json(const PotassiumModel& model);

EvaluationReport load_report(const std::filesystem::path& path);
void store_report(const EvaluationReport& report, const std::filesystem::path& path);
std::string report_json(const EvaluationReport& report);

// Reduced per-measurement templates in long form for plotting:
// header `template_id,k_mmol_l,time_s,mv` with time relative to the R peak.
struct TemplateSeries {
  std::string id;
  double k_mmol_l = 0.0;
  std::vector<double> time_s;  // relative to R
  std::vector<double> mv;
};
std::vector<TemplateSeries> load_template_table(const std::filesystem::path& path);
void store_template_table(const std::vector<TemplateSeries>& series,
                          const std::filesystem::path& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// (patient_id, session_index) recovered from a `<patient>_s<NN>_signal.csv`
// style file name.
struct RecordingName {
  std::string patient_id;
  int session_index = 1;
};
RecordingName parse_recording_name(const std::filesystem::path& path);

}  // namespace kalium

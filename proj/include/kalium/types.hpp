#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kalium {

inline constexpr std::size_t kLeadCount = 8;

// Plausibility bounds for ingested potassium concentrations, mmol/l.
inline constexpr double kMinPlausibleK = 1.0;
inline constexpr double kMaxPlausibleK = 10.0;

// Stratum boundary used throughout evaluation: truth >= 5 mmol/l is the
// hyperkalemic stratum.
inline constexpr double kStratumBoundary = 5.0;

// Multi-lead sampled ECG signal. Samples are millivolts, one row per lead,
// all rows the same length. Exactly 8 independent leads.
struct EcgRecording {
  std::string patient_id;
  int session_index = 1;  // 1 = first session
  double sampling_rate = 0.0;  // Hz
  std::vector<std::string> lead_names;
  std::vector<std::vector<double>> samples;  // [lead][sample], mV

  std::size_t n_samples() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration_s() const;
  void validate() const;
};

// One blood-draw measurement: seconds from recording start and mmol/l.
struct ConcentrationSample {
  double time_s = 0.0;
  double value_mmol_l = 0.0;
  void validate() const;
};

// Averaged single-beat waveform aligned on the R peak.
struct BeatTemplate {
  std::vector<double> waveform;  // mV
  double sampling_rate = 0.0;    // Hz
  std::size_t r_index = 0;       // sample index of the R peak
  std::size_t beats_used = 0;
  double mean_rr_s = 0.0;
  void validate() const;
};

struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // half-open
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

// T-search window on a template: [R + 150 ms, R + min(500 ms, 0.6 * mean RR)],
// clipped to the waveform. Returns nullopt when the window is empty.
std::optional<SampleRange> t_search_window(const BeatTemplate& tpl);

// One feature row per concentration measurement.
struct TWaveFeatureRow {
  std::string patient_id;
  int session_index = 1;
  double time_s = 0.0;
  double t_amplitude_mv = 0.0;
  double asc_slope_mv_s = 0.0;   // >= 0
  double desc_slope_mv_s = 0.0;  // <= 0
  double k_mmol_l = 0.0;
  void validate() const;
};

// Density-based error weighting. weight_of() lives in regression.hpp.
struct WeightingCurve {
  bool identity = false;  // "no weights": weight 1 everywhere
  double bandwidth = 0.25;  // kernel bandwidth h, mmol/l
  double wr = 0.0;          // weighting ratio in [0, 1]
  std::vector<double> training_values;  // mmol/l
  double normalizer = 0.0;  // max kernel density over training values
  void validate() const;
};

enum class PolyBasis {
  kPerFeatureCubic,  // [1, f1, f1^2, f1^3, f2, ..., f3^3], 10 columns
  kTotalDegree3,     // all monomials of total degree <= 3, 20 columns
};

std::size_t basis_size(PolyBasis basis);
const char* basis_name(PolyBasis basis);
PolyBasis basis_from_name(const std::string& name);

// Fitted reconstruction model: standardization parameters, polynomial
// coefficients, the L1 weight lambda and the density weighting curve.
struct PotassiumModel {
  std::array<double, 3> feature_means{};  // amplitude, asc slope, desc slope
  std::array<double, 3> feature_stds{};   // each > 0
  PolyBasis basis = PolyBasis::kPerFeatureCubic;
  std::vector<double> coefficients;       // basis_size(basis) entries
  double lambda = 0.9;
  WeightingCurve weighting;               // carries wr (or identity)
  std::array<double, 2> clamp_range{1.5, 9.0};  // mmol/l
  double derivative_smoothing_hz = 10.0;  // recorded for reproducibility
  void validate() const;
};

struct StratumMetrics {
  double mae = 0.0;  // mmol/l
  double std = 0.0;  // std of absolute errors, mmol/l
  std::size_t count = 0;
};

// Table-1-style stratified metrics plus protocol byproducts.
struct EvaluationReport {
  StratumMetrics low;   // truth < 5 mmol/l
  StratumMetrics high;  // truth >= 5 mmol/l
  StratumMetrics all;
  std::map<std::string, double> offsets;  // patient -> mmol/l
  std::optional<double> wr;               // nullopt = identity weighting
  double lambda = 0.9;
  double weighted_mae = 0.0;  // density-weighted MAE over all errors
  std::vector<std::string> skipped_patients;
  void validate() const;
};

// patient_id appears in file names and CSV cells; restrict to a safe set.
bool valid_patient_id(const std::string& id);

}  // namespace kalium

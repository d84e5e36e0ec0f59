#include "kalium/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "kalium/errors.hpp"

namespace kalium {

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

double EcgRecording::duration_s() const {
  const std::size_t n = n_samples();
  return n == 0 ? 0.0 : static_cast<double>(n - 1) / sampling_rate;
}

void EcgRecording::validate() const {
  if (!valid_patient_id(patient_id)) throw DataError("invalid patient id '" + patient_id + "'");
  if (session_index < 1) throw DataError("session index must be >= 1");
  if (!(sampling_rate > 0.0) || !std::isfinite(sampling_rate))
    throw DataError("sampling rate must be positive");
  if (samples.size() != kLeadCount || lead_names.size() != kLeadCount)
    throw DataError("lead count must be exactly 8, got " + std::to_string(samples.size()));
  const std::size_t n = samples[0].size();
  if (n < 1) throw DataError("recording has no samples");
  for (std::size_t l = 0; l < kLeadCount; ++l) {
    if (samples[l].size() != n) throw DataError("leads have unequal lengths");
    if (!all_finite(samples[l]))
      throw DataError("non-finite sample in lead " + lead_names[l]);
  }
}

void ConcentrationSample::validate() const {
  if (!std::isfinite(time_s) || time_s < 0.0)
    throw DataError("measurement time must be non-negative");
  if (!std::isfinite(value_mmol_l) || value_mmol_l < kMinPlausibleK ||
      value_mmol_l > kMaxPlausibleK)
    throw DataError("implausible concentration " + std::to_string(value_mmol_l) +
                    " mmol/l (expected within [1, 10])");
}

void BeatTemplate::validate() const {
  if (waveform.empty()) throw DataError("empty template waveform");
  if (!(sampling_rate > 0.0)) throw DataError("template sampling rate must be positive");
  if (r_index >= waveform.size()) throw DataError("template R index out of range");
  if (beats_used < 1) throw DataError("template must use at least one beat");
  if (!all_finite(waveform)) throw DataError("non-finite template sample");
}

std::optional<SampleRange> t_search_window(const BeatTemplate& tpl) {
  const double fs = tpl.sampling_rate;
  const double lo_s = 0.150;
  const double hi_s = std::min(0.500, 0.6 * tpl.mean_rr_s);
  if (hi_s <= lo_s) return std::nullopt;
  const auto begin = tpl.r_index + static_cast<std::size_t>(std::lround(lo_s * fs));
  auto end = tpl.r_index + static_cast<std::size_t>(std::lround(hi_s * fs)) + 1;
  end = std::min<std::size_t>(end, tpl.waveform.size());
  if (begin >= end) return std::nullopt;
  return SampleRange{begin, end};
}

void TWaveFeatureRow::validate() const {
  if (!valid_patient_id(patient_id)) throw DataError("invalid patient id '" + patient_id + "'");
  if (session_index < 1) throw DataError("session index must be >= 1");
  if (!std::isfinite(time_s) || time_s < 0.0) throw DataError("invalid measurement time");
  if (!std::isfinite(t_amplitude_mv) || !std::isfinite(asc_slope_mv_s) ||
      !std::isfinite(desc_slope_mv_s))
    throw DataError("non-finite feature value");
  if (asc_slope_mv_s < 0.0) throw DataError("ascending slope must be >= 0");
  if (desc_slope_mv_s > 0.0) throw DataError("descending slope must be <= 0");
  ConcentrationSample{time_s, k_mmol_l}.validate();
}

void WeightingCurve::validate() const {
  if (identity) return;
  if (!(bandwidth > 0.0)) throw DataError("weighting bandwidth must be positive");
  if (!(wr >= 0.0 && wr <= 1.0)) throw DataError("weighting ratio must be in [0, 1]");
  if (training_values.empty()) throw DataError("weighting curve has no training values");
  if (!(normalizer > 0.0)) throw DataError("weighting normalizer must be positive");
  if (!all_finite(training_values)) throw DataError("non-finite weighting training value");
}

std::size_t basis_size(PolyBasis basis) {
  return basis == PolyBasis::kPerFeatureCubic ? 10 : 20;
}

const char* basis_name(PolyBasis basis) {
  return basis == PolyBasis::kPerFeatureCubic ? "per_feature_cubic" : "total_degree_3";
}

PolyBasis basis_from_name(const std::string& name) {
  if (name == "per_feature_cubic") return PolyBasis::kPerFeatureCubic;
  if (name == "total_degree_3") return PolyBasis::kTotalDegree3;
  throw DataError("unknown polynomial basis '" + name + "'");
}

void PotassiumModel::validate() const {
  for (double s : feature_stds)
    if (!(s > 0.0) || !std::isfinite(s)) throw DataError("feature stds must be positive");
  for (double m : feature_means)
    if (!std::isfinite(m)) throw DataError("non-finite feature mean");
  if (coefficients.size() != basis_size(basis))
    throw DataError("coefficient count does not match basis");
  if (!all_finite(coefficients)) throw DataError("non-finite model coefficient");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DataError("lambda must be >= 0");
  if (!(clamp_range[0] < clamp_range[1])) throw DataError("clamp range low must be < high");
  if (!(derivative_smoothing_hz > 0.0)) throw DataError("smoothing cutoff must be positive");
  weighting.validate();
}

void EvaluationReport::validate() const {
  for (const StratumMetrics* s : {&low, &high, &all}) {
    if (!(s->mae >= 0.0) || !(s->std >= 0.0)) throw DataError("negative error metric");
  }
  if (low.count + high.count != all.count)
    throw DataError("stratum counts do not sum to the total");
  if (wr && !(*wr >= 0.0 && *wr <= 1.0)) throw DataError("report wr out of [0, 1]");
}

bool valid_patient_id(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

}  // namespace kalium

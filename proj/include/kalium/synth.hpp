#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kalium/types.hpp"

namespace kalium {

// Deterministic random stream: the engine (mt19937_64) is fully specified by
// the standard, but the library distributions are not, so the uniform and
// normal transforms are spelled out here. Same seed, same bytes, everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() { return engine_(); }
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);     // inclusive bounds
  double gaussian();                   // standard normal, Box-Muller

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Mixes a seed with stream labels so (patient, session) streams are
// independent and order-insensitive.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

struct GaussianWave {
  double amplitude_mv = 0.0;
  double center_s = 0.0;  // relative to the R peak
  double width_s = 1.0;
};

// Gaussian-sum heartbeat with a potassium-coupled T wave: higher K makes the
// T wave taller and narrower, hence steeper on both flanks.
struct BeatModel {
  GaussianWave p{0.08, -0.16, 0.02};
  GaussianWave q{-0.10, -0.025, 0.008};
  GaussianWave r{1.10, 0.0, 0.010};
  GaussianWave s{-0.20, 0.025, 0.009};
  double t_center_s = 0.30;
  double t_amp_base_mv = 0.20;     // a_T(K) = base + slope * (K - 4)
  double t_amp_slope_mv = 0.15;
  double t_sigma_base_s = 0.12;    // sigma_T(K) = base + slope * (K - 4)
  double t_sigma_slope_s = -0.010;

  double t_amplitude(double k) const { return t_amp_base_mv + t_amp_slope_mv * (k - 4.0); }
  double t_sigma(double k) const { return t_sigma_base_s + t_sigma_slope_s * (k - 4.0); }
  // Beat voltage at time t relative to the R peak, for concentration k.
  double value(double t_rel_s, double k) const;
};

struct AnalyticFeatures {
  double t_amplitude_mv = 0.0;
  double asc_slope_mv_s = 0.0;
  double desc_slope_mv_s = 0.0;
};

// Closed-form feature values of the beat model's T wave: amplitude a_T(K)
// and extreme slopes +-a_T(K) e^{-1/2} / sigma_T(K).
AnalyticFeatures analytic_features(const BeatModel& model, double k);

// Fixed full-rank mixing of the source beat into the 8 leads.
const std::array<double, kLeadCount>& lead_mixing();

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_patients = 8;
  int min_sessions = 2;
  int max_sessions = 3;
  int min_measurements = 5;
  int max_measurements = 6;
  double sampling_rate = 500.0;       // Hz, must exceed 160
  double session_duration_s = 480.0;
  double heart_rate_min_bpm = 60.0;
  double heart_rate_max_bpm = 80.0;
  double noise_std_mv = 0.02;
  double mains_amplitude_mv = 0.05;   // injected at exactly 50 Hz
  double wander_amplitude_mv = 0.10;  // 0.15 Hz baseline wander
  double gain_min = 0.9;              // per-patient electrode gain
  double gain_max = 1.1;
  // Per-patient T-wave breadth factor multiplying sigma_T(K). A patient with
  // a broader T has shallower slopes at the same amplitude, so slope and
  // amplitude features carry genuinely independent information once this
  // varies. The default (exactly 1) leaves the published coupling untouched.
  double t_width_min = 1.0;
  double t_width_max = 1.0;
  // Session concentration trajectory: starts at k_start, decays linearly to
  // k_end. Most sessions start in the normal range; a minority start high,
  // which shapes the imbalanced histogram (most mass below 5 mmol/l). The
  // first session of each patient always starts in the normal range: it is
  // the calibration visit, so its sweep must be comparable across patients.
  double k_end_min = 3.3;
  double k_end_max = 3.9;
  double k_start_normal_min = 4.3;
  double k_start_normal_max = 5.1;
  double k_start_high_min = 5.2;
  double k_start_high_max = 6.6;
  double high_start_fraction = 0.3;
  double measurement_margin_s = 120.0;  // keep measurement windows interior
  BeatModel beat;

  void validate() const;
};

// Parses "key = value" lines ('#' comments allowed) into a SynthConfig.
SynthConfig load_synth_config(const std::string& path);

struct SessionData {
  EcgRecording recording;
  std::vector<ConcentrationSample> annotations;
  std::vector<double> r_times_s;  // ground-truth beat positions
  double k_start = 0.0;
  double k_end = 0.0;
  double heart_rate_bpm = 0.0;
  double gain = 1.0;
  double t_width = 1.0;  // patient T-breadth factor applied to sigma_T
};

std::string synth_patient_id(std::size_t patient_index);  // 0-based index

// One dialysis-like session; deterministic in (config.seed, patient, session).
SessionData generate_session(const SynthConfig& config, std::size_t patient_index,
                             int session_index);

// Number of sessions for a patient (drawn from the patient-level stream).
int session_count(const SynthConfig& config, std::size_t patient_index);

// All sessions of all patients, patients in index order.
std::vector<SessionData> generate_dataset(const SynthConfig& config);

}  // namespace kalium

#include "kalium/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "kalium/errors.hpp"

namespace kalium {

double Rng::uniform() {
  // 53 random bits into [0, 1); the shift keeps the mapping exact.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  const int span = hi - lo + 1;
  int v = lo + static_cast<int>(uniform() * span);
  return std::min(v, hi);
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer applied to a combined word; decorrelates streams
  // whose labels differ in a single bit.
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

namespace {

double wave_value(const GaussianWave& w, double t) {
  const double d = (t - w.center_s) / w.width_s;
  return w.amplitude_mv * std::exp(-0.5 * d * d);
}

}  // namespace

double BeatModel::value(double t_rel_s, double k) const {
  GaussianWave t_wave{t_amplitude(k), t_center_s, t_sigma(k)};
  return wave_value(p, t_rel_s) + wave_value(q, t_rel_s) + wave_value(r, t_rel_s) +
         wave_value(s, t_rel_s) + wave_value(t_wave, t_rel_s);
}

AnalyticFeatures analytic_features(const BeatModel& model, double k) {
  AnalyticFeatures f;
  f.t_amplitude_mv = model.t_amplitude(k);
  // Max slope of a Gaussian a*exp(-t^2/(2s^2)) is a*e^{-1/2}/s at t = -+s.
  const double slope = f.t_amplitude_mv * std::exp(-0.5) / model.t_sigma(k);
  f.asc_slope_mv_s = slope;
  f.desc_slope_mv_s = -slope;
  return f;
}

const std::array<double, kLeadCount>& lead_mixing() {
  static const std::array<double, kLeadCount> mixing = {1.0, 0.8,  0.6, -0.5,
                                                        0.4, -0.3, 0.9, 0.7};
  return mixing;
}

void SynthConfig::validate() const {
  if (n_patients < 1) throw DataError("need at least one patient");
  if (!(sampling_rate > 160.0)) throw DataError("sampling rate must exceed 160 Hz");
  if (min_sessions < 1 || max_sessions < min_sessions)
    throw DataError("session count range is invalid");
  if (min_measurements < 1 || max_measurements < min_measurements)
    throw DataError("measurement count range is invalid");
  if (!(session_duration_s >= 2.0 * measurement_margin_s) || !(measurement_margin_s > 0.0))
    throw DataError("session too short for the measurement margin");
  if (!(heart_rate_min_bpm >= 30.0 && heart_rate_max_bpm <= 150.0 &&
        heart_rate_min_bpm <= heart_rate_max_bpm))
    throw DataError("heart rate range must lie within [30, 150] bpm");
  if (noise_std_mv < 0.0 || mains_amplitude_mv < 0.0 || wander_amplitude_mv < 0.0)
    throw DataError("amplitudes must be >= 0");
  if (!(gain_min > 0.0 && gain_min <= gain_max)) throw DataError("gain range is invalid");
  if (!(t_width_min > 0.0 && t_width_min <= t_width_max))
    throw DataError("T-width range is invalid");
  if (!(high_start_fraction >= 0.0 && high_start_fraction <= 1.0))
    throw DataError("high-start fraction must be in [0, 1]");

  const double k_lo = std::min(k_end_min, k_start_normal_min);
  const double k_hi = std::max(k_start_high_max, k_start_normal_max);
  if (!(k_end_min <= k_end_max && k_start_normal_min <= k_start_normal_max &&
        k_start_high_min <= k_start_high_max))
    throw DataError("concentration ranges are invalid");
  if (!(k_lo >= 1.5 && k_hi <= 9.0))
    throw DataError("concentration trajectory must stay within [1.5, 9.0] mmol/l");
  // Feasibility of the T-wave coupling over the whole admissible K range.
  if (!(beat.t_amplitude(k_lo) > 0.0))
    throw DataError("infeasible config: T amplitude vanishes at K = " + std::to_string(k_lo));
  // The narrowest patient must still satisfy the sigma_T floor at the
  // highest admissible concentration.
  if (!(beat.t_sigma(k_hi) * t_width_min >= 0.04))
    throw DataError("infeasible config: sigma_T bound violated at K = " + std::to_string(k_hi));
}

std::string synth_patient_id(std::size_t patient_index) {
  std::ostringstream out;
  out << "p";
  if (patient_index + 1 < 10) out << "0";
  out << patient_index + 1;
  return out.str();
}

namespace {

// Patient-level draws happen in a fixed order from a dedicated stream so the
// same patient keeps the same gain and session count across runs.
struct PatientTraits {
  double gain = 1.0;
  int n_sessions = 0;
  double t_width = 1.0;
};

PatientTraits patient_traits(const SynthConfig& config, std::size_t patient_index) {
  Rng rng(mix_seed(config.seed, patient_index + 1, 0));
  PatientTraits traits;
  traits.gain = rng.uniform(config.gain_min, config.gain_max);
  traits.n_sessions = rng.uniform_int(config.min_sessions, config.max_sessions);
  traits.t_width = rng.uniform(config.t_width_min, config.t_width_max);
  return traits;
}

}  // namespace

int session_count(const SynthConfig& config, std::size_t patient_index) {
  config.validate();
  return patient_traits(config, patient_index).n_sessions;
}

SessionData generate_session(const SynthConfig& config, std::size_t patient_index,
                             int session_index) {
  config.validate();
  if (session_index < 1) throw DataError("session index starts at 1");

  const PatientTraits traits = patient_traits(config, patient_index);
  Rng rng(mix_seed(config.seed, patient_index + 1,
                   static_cast<std::uint64_t>(session_index)));

  SessionData session;
  session.gain = traits.gain;
  session.t_width = traits.t_width;
  session.heart_rate_bpm = rng.uniform(config.heart_rate_min_bpm, config.heart_rate_max_bpm);
  // The first session is always a normal-range (calibration) visit so every
  // patient's offset is computed on a comparable concentration sweep; only
  // later sessions can start high. The draw still happens for session 1 to
  // keep the rest of the random stream independent of that rule.
  const bool high_start = rng.uniform() < config.high_start_fraction && session_index > 1;
  session.k_start = high_start
                        ? rng.uniform(config.k_start_high_min, config.k_start_high_max)
                        : rng.uniform(config.k_start_normal_min, config.k_start_normal_max);
  session.k_end = rng.uniform(config.k_end_min, config.k_end_max);
  const double mains_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double wander_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  const double fs = config.sampling_rate;
  const double duration = config.session_duration_s;
  const std::size_t n = static_cast<std::size_t>(std::llround(duration * fs));
  const auto k_at = [&](double t) {
    return session.k_start + (session.k_end - session.k_start) * (t / duration);
  };

  // Beat train: fixed RR within the session, first beat at 0.5 s, stopping
  // short of the end so no beat is cut off mid-wave.
  const double rr = 60.0 / session.heart_rate_bpm;
  for (double t = 0.5; t < duration - 0.75; t += rr) session.r_times_s.push_back(t);

  // Patient-adjusted beat: the T-breadth factor scales sigma_T(K) as a whole,
  // widening or narrowing the T wave without touching its amplitude.
  BeatModel beat = config.beat;
  beat.t_sigma_base_s *= traits.t_width;
  beat.t_sigma_slope_s *= traits.t_width;

  // Shared source signal: superposition of beats, each with the K value at
  // its own time. Beats are evaluated over [-0.5, 1.2] s around the R peak,
  // beyond which every component is < 1e-9 mV.
  std::vector<double> source(n, 0.0);
  for (double r_time : session.r_times_s) {
    const double k = k_at(r_time);
    const std::size_t lo =
        static_cast<std::size_t>(std::max(0.0, std::ceil((r_time - 0.5) * fs)));
    const std::size_t hi = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::max(0.0, std::floor((r_time + 1.2) * fs))) + 1);
    for (std::size_t i = lo; i < hi; ++i)
      source[i] += beat.value(static_cast<double>(i) / fs - r_time, k);
  }

  EcgRecording& rec = session.recording;
  rec.patient_id = synth_patient_id(patient_index);
  rec.session_index = session_index;
  rec.sampling_rate = fs;
  rec.lead_names.reserve(kLeadCount);
  for (std::size_t l = 0; l < kLeadCount; ++l)
    rec.lead_names.push_back("L" + std::to_string(l + 1));

  const auto& mixing = lead_mixing();
  rec.samples.assign(kLeadCount, std::vector<double>(n));
  std::vector<double> interference(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    interference[i] =
        config.mains_amplitude_mv * std::sin(2.0 * std::numbers::pi * 50.0 * t + mains_phase) +
        config.wander_amplitude_mv * std::sin(2.0 * std::numbers::pi * 0.15 * t + wander_phase);
  }
  for (std::size_t l = 0; l < kLeadCount; ++l) {
    const double scale = traits.gain * mixing[l];
    auto& lead = rec.samples[l];
    if (config.noise_std_mv > 0.0) {
      for (std::size_t i = 0; i < n; ++i)
        lead[i] = scale * source[i] + interference[i] + config.noise_std_mv * rng.gaussian();
    } else {
      for (std::size_t i = 0; i < n; ++i) lead[i] = scale * source[i] + interference[i];
    }
  }
  rec.validate();

  const int n_meas = rng.uniform_int(config.min_measurements, config.max_measurements);
  const double lo = config.measurement_margin_s;
  const double hi = duration - config.measurement_margin_s;
  for (int i = 0; i < n_meas; ++i) {
    const double t = n_meas == 1
                         ? 0.5 * (lo + hi)
                         : lo + (hi - lo) * static_cast<double>(i) / (n_meas - 1);
    ConcentrationSample sample;
    sample.time_s = t;
    sample.value_mmol_l = k_at(t);
    sample.validate();
    session.annotations.push_back(sample);
  }
  return session;
}

std::vector<SessionData> generate_dataset(const SynthConfig& config) {
  config.validate();
  std::vector<SessionData> sessions;
  for (std::size_t p = 0; p < config.n_patients; ++p) {
    const int count = session_count(config, p);
    for (int s = 1; s <= count; ++s) sessions.push_back(generate_session(config, p, s));
  }
  return sessions;
}

SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  SynthConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "seed") config.seed = std::stoull(value);
      else if (key == "n_patients") config.n_patients = std::stoul(value);
      else if (key == "min_sessions") config.min_sessions = std::stoi(value);
      else if (key == "max_sessions") config.max_sessions = std::stoi(value);
      else if (key == "min_measurements") config.min_measurements = std::stoi(value);
      else if (key == "max_measurements") config.max_measurements = std::stoi(value);
      else if (key == "sampling_rate") config.sampling_rate = std::stod(value);
      else if (key == "session_duration_s") config.session_duration_s = std::stod(value);
      else if (key == "heart_rate_min_bpm") config.heart_rate_min_bpm = std::stod(value);
      else if (key == "heart_rate_max_bpm") config.heart_rate_max_bpm = std::stod(value);
      else if (key == "noise_std_mv") config.noise_std_mv = std::stod(value);
      else if (key == "mains_amplitude_mv") config.mains_amplitude_mv = std::stod(value);
      else if (key == "wander_amplitude_mv") config.wander_amplitude_mv = std::stod(value);
      else if (key == "gain_min") config.gain_min = std::stod(value);
      else if (key == "gain_max") config.gain_max = std::stod(value);
      else if (key == "t_width_min") config.t_width_min = std::stod(value);
      else if (key == "t_width_max") config.t_width_max = std::stod(value);
      else if (key == "k_end_min") config.k_end_min = std::stod(value);
      else if (key == "k_end_max") config.k_end_max = std::stod(value);
      else if (key == "k_start_normal_min") config.k_start_normal_min = std::stod(value);
      else if (key == "k_start_normal_max") config.k_start_normal_max = std::stod(value);
      else if (key == "k_start_high_min") config.k_start_high_min = std::stod(value);
      else if (key == "k_start_high_max") config.k_start_high_max = std::stod(value);
      else if (key == "high_start_fraction") config.high_start_fraction = std::stod(value);
      else if (key == "measurement_margin_s") config.measurement_margin_s = std::stod(value);
      else throw DataError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad value for '" + key + "'");
    }
  }
  config.validate();
  return config;
}

}  // namespace kalium

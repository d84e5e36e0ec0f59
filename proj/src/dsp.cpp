#include "kalium/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "kalium/errors.hpp"
#include "kalium/parallel.hpp"

namespace kalium {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread safe; executing distinct plans is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

struct SectionState {
  double z1 = 0, z2 = 0;
};

// DC gain of one section, H(z=1).
double section_dc_gain(const Biquad& s) {
  return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
}

// Constant-input steady state scaled for unit input (matches lfilter_zi).
SectionState steady_state(const Biquad& s) {
  const double y = section_dc_gain(s);
  return SectionState{y - s.b0, s.b2 - s.a2 * y};
}

void run_section(const Biquad& s, std::vector<double>& x, double x0) {
  SectionState st = steady_state(s);
  st.z1 *= x0;
  st.z2 *= x0;
  for (double& v : x) {
    const double in = v;
    const double out = s.b0 * in + st.z1;
    st.z1 = s.b1 * in - s.a1 * out + st.z2;
    st.z2 = s.b2 * in - s.a2 * out;
    v = out;
  }
}

void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& x) {
  if (x.empty()) return;
  double x0 = x.front();
  for (const auto& s : sections) {
    run_section(s, x, x0);
    x0 *= section_dc_gain(s);
  }
}

// Mirror extension (even reflection, edge sample not repeated).
std::vector<double> mirror_pad(const std::vector<double>& x, std::size_t pad) {
  const std::size_t n = x.size();
  pad = std::min(pad, n > 0 ? n - 1 : 0);
  std::vector<double> y;
  y.reserve(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) y.push_back(x[pad - i]);
  y.insert(y.end(), x.begin(), x.end());
  for (std::size_t i = 0; i < pad; ++i) y.push_back(x[n - 2 - i]);
  return y;
}

// In-place spectral notch: multiply each bin by 1 - exp(-(f-f0)^2/(2 s^2)).
// The transfer function is real and even, so the real transform's implied
// conjugate symmetry realizes the mirrored notch at -f0.
void spectral_notch(std::vector<double>& x, double fs, double f0, double sigma) {
  const std::size_t n = x.size();
  if (n < 2) return;
  const std::size_t n_bins = n / 2 + 1;

  std::vector<std::complex<double>> spectrum(n_bins);
  fftw_plan fwd, inv;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), x.data(),
                               reinterpret_cast<fftw_complex*>(spectrum.data()),
                               FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                               reinterpret_cast<fftw_complex*>(spectrum.data()), x.data(),
                               FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    const double d = (f - f0) / sigma;
    spectrum[k] *= 1.0 - std::exp(-0.5 * d * d);
  }
  fftw_execute(inv);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : x) v *= scale;
}

double butterworth_magnitude(int order, double cutoff_hz, double fs, bool highpass, double f) {
  // Bilinear design maps the unit circle onto the analog axis at
  // W = 2 fs tan(pi f / fs); prewarping pins the cutoff exactly.
  const double warped = 2.0 * fs * std::tan(kPi * f / fs);
  const double warped_cut = 2.0 * fs * std::tan(kPi * cutoff_hz / fs);
  double ratio;
  if (highpass) {
    if (warped == 0.0) return 0.0;
    ratio = warped_cut / warped;
  } else {
    ratio = warped / warped_cut;
  }
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2 * order));
}

}  // namespace

void FilterSpec::validate(double sampling_rate) const {
  if (!(sampling_rate > 0.0)) throw DataError("sampling rate must be positive");
  if (!(hp_cutoff_hz > 0.0) || !(hp_cutoff_hz < lp_cutoff_hz))
    throw DataError("highpass cutoff must satisfy 0 < hp < lp");
  if (!(lp_cutoff_hz < sampling_rate / 2.0))
    throw DataError("sampling rate too low for the lowpass cutoff (need fs > 2*lp)");
  if (!(notch_sigma_hz > 0.0)) throw DataError("notch sigma must be positive");
  if (!(notch_center_hz > 0.0) || !(notch_center_hz < sampling_rate / 2.0))
    throw DataError("notch center must lie in (0, fs/2)");
  if (hp_order < 1 || lp_order < 1) throw DataError("filter orders must be >= 1");
}

std::vector<Biquad> design_butterworth(int order, double cutoff_hz, double sampling_rate,
                                       bool highpass) {
  if (order < 1) throw DataError("filter order must be >= 1");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < sampling_rate / 2.0))
    throw DataError("cutoff must lie in (0, fs/2)");

  const double k = 2.0 * sampling_rate;  // bilinear constant 2/T
  const double warped_cut = k * std::tan(kPi * cutoff_hz / sampling_rate);

  // Left-half-plane prototype poles, then denormalize.
  std::vector<std::complex<double>> poles;
  for (int i = 1; i <= order; ++i) {
    const double theta = (2.0 * i - 1.0) * kPi / (2.0 * order);
    std::complex<double> p(-std::sin(theta), std::cos(theta));
    poles.push_back(highpass ? warped_cut / p : warped_cut * p);
  }

  // z = (k + s) / (k - s); zeros at infinity -> z = -1, at s = 0 -> z = +1.
  std::vector<Biquad> sections;
  const double zero_sign = highpass ? 1.0 : -1.0;
  std::vector<bool> used(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    Biquad s;
    const std::complex<double> zp = (k + poles[i]) / (k - poles[i]);
    if (std::abs(poles[i].imag()) < 1e-12 * std::abs(poles[i].real())) {
      // Real pole: first-order section.
      s.b0 = 1.0;
      s.b1 = -zero_sign;
      s.b2 = 0.0;
      s.a1 = -zp.real();
      s.a2 = 0.0;
    } else {
      // Pair with the conjugate.
      for (std::size_t j = i + 1; j < poles.size(); ++j) {
        if (!used[j] && std::abs(poles[j] - std::conj(poles[i])) <
                            1e-9 * std::abs(poles[i])) {
          used[j] = true;
          break;
        }
      }
      s.b0 = 1.0;
      s.b1 = -2.0 * zero_sign;
      s.b2 = 1.0;
      s.a1 = -2.0 * zp.real();
      s.a2 = std::norm(zp);
    }
    // Normalize gain at the reference frequency (DC for lowpass, Nyquist
    // for highpass), where the magnitude must be exactly 1.
    const double zr = highpass ? -1.0 : 1.0;
    const double num = s.b0 + s.b1 * zr + s.b2 * zr * zr;
    const double den = 1.0 + s.a1 * zr + s.a2 * zr * zr;
    const double g = den / num;
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
    sections.push_back(s);
  }
  return sections;
}

std::vector<double> sosfiltfilt(const std::vector<Biquad>& sections,
                                const std::vector<double>& x) {
  std::vector<double> y = x;
  run_cascade(sections, y);
  std::reverse(y.begin(), y.end());
  run_cascade(sections, y);
  std::reverse(y.begin(), y.end());
  return y;
}

std::vector<double> preprocess_signal(const std::vector<double>& signal, double sampling_rate,
                                      const FilterSpec& spec) {
  if (signal.empty()) throw DataError("empty signal");
  spec.validate(sampling_rate);

  const std::size_t pad = static_cast<std::size_t>(std::lround(2.0 * sampling_rate));
  std::vector<double> x = mirror_pad(signal, pad);
  const std::size_t applied_pad = (x.size() - signal.size()) / 2;

  const auto hp = design_butterworth(spec.hp_order, spec.hp_cutoff_hz, sampling_rate, true);
  const auto lp = design_butterworth(spec.lp_order, spec.lp_cutoff_hz, sampling_rate, false);
  x = sosfiltfilt(hp, x);
  x = sosfiltfilt(lp, x);
  spectral_notch(x, sampling_rate, spec.notch_center_hz, spec.notch_sigma_hz);

  return std::vector<double>(x.begin() + applied_pad, x.begin() + applied_pad + signal.size());
}

EcgRecording preprocess_recording(const EcgRecording& rec, const FilterSpec& spec) {
  rec.validate();
  EcgRecording out = rec;
  parallel_for(kLeadCount, [&](std::size_t l) {
    out.samples[l] = preprocess_signal(rec.samples[l], rec.sampling_rate, spec);
  });
  return out;
}

std::vector<std::complex<double>> frequency_response(const FilterSpec& spec,
                                                     double sampling_rate,
                                                     const std::vector<double>& freqs_hz) {
  spec.validate(sampling_rate);
  std::vector<std::complex<double>> gains;
  gains.reserve(freqs_hz.size());
  for (double f : freqs_hz) {
    if (!(f >= 0.0) || !(f < sampling_rate / 2.0))
      throw DataError("frequency out of range [0, fs/2)");
    const double hp =
        butterworth_magnitude(spec.hp_order, spec.hp_cutoff_hz, sampling_rate, true, f);
    const double lp =
        butterworth_magnitude(spec.lp_order, spec.lp_cutoff_hz, sampling_rate, false, f);
    const double d = (f - spec.notch_center_hz) / spec.notch_sigma_hz;
    const double notch = 1.0 - std::exp(-0.5 * d * d);
    gains.emplace_back(hp * hp * lp * lp * notch, 0.0);
  }
  return gains;
}

}  // namespace kalium

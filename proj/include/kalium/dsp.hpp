#pragma once

#include <complex>
#include <vector>

#include "kalium/types.hpp"

namespace kalium {

// The preprocessing chain: Butterworth highpass, Butterworth lowpass, and a
// spectral Gaussian notch. Orders and the zero-phase forward-backward
// application are fixed here; the cutoffs are the knobs.
struct FilterSpec {
  double hp_cutoff_hz = 0.3;
  double lp_cutoff_hz = 80.0;
  double notch_center_hz = 50.0;
  double notch_sigma_hz = 1.0;
  int hp_order = 3;
  int lp_order = 4;
  void validate(double sampling_rate) const;
};

// One second-order section, direct form II transposed, a0 normalized to 1.
struct Biquad {
  double b0 = 0, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

// Butterworth low/high pass as a cascade of second-order sections (plus one
// first-order section for odd orders), designed by bilinear transform with
// frequency prewarping at the cutoff.
std::vector<Biquad> design_butterworth(int order, double cutoff_hz, double sampling_rate,
                                       bool highpass);

// Zero-phase forward-backward application of an SOS cascade. Initial filter
// states are set to the constant-input steady state of the first/last sample.
std::vector<double> sosfiltfilt(const std::vector<Biquad>& sections,
                                const std::vector<double>& x);

// Full chain: highpass and lowpass forward-backward, then the Gaussian notch
// by frequency-domain multiplication with 1 - exp(-(f - f0)^2 / (2 sigma^2)).
// Edge effects are handled by mirror padding of 2 s on each side.
std::vector<double> preprocess_signal(const std::vector<double>& signal, double sampling_rate,
                                      const FilterSpec& spec = {});

// Applies preprocess_signal to every lead (leads run in parallel).
EcgRecording preprocess_recording(const EcgRecording& rec, const FilterSpec& spec = {});

// Composed gain of the designed chain at the given frequencies. Butterworth
// stages enter squared in magnitude (forward-backward application); the
// notch enters once. Zero phase, so the imaginary parts are zero. Serves as
// the independent oracle for preprocess_signal: it is evaluated from the
// analytic Butterworth magnitude on the prewarped frequency axis, not from
// the section coefficients.
std::vector<std::complex<double>> frequency_response(const FilterSpec& spec,
                                                     double sampling_rate,
                                                     const std::vector<double>& freqs_hz);

}  // namespace kalium

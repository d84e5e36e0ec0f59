#include "kalium/twave.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "kalium/errors.hpp"

namespace kalium {

// A T wave flatter than this is treated as absent rather than measured.
static constexpr double kMinTAmplitudeMv = 0.02;

TWaveMarks measure_t_wave(const BeatTemplate& tpl, double smoothing_hz) {
  tpl.validate();
  const double fs = tpl.sampling_rate;
  if (!(smoothing_hz > 0.0 && smoothing_hz < fs / 2.0))
    throw DataError("derivative smoothing cutoff must lie in (0, fs/2)");

  const auto window = t_search_window(tpl);
  if (!window || window->size() == 0)
    throw NumericError("no T-wave energy: empty T search window");

  const auto& s = tpl.waveform;
  const std::size_t n = s.size();

  TWaveMarks marks;

  // Baseline from the template head, which precedes the P wave.
  const std::size_t base_n = std::max<std::size_t>(
      1, std::min<std::size_t>(n, static_cast<std::size_t>(std::lround(0.08 * fs))));
  double base_sum = 0.0;
  for (std::size_t i = 0; i < base_n; ++i) base_sum += s[i];
  marks.baseline_mv = base_sum / static_cast<double>(base_n);

  marks.peak_index = window->begin;
  for (std::size_t i = window->begin; i < window->end; ++i)
    if (s[i] > s[marks.peak_index]) marks.peak_index = i;
  marks.amplitude_mv = s[marks.peak_index] - marks.baseline_mv;
  if (marks.amplitude_mv < kMinTAmplitudeMv)
    throw NumericError("flat T wave: amplitude " + std::to_string(marks.amplitude_mv) +
                       " mV below " + std::to_string(kMinTAmplitudeMv) + " mV");

  // Central-difference derivative of the smoothed template, in mV/s.
  // The smoother is a zero-phase Gaussian FIR with its -3 dB point at the
  // configured cutoff. Its kernel decays monotonically in time, so the QRS
  // complex cannot ring into the T-wave slope windows the way a recursive
  // lowpass would.
  const double sigma = std::sqrt(std::numbers::ln2) / (2.0 * std::numbers::pi * smoothing_hz) * fs;
  // Half-width capped so a single edge reflection always stays in range.
  const std::size_t half = std::min<std::size_t>(
      n - 1, std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(4.0 * sigma))));
  std::vector<double> kernel(2 * half + 1);
  double kernel_sum = 0.0;
  for (std::size_t j = 0; j < kernel.size(); ++j) {
    const double d = (static_cast<double>(j) - static_cast<double>(half)) / sigma;
    kernel[j] = std::exp(-0.5 * d * d);
    kernel_sum += kernel[j];
  }
  for (double& kv : kernel) kv /= kernel_sum;

  std::vector<double> smooth(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < kernel.size(); ++j) {
      // Even reflection at the template edges.
      std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(half);
      if (idx < 0) idx = -idx;
      if (idx >= static_cast<std::ptrdiff_t>(n)) idx = 2 * static_cast<std::ptrdiff_t>(n) - 2 - idx;
      acc += kernel[j] * s[static_cast<std::size_t>(idx)];
    }
    smooth[i] = acc;
  }
  std::vector<double> deriv(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i)
    deriv[i] = (smooth[i + 1] - smooth[i - 1]) * fs * 0.5;

  const std::size_t asc_span = static_cast<std::size_t>(std::lround(0.12 * fs));
  const std::size_t desc_span = static_cast<std::size_t>(std::lround(0.15 * fs));
  const std::size_t peak = marks.peak_index;

  const std::size_t asc_lo = std::max<std::size_t>(1, peak > asc_span ? peak - asc_span : 1);
  const std::size_t asc_hi = std::max<std::size_t>(asc_lo, std::min(peak, n - 2));
  marks.asc_index = asc_lo;
  for (std::size_t i = asc_lo; i <= asc_hi; ++i)
    if (deriv[i] > deriv[marks.asc_index]) marks.asc_index = i;
  marks.asc_slope_mv_s = std::max(0.0, deriv[marks.asc_index]);

  const std::size_t desc_lo = std::max<std::size_t>(1, std::min(peak, n - 2));
  const std::size_t desc_hi = std::min(n - 2, peak + desc_span);
  marks.desc_index = desc_lo;
  for (std::size_t i = desc_lo; i <= desc_hi; ++i)
    if (deriv[i] < deriv[marks.desc_index]) marks.desc_index = i;
  marks.desc_slope_mv_s = std::min(0.0, deriv[marks.desc_index]);

  return marks;
}

}  // namespace kalium

#pragma once

#include <cstddef>

#include "kalium/types.hpp"

namespace kalium {

// Landmarks measured on a reduced beat template.
struct TWaveMarks {
  double baseline_mv = 0.0;      // mean over the first 80 ms of the template
  std::size_t peak_index = 0;    // sample index of the T apex
  double amplitude_mv = 0.0;     // apex minus baseline
  std::size_t asc_index = 0;     // sample of the steepest ascent
  std::size_t desc_index = 0;    // sample of the steepest descent
  double asc_slope_mv_s = 0.0;   // >= 0
  double desc_slope_mv_s = 0.0;  // <= 0
};

// Locates the T apex inside the T search window and measures amplitude and
// the extreme slopes on either side of it. Slopes are taken from the central
// difference of the waveform after zero-phase lowpass smoothing at
// smoothing_hz, so ripple does not masquerade as a steep flank.
TWaveMarks measure_t_wave(const BeatTemplate& tpl, double smoothing_hz = 10.0);

}  // namespace kalium

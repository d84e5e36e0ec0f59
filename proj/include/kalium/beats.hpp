#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "kalium/types.hpp"

namespace kalium {

struct SegmentSpec {
  double half_window_s = 120.0;        // segment is [t-120, t+120] around a measurement
  double template_pre_s = 0.3;         // window before R
  double template_post_s = 0.6;        // window after R
  double beat_correlation_min = 0.85;  // outlier rejection vs the median beat
  bool causal = false;                 // [t-240, t] instead of centered
  void validate() const;
};

// A cut of the recording around one measurement instant.
struct Segment {
  std::vector<std::vector<double>> leads;  // [lead][sample]
  std::size_t start_index = 0;             // offset into the recording
  double coverage = 0.0;                   // achieved fraction of the 4 min window
  double sampling_rate = 0.0;
};

// R peak detection on a single trace: squared-derivative energy smoothed
// over 150 ms, thresholded at 0.4 x the rolling 95th percentile, refractory
// 250 ms. Scale invariant; returns strictly increasing sample indices.
std::vector<std::size_t> detect_r_peaks(const std::vector<double>& signal,
                                        double sampling_rate);

// Multi-lead variant: detection runs on the root-mean-square trace.
std::vector<std::size_t> detect_r_peaks(const std::vector<std::vector<double>>& leads,
                                        double sampling_rate);

// Cuts the [t - 120 s, t + 120 s] window (intersected with the recording).
// Throws when the measurement time is outside the recording or when less
// than half of the 4 min window is covered.
Segment cut_segment(const EcgRecording& rec, double t_s, const SegmentSpec& spec = {});

// Averages R-aligned beats into a template: beats are aligned on R, the
// pointwise median beat is computed first, beats correlating < 0.85 with it
// are discarded, and the survivors are averaged. Requires >= 3 usable beats
// before and after rejection. r_peaks are indices into `segment`.
BeatTemplate build_template(const std::vector<double>& segment, double sampling_rate,
                            const std::vector<std::size_t>& r_peaks,
                            const SegmentSpec& spec = {});

struct LeadReduction {
  std::array<double, kLeadCount> weights{};  // unit norm
};

// Reduces 8 aligned lead templates to one: weights are the dominant
// eigenvector of the 8x8 covariance of the lead samples over the T-search
// window, and the sign is fixed so the T-window extremum is positive.
std::pair<BeatTemplate, LeadReduction> reduce_leads(const std::vector<BeatTemplate>& templates);

}  // namespace kalium

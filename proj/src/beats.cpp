#include "kalium/beats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "kalium/errors.hpp"

namespace kalium {

namespace {

// Centered moving average with window length w (made odd), edges clamped.
std::vector<double> moving_average(const std::vector<double>& x, std::size_t w) {
  const std::size_t n = x.size();
  if (w < 1) w = 1;
  if (w % 2 == 0) ++w;
  const std::size_t half = w / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    y[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return y;
}

double percentile95(std::vector<double> block) {
  if (block.empty()) return 0.0;
  const std::size_t idx =
      static_cast<std::size_t>(0.95 * static_cast<double>(block.size() - 1));
  std::nth_element(block.begin(), block.begin() + static_cast<std::ptrdiff_t>(idx),
                   block.end());
  return block[idx];
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double denom = std::sqrt(saa * sbb);
  return denom > 0.0 ? sab / denom : 0.0;
}

}  // namespace

void SegmentSpec::validate() const {
  if (!(half_window_s > 0.0)) throw DataError("segment half window must be positive");
  if (!(template_pre_s > 0.0) || !(template_post_s > 0.0))
    throw DataError("template window must be positive");
  if (!(beat_correlation_min > 0.0 && beat_correlation_min < 1.0))
    throw DataError("beat correlation threshold must be in (0, 1)");
}

std::vector<std::size_t> detect_r_peaks(const std::vector<double>& signal,
                                        double sampling_rate) {
  if (!(sampling_rate > 0.0)) throw DataError("sampling rate must be positive");
  const std::size_t n = signal.size();
  if (static_cast<double>(n) < 5.0 * sampling_rate)
    throw DataError("R detection needs at least 5 s of signal");

  // Squared-derivative energy, smoothed over 150 ms.
  std::vector<double> energy(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d = (signal[i + 1] - signal[i - 1]) * sampling_rate * 0.5;
    energy[i] = d * d;
  }
  const auto smooth =
      moving_average(energy, static_cast<std::size_t>(std::lround(0.15 * sampling_rate)));

  // Adaptive threshold: 0.4 x 95th percentile per 2 s block.
  const std::size_t block = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                         std::lround(2.0 * sampling_rate)));
  std::vector<double> threshold(n, 0.0);
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t end = std::min(n, start + block);
    const double thr =
        0.4 * percentile95(std::vector<double>(smooth.begin() + static_cast<std::ptrdiff_t>(start),
                                               smooth.begin() + static_cast<std::ptrdiff_t>(end)));
    std::fill(threshold.begin() + static_cast<std::ptrdiff_t>(start),
              threshold.begin() + static_cast<std::ptrdiff_t>(end), thr);
  }

  // Local maxima of the smoothed energy above the threshold.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (smooth[i] > 0.0 && smooth[i] >= smooth[i - 1] && smooth[i] > smooth[i + 1] &&
        smooth[i] > threshold[i])
      candidates.push_back(i);
  }

  const std::size_t refractory =
      static_cast<std::size_t>(std::lround(0.25 * sampling_rate));
  const std::size_t refine = static_cast<std::size_t>(std::lround(0.10 * sampling_rate));

  // Refine each candidate to the extremum of |signal| nearby, then enforce
  // the refractory period keeping the larger peak.
  std::vector<std::size_t> peaks;
  for (std::size_t c : candidates) {
    const std::size_t lo = c >= refine ? c - refine : 0;
    const std::size_t hi = std::min(n, c + refine + 1);
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i < hi; ++i)
      if (std::abs(signal[i]) > std::abs(signal[best])) best = i;
    if (!peaks.empty()) {
      const std::size_t last = peaks.back();
      if (best <= last || best - last < refractory) {
        if (std::abs(signal[best]) > std::abs(signal[last])) peaks.back() = best;
        continue;
      }
    }
    peaks.push_back(best);
  }
  return peaks;
}

std::vector<std::size_t> detect_r_peaks(const std::vector<std::vector<double>>& leads,
                                        double sampling_rate) {
  if (leads.empty()) throw DataError("no leads given");
  const std::size_t n = leads[0].size();
  std::vector<double> rms(n, 0.0);
  for (const auto& lead : leads) {
    if (lead.size() != n) throw DataError("leads have unequal lengths");
    for (std::size_t i = 0; i < n; ++i) rms[i] += lead[i] * lead[i];
  }
  const double inv = 1.0 / static_cast<double>(leads.size());
  for (double& v : rms) v = std::sqrt(v * inv);
  return detect_r_peaks(rms, sampling_rate);
}

Segment cut_segment(const EcgRecording& rec, double t_s, const SegmentSpec& spec) {
  spec.validate();
  const double duration = rec.duration_s();
  if (!std::isfinite(t_s) || t_s < 0.0 || t_s > duration)
    throw DataError("measurement time " + std::to_string(t_s) +
                    " s lies outside the recording");

  const double lo_s = spec.causal ? t_s - 2.0 * spec.half_window_s : t_s - spec.half_window_s;
  const double hi_s = spec.causal ? t_s : t_s + spec.half_window_s;
  const double fs = rec.sampling_rate;
  const std::size_t n = rec.n_samples();

  const std::size_t start =
      lo_s <= 0.0 ? 0 : static_cast<std::size_t>(std::llround(lo_s * fs));
  const std::size_t end =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(hi_s * fs)));
  if (end <= start) throw DataError("empty segment window");

  Segment seg;
  seg.start_index = start;
  seg.sampling_rate = fs;
  seg.coverage =
      static_cast<double>(end - start) / fs / (2.0 * spec.half_window_s);
  if (seg.coverage < 0.5)
    throw DataError("segment coverage " + std::to_string(seg.coverage) +
                    " below 0.5, measurement rejected");
  seg.leads.reserve(rec.samples.size());
  for (const auto& lead : rec.samples)
    seg.leads.emplace_back(lead.begin() + static_cast<std::ptrdiff_t>(start),
                           lead.begin() + static_cast<std::ptrdiff_t>(end));
  return seg;
}

BeatTemplate build_template(const std::vector<double>& segment, double sampling_rate,
                            const std::vector<std::size_t>& r_peaks,
                            const SegmentSpec& spec) {
  spec.validate();
  const std::size_t pre = static_cast<std::size_t>(std::lround(spec.template_pre_s * sampling_rate));
  const std::size_t post =
      static_cast<std::size_t>(std::lround(spec.template_post_s * sampling_rate));
  const std::size_t len = pre + post;

  // Beats whose window exceeds the segment are excluded.
  std::vector<std::size_t> usable;
  for (std::size_t r : r_peaks)
    if (r >= pre && r + post <= segment.size()) usable.push_back(r);
  if (usable.size() < 3)
    throw DataError("too few beats in segment: " + std::to_string(usable.size()));

  std::vector<std::vector<double>> beats;
  beats.reserve(usable.size());
  for (std::size_t r : usable)
    beats.emplace_back(segment.begin() + static_cast<std::ptrdiff_t>(r - pre),
                       segment.begin() + static_cast<std::ptrdiff_t>(r + post));

  // Pointwise median beat as the robust reference.
  std::vector<double> median(len);
  std::vector<double> column(beats.size());
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t b = 0; b < beats.size(); ++b) column[b] = beats[b][i];
    const std::size_t mid = column.size() / 2;
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid),
                     column.end());
    if (column.size() % 2 == 1) {
      median[i] = column[mid];
    } else {
      const double upper = column[mid];
      std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid - 1),
                       column.end());
      median[i] = 0.5 * (column[mid - 1] + upper);
    }
  }

  std::vector<const std::vector<double>*> kept;
  for (const auto& beat : beats)
    if (pearson(beat, median) >= spec.beat_correlation_min) kept.push_back(&beat);
  if (kept.size() < 3)
    throw DataError("too few beats after outlier rejection: " + std::to_string(kept.size()));

  BeatTemplate tpl;
  tpl.waveform.assign(len, 0.0);
  for (const auto* beat : kept)
    for (std::size_t i = 0; i < len; ++i) tpl.waveform[i] += (*beat)[i];
  const double inv = 1.0 / static_cast<double>(kept.size());
  for (double& v : tpl.waveform) v *= inv;

  tpl.sampling_rate = sampling_rate;
  tpl.r_index = pre;
  tpl.beats_used = kept.size();
  double rr_sum = 0.0;
  for (std::size_t i = 1; i < usable.size(); ++i)
    rr_sum += static_cast<double>(usable[i] - usable[i - 1]);
  tpl.mean_rr_s = rr_sum / static_cast<double>(usable.size() - 1) / sampling_rate;
  tpl.validate();
  return tpl;
}

std::pair<BeatTemplate, LeadReduction> reduce_leads(const std::vector<BeatTemplate>& templates) {
  if (templates.size() != kLeadCount)
    throw DataError("lead reduction expects exactly 8 templates");
  const std::size_t len = templates[0].waveform.size();
  double mean_rr = 0.0;
  std::size_t beats_used = templates[0].beats_used;
  for (const auto& t : templates) {
    t.validate();
    if (t.waveform.size() != len || t.r_index != templates[0].r_index ||
        t.sampling_rate != templates[0].sampling_rate)
      throw DataError("lead templates are not aligned");
    mean_rr += t.mean_rr_s;
    beats_used = std::min(beats_used, t.beats_used);
  }
  mean_rr /= static_cast<double>(kLeadCount);

  BeatTemplate probe = templates[0];
  probe.mean_rr_s = mean_rr;
  const auto window = t_search_window(probe);
  if (!window || window->size() < 2) throw NumericError("no T-wave energy: empty T window");

  // 8x8 covariance of the lead samples over the T window.
  const std::size_t m = window->size();
  Eigen::MatrixXd tw(m, kLeadCount);
  for (std::size_t l = 0; l < kLeadCount; ++l)
    for (std::size_t i = 0; i < m; ++i)
      tw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) =
          templates[l].waveform[window->begin + i];
  const Eigen::RowVectorXd mean = tw.colwise().mean();
  tw.rowwise() -= mean;
  const Eigen::MatrixXd cov = tw.transpose() * tw;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const double max_eig = solver.eigenvalues()(kLeadCount - 1);
  if (!(max_eig > 0.0)) throw NumericError("no T-wave energy in any lead");
  Eigen::VectorXd w = solver.eigenvectors().col(kLeadCount - 1);

  BeatTemplate reduced;
  reduced.waveform.assign(len, 0.0);
  for (std::size_t l = 0; l < kLeadCount; ++l)
    for (std::size_t i = 0; i < len; ++i)
      reduced.waveform[i] += w(static_cast<Eigen::Index>(l)) * templates[l].waveform[i];

  // Fix the sign so the T-window extremum is positive.
  std::size_t ext = window->begin;
  for (std::size_t i = window->begin; i < window->end; ++i)
    if (std::abs(reduced.waveform[i]) > std::abs(reduced.waveform[ext])) ext = i;
  if (reduced.waveform[ext] == 0.0) throw NumericError("no T-wave energy in the reduction");
  if (reduced.waveform[ext] < 0.0) {
    w = -w;
    for (double& v : reduced.waveform) v = -v;
  }

  reduced.sampling_rate = templates[0].sampling_rate;
  reduced.r_index = templates[0].r_index;
  reduced.beats_used = beats_used;
  reduced.mean_rr_s = mean_rr;
  reduced.validate();

  LeadReduction lr;
  for (std::size_t l = 0; l < kLeadCount; ++l) lr.weights[l] = w(static_cast<Eigen::Index>(l));
  return {std::move(reduced), lr};
}

}  // namespace kalium

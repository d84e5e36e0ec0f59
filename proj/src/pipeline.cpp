#include "kalium/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kalium/errors.hpp"
#include "kalium/parallel.hpp"
#include "kalium/twave.hpp"

namespace kalium {

SessionFeatures process_session(const EcgRecording& recording,
                                const std::vector<ConcentrationSample>& annotations,
                                const PipelineOptions& options) {
  recording.validate();
  options.segments.validate();

  const EcgRecording clean = preprocess_recording(recording, options.filters);
  const auto peaks = detect_r_peaks(clean.samples, clean.sampling_rate);

  SessionFeatures out;
  int measurement_no = 0;
  for (const auto& annotation : annotations) {
    ++measurement_no;
    try {
      const Segment segment = cut_segment(clean, annotation.time_s, options.segments);
      const std::size_t seg_len = segment.leads[0].size();

      std::vector<std::size_t> local_peaks;
      for (std::size_t p : peaks)
        if (p >= segment.start_index && p - segment.start_index < seg_len)
          local_peaks.push_back(p - segment.start_index);

      std::vector<BeatTemplate> lead_templates;
      lead_templates.reserve(kLeadCount);
      for (const auto& lead : segment.leads)
        lead_templates.push_back(
            build_template(lead, segment.sampling_rate, local_peaks, options.segments));

      auto [reduced, reduction] = reduce_leads(lead_templates);
      const TWaveMarks marks = measure_t_wave(reduced, options.derivative_smoothing_hz);

      TWaveFeatureRow row;
      row.patient_id = recording.patient_id;
      row.session_index = recording.session_index;
      row.time_s = annotation.time_s;
      row.t_amplitude_mv = marks.amplitude_mv;
      row.asc_slope_mv_s = marks.asc_slope_mv_s;
      row.desc_slope_mv_s = marks.desc_slope_mv_s;
      row.k_mmol_l = annotation.value_mmol_l;
      row.validate();

      TemplateSeries series;
      {
        std::ostringstream id;
        id << recording.patient_id << "_s" << recording.session_index << "_m"
           << measurement_no;
        series.id = id.str();
      }
      series.k_mmol_l = annotation.value_mmol_l;
      const double fs = reduced.sampling_rate;
      series.time_s.reserve(reduced.waveform.size());
      for (std::size_t i = 0; i < reduced.waveform.size(); ++i)
        series.time_s.push_back((static_cast<double>(i) -
                                 static_cast<double>(reduced.r_index)) /
                                fs);
      series.mv = reduced.waveform;

      out.rows.push_back(std::move(row));
      out.templates.push_back(std::move(series));
    } catch (const DataError& e) {
      out.skips.push_back({recording.patient_id, recording.session_index,
                           annotation.time_s, e.what()});
    } catch (const NumericError& e) {
      out.skips.push_back({recording.patient_id, recording.session_index,
                           annotation.time_s, e.what()});
    }
  }
  return out;
}

PipelineResult run_pipeline(const std::filesystem::path& data_dir,
                            const PipelineOptions& options) {
  if (!std::filesystem::is_directory(data_dir))
    throw DataError("not a directory: " + data_dir.string());

  std::vector<std::filesystem::path> signal_files;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 11 && name.ends_with("_signal.csv"))
      signal_files.push_back(entry.path());
  }
  if (signal_files.empty())
    throw DataError("no recordings (*_signal.csv) found in " + data_dir.string());
  std::sort(signal_files.begin(), signal_files.end());

  std::vector<SessionFeatures> per_session(signal_files.size());
  parallel_for(signal_files.size(), [&](std::size_t i) {
    const auto& signal_path = signal_files[i];
    std::string ann_name = signal_path.filename().string();
    ann_name.replace(ann_name.size() - 11, 11, "_annotations.csv");
    const auto ann_path = signal_path.parent_path() / ann_name;
    if (!std::filesystem::exists(ann_path))
      throw DataError("missing annotations for " + signal_path.filename().string());
    const EcgRecording rec = load_recording(signal_path);
    const auto annotations = load_annotations(ann_path);
    per_session[i] = process_session(rec, annotations, options);
  });

  PipelineResult result;
  for (auto& session : per_session) {
    result.rows.insert(result.rows.end(), session.rows.begin(), session.rows.end());
    result.templates.insert(result.templates.end(), session.templates.begin(),
                            session.templates.end());
    result.skips.insert(result.skips.end(), session.skips.begin(), session.skips.end());
  }
  if (result.rows.empty())
    throw DataError("every measurement was rejected (see the skip log)");
  return result;
}

void store_skip_log(const std::vector<SkipRecord>& skips,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "patient_id,session_index,time_s,reason\n";
  for (const auto& skip : skips) {
    std::string reason = skip.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    out << skip.patient_id << "," << skip.session_index << ","
        << format_double(skip.time_s) << "," << reason << "\n";
  }
  if (!out.flush()) throw DataError("cannot write " + path.string());
}

std::vector<std::optional<double>> default_sweep_settings() {
  return {std::nullopt, 0.0, 0.5, 1.0};
}

std::vector<SweepRow> run_sweep(const std::vector<TWaveFeatureRow>& rows,
                                const std::vector<std::optional<double>>& wr_list,
                                const ModelOptions& base) {
  if (wr_list.empty()) throw DataError("sweep needs at least one weighting setting");
  std::vector<SweepRow> table;
  table.reserve(wr_list.size());
  for (const auto& wr : wr_list) {
    ModelOptions opts = base;
    opts.wr = wr;
    SweepRow row;
    row.label = wr ? "wr=" + format_double(*wr) : "no weights";
    row.wr = wr;
    row.report = cross_validate(rows, opts).report;
    table.push_back(std::move(row));
  }
  return table;
}

namespace {

std::string cell(const StratumMetrics& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f +- %.2f", m.mae, m.std);
  return buf;
}

}  // namespace

std::string render_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s  %-14s  %-14s  %-14s\n", "setting",
                "<5 mmol/l", ">=5 mmol/l", "all");
  out << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-12s  %-14s  %-14s  %-14s\n", row.label.c_str(),
                  cell(row.report.low).c_str(), cell(row.report.high).c_str(),
                  cell(row.report.all).c_str());
    out << line;
  }
  return out.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "setting,wr,mae_low,std_low,count_low,mae_high,std_high,count_high,"
         "mae_all,std_all,count_all,weighted_mae\n";
  for (const auto& row : rows) {
    out << row.label << "," << (row.wr ? format_double(*row.wr) : "") << ","
        << format_double(row.report.low.mae) << "," << format_double(row.report.low.std)
        << "," << row.report.low.count << "," << format_double(row.report.high.mae) << ","
        << format_double(row.report.high.std) << "," << row.report.high.count << ","
        << format_double(row.report.all.mae) << "," << format_double(row.report.all.std)
        << "," << row.report.all.count << "," << format_double(row.report.weighted_mae)
        << "\n";
  }
  return out.str();
}

}  // namespace kalium

#include "kalium/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "kalium/errors.hpp"

namespace kalium {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& cell, std::size_t line_no, const std::string& file) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw DataError(file + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
  return v;
}

long parse_int(const std::string& cell, std::size_t line_no, const std::string& file) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw DataError(file + ":" + std::to_string(line_no) + ": not an integer: '" + cell + "'");
  return v;
}

// Splits into lines, tolerating a trailing \r and a final newline.
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

json stratum_to_json(const StratumMetrics& s) {
  return json{{"mae", s.mae}, {"std", s.std}, {"count", s.count}};
}

StratumMetrics stratum_from_json(const json& j) {
  StratumMetrics s;
  s.mae = j.at("mae").get<double>();
  s.std = j.at("std").get<double>();
  s.count = j.at("count").get<std::size_t>();
  return s;
}

void require_version(const json& j, const std::string& file) {
  if (!j.contains("format_version"))
    throw DataError(file + ": missing format_version");
  if (j.at("format_version").get<int>() != 1)
    throw DataError(file + ": unsupported format_version " + j.at("format_version").dump());
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

RecordingName parse_recording_name(const std::filesystem::path& path) {
  static const std::regex re(R"((.+)_s(\d+)_(signal|annotations)\.csv)");
  std::smatch m;
  const std::string name = path.filename().string();
  if (std::regex_match(name, m, re)) {
    return RecordingName{m[1].str(), static_cast<int>(std::stol(m[2].str()))};
  }
  std::string stem = path.stem().string();
  const std::string suffix = "_signal";
  if (stem.size() > suffix.size() && stem.ends_with(suffix))
    stem.resize(stem.size() - suffix.size());
  return RecordingName{stem, 1};
}

EcgRecording load_recording(const std::filesystem::path& path) {
  const std::string file = path.filename().string();
  const auto lines = split_lines(read_file(path));
  if (lines.empty()) throw DataError(file + ": empty file");

  const auto header = split_line(lines[0]);
  if (header.empty() || header[0] != "time_s")
    throw DataError(file + ": malformed header, expected first column time_s");
  if (header.size() != kLeadCount + 1)
    throw DataError(file + ": lead count must be exactly 8, got " +
                    std::to_string(header.size() - 1));

  EcgRecording rec;
  const RecordingName rn = parse_recording_name(path);
  rec.patient_id = rn.patient_id;
  rec.session_index = rn.session_index;
  rec.lead_names.assign(header.begin() + 1, header.end());
  rec.samples.assign(kLeadCount, {});

  std::vector<double> times;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split_line(lines[i]);
    if (cells.size() != kLeadCount + 1)
      throw DataError(file + ":" + std::to_string(i + 1) + ": expected 9 columns");
    times.push_back(parse_double(cells[0], i + 1, file));
    for (std::size_t l = 0; l < kLeadCount; ++l) {
      const double v = parse_double(cells[l + 1], i + 1, file);
      if (!std::isfinite(v))
        throw DataError(file + ":" + std::to_string(i + 1) + ": non-finite sample");
      rec.samples[l].push_back(v);
    }
  }
  if (times.size() < 2) throw DataError(file + ": need at least two samples");

  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw DataError(file + ":" + std::to_string(i + 2) + ": non-monotone time column");

  const double span = times.back() - times.front();
  rec.sampling_rate = static_cast<double>(times.size() - 1) / span;
  const double dt = span / static_cast<double>(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs((times[i] - times[i - 1]) - dt) > 1e-3 * dt)
      throw DataError(file + ":" + std::to_string(i + 2) + ": non-uniform sampling");
  }

  rec.validate();
  return rec;
}

void store_recording(const EcgRecording& rec, const std::filesystem::path& path) {
  rec.validate();
  std::string out;
  out.reserve(rec.n_samples() * 80 + 64);
  out += "time_s";
  for (const auto& name : rec.lead_names) {
    if (name.find(',') != std::string::npos || name.find('\n') != std::string::npos)
      throw DataError("lead name contains a separator: '" + name + "'");
    out += ',';
    out += name;
  }
  out += '\n';
  const std::size_t n = rec.n_samples();
  for (std::size_t i = 0; i < n; ++i) {
    out += format_double(static_cast<double>(i) / rec.sampling_rate);
    for (std::size_t l = 0; l < kLeadCount; ++l) {
      out += ',';
      out += format_double(rec.samples[l][i]);
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<ConcentrationSample> load_annotations(const std::filesystem::path& path) {
  const std::string file = path.filename().string();
  const auto lines = split_lines(read_file(path));
  if (lines.empty()) throw DataError(file + ": empty file");
  if (lines[0] != "time_s,k_mmol_l")
    throw DataError(file + ": malformed header, expected time_s,k_mmol_l");

  std::vector<ConcentrationSample> samples;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split_line(lines[i]);
    if (cells.size() != 2)
      throw DataError(file + ":" + std::to_string(i + 1) + ": expected 2 columns");
    ConcentrationSample s;
    s.time_s = parse_double(cells[0], i + 1, file);
    s.value_mmol_l = parse_double(cells[1], i + 1, file);
    s.validate();
    samples.push_back(s);
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.time_s < b.time_s; });
  return samples;
}

void store_annotations(const std::vector<ConcentrationSample>& samples,
                       const std::filesystem::path& path) {
  std::string out = "time_s,k_mmol_l\n";
  for (const auto& s : samples) {
    s.validate();
    out += format_double(s.time_s);
    out += ',';
    out += format_double(s.value_mmol_l);
    out += '\n';
  }
  write_file(path, out);
}

std::string feature_table_csv(const std::vector<TWaveFeatureRow>& rows) {
  std::string out =
      "patient_id,session_index,time_s,t_amp_mv,asc_slope_mv_s,desc_slope_mv_s,k_mmol_l\n";
  for (const auto& r : rows) {
    r.validate();
    out += r.patient_id;
    out += ',';
    out += std::to_string(r.session_index);
    out += ',';
    out += format_double(r.time_s);
    out += ',';
    out += format_double(r.t_amplitude_mv);
    out += ',';
    out += format_double(r.asc_slope_mv_s);
    out += ',';
    out += format_double(r.desc_slope_mv_s);
    out += ',';
    out += format_double(r.k_mmol_l);
    out += '\n';
  }
  return out;
}

void store_feature_table(const std::vector<TWaveFeatureRow>& rows,
                         const std::filesystem::path& path) {
  write_file(path, feature_table_csv(rows));
}

std::vector<TWaveFeatureRow> load_feature_table(const std::filesystem::path& path) {
  const std::string file = path.filename().string();
  const auto lines = split_lines(read_file(path));
  if (lines.empty()) throw DataError(file + ": empty file");
  if (lines[0] !=
      "patient_id,session_index,time_s,t_amp_mv,asc_slope_mv_s,desc_slope_mv_s,k_mmol_l")
    throw DataError(file + ": malformed feature table header");

  std::vector<TWaveFeatureRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split_line(lines[i]);
    if (cells.size() != 7)
      throw DataError(file + ":" + std::to_string(i + 1) + ": expected 7 columns");
    TWaveFeatureRow r;
    r.patient_id = cells[0];
    r.session_index = static_cast<int>(parse_int(cells[1], i + 1, file));
    r.time_s = parse_double(cells[2], i + 1, file);
    r.t_amplitude_mv = parse_double(cells[3], i + 1, file);
    r.asc_slope_mv_s = parse_double(cells[4], i + 1, file);
    r.desc_slope_mv_s = parse_double(cells[5], i + 1, file);
    r.k_mmol_l = parse_double(cells[6], i + 1, file);
    r.validate();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string model_json(const PotassiumModel& model) {
  model.validate();
  json j;
  j["format_version"] = 1;
  j["feature_means"] = model.feature_means;
  j["feature_stds"] = model.feature_stds;
  j["basis"] = basis_name(model.basis);
  j["coefficients"] = model.coefficients;
  j["lambda"] = model.lambda;
  if (model.weighting.identity) {
    j["wr"] = nullptr;
    j["weighting"] = json{{"identity", true}};
  } else {
    j["wr"] = model.weighting.wr;
    j["weighting"] = json{{"identity", false},
                          {"bandwidth", model.weighting.bandwidth},
                          {"wr", model.weighting.wr},
                          {"training_values", model.weighting.training_values},
                          {"normalizer", model.weighting.normalizer}};
  }
  j["clamp_range"] = model.clamp_range;
  j["derivative_smoothing_hz"] = model.derivative_smoothing_hz;
  return j.dump(2) + "\n";
}

void store_model(const PotassiumModel& model, const std::filesystem::path& path) {
  write_file(path, model_json(model));
}

PotassiumModel load_model(const std::filesystem::path& path) {
  const std::string file = path.filename().string();
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(file + ": invalid JSON: " + e.what());
  }
  try {
    require_version(j, file);
    PotassiumModel m;
    m.feature_means = j.at("feature_means").get<std::array<double, 3>>();
    m.feature_stds = j.at("feature_stds").get<std::array<double, 3>>();
    m.basis = basis_from_name(j.at("basis").get<std::string>());
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    m.lambda = j.at("lambda").get<double>();
    const json& w = j.at("weighting");
    m.weighting.identity = w.at("identity").get<bool>();
    if (!m.weighting.identity) {
      m.weighting.bandwidth = w.at("bandwidth").get<double>();
      m.weighting.wr = w.at("wr").get<double>();
      m.weighting.training_values = w.at("training_values").get<std::vector<double>>();
      m.weighting.normalizer = w.at("normalizer").get<double>();
    }
    m.clamp_range = j.at("clamp_range").get<std::array<double, 2>>();
    m.derivative_smoothing_hz = j.at("derivative_smoothing_hz").get<double>();
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw DataError(file + ": missing or malformed field: " + e.what());
  }
}

std::string report_json(const EvaluationReport& report) {
  report.validate();
  json j;
  j["format_version"] = 1;
  j["lambda"] = report.lambda;
  if (report.wr)
    j["wr"] = *report.wr;
  else
    j["wr"] = nullptr;
  j["strata"] = json{{"below_5", stratum_to_json(report.low)},
                     {"at_or_above_5", stratum_to_json(report.high)},
                     {"all", stratum_to_json(report.all)}};
  j["offsets"] = report.offsets;
  j["weighted_mae"] = report.weighted_mae;
  j["skipped_patients"] = report.skipped_patients;
  return j.dump(2) + "\n";
}

void store_report(const EvaluationReport& report, const std::filesystem::path& path) {
  write_file(path, report_json(report));
}

EvaluationReport load_report(const std::filesystem::path& path) {
  const std::string file = path.filename().string();
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(file + ": invalid JSON: " + e.what());
  }
  try {
    require_version(j, file);
    EvaluationReport r;
    r.lambda = j.at("lambda").get<double>();
    if (!j.at("wr").is_null()) r.wr = j.at("wr").get<double>();
    r.low = stratum_from_json(j.at("strata").at("below_5"));
    r.high = stratum_from_json(j.at("strata").at("at_or_above_5"));
    r.all = stratum_from_json(j.at("strata").at("all"));
    r.offsets = j.at("offsets").get<std::map<std::string, double>>();
    r.weighted_mae = j.at("weighted_mae").get<double>();
    r.skipped_patients = j.at("skipped_patients").get<std::vector<std::string>>();
    r.validate();
    return r;
  } catch (const json::exception& e) {
    throw DataError(file + ": missing or malformed field: " + e.what());
  }
}

void store_template_table(const std::vector<TemplateSeries>& series,
                          const std::filesystem::path& path) {
  std::string out = "template_id,k_mmol_l,time_s,mv\n";
  for (const auto& s : series) {
    if (s.time_s.size() != s.mv.size())
      throw DataError("template series '" + s.id + "' has mismatched columns");
    for (std::size_t i = 0; i < s.time_s.size(); ++i) {
      out += s.id;
      out += ',';
      out += format_double(s.k_mmol_l);
      out += ',';
      out += format_double(s.time_s[i]);
      out += ',';
      out += format_double(s.mv[i]);
      out += '\n';
    }
  }
  write_file(path, out);
}

std::vector<TemplateSeries> load_template_table(const std::filesystem::path& path) {
  const std::string file = path.filename().string();
  const auto lines = split_lines(read_file(path));
  if (lines.empty()) throw DataError(file + ": empty file");
  if (lines[0] != "template_id,k_mmol_l,time_s,mv")
    throw DataError(file + ": malformed template table header");

  std::vector<TemplateSeries> series;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split_line(lines[i]);
    if (cells.size() != 4)
      throw DataError(file + ":" + std::to_string(i + 1) + ": expected 4 columns");
    const std::string& id = cells[0];
    if (series.empty() || series.back().id != id) {
      TemplateSeries s;
      s.id = id;
      s.k_mmol_l = parse_double(cells[1], i + 1, file);
      series.push_back(std::move(s));
    }
    series.back().time_s.push_back(parse_double(cells[2], i + 1, file));
    series.back().mv.push_back(parse_double(cells[3], i + 1, file));
  }
  return series;
}

}  // namespace kalium

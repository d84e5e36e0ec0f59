#include "kalium/regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "kalium/errors.hpp"

namespace kalium {

namespace {

double density_at(const std::vector<double>& values, double bandwidth, double c) {
  double sum = 0.0;
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  for (double v : values) {
    const double d = c - v;
    sum += std::exp(-d * d * inv);
  }
  return sum;
}

}  // namespace

WeightingCurve build_weighting_curve(const std::vector<double>& training_k, double wr,
                                     double bandwidth) {
  if (training_k.empty()) throw DataError("weighting curve needs training concentrations");
  WeightingCurve curve;
  curve.identity = false;
  curve.bandwidth = bandwidth;
  curve.wr = wr;
  curve.training_values = training_k;
  curve.normalizer = 0.0;
  for (double v : training_k)
    curve.normalizer = std::max(curve.normalizer, density_at(training_k, bandwidth, v));
  curve.validate();
  return curve;
}

WeightingCurve identity_weighting() {
  WeightingCurve curve;
  curve.identity = true;
  return curve;
}

double kernel_density(const WeightingCurve& curve, double k) {
  if (curve.identity) return 0.0;
  return density_at(curve.training_values, curve.bandwidth, k);
}

double weight_of(const WeightingCurve& curve, double k) {
  if (curve.identity) return 1.0;
  curve.validate();
  const double w = 1.0 - 0.5 * (1.0 + curve.wr) * kernel_density(curve, k) / curve.normalizer;
  // The density between training points can slightly exceed the normalizer,
  // so clamp to the intended range.
  return std::clamp(w, 0.5 * (1.0 - curve.wr), 1.0);
}

FeatureStats compute_feature_stats(const std::vector<TWaveFeatureRow>& rows) {
  if (rows.size() < 2) throw DataError("feature standardization needs at least 2 rows");
  FeatureStats stats;
  const double n = static_cast<double>(rows.size());
  for (const auto& row : rows) {
    stats.means[0] += row.t_amplitude_mv;
    stats.means[1] += row.asc_slope_mv_s;
    stats.means[2] += row.desc_slope_mv_s;
  }
  for (double& m : stats.means) m /= n;
  for (const auto& row : rows) {
    const std::array<double, 3> f = {row.t_amplitude_mv, row.asc_slope_mv_s,
                                     row.desc_slope_mv_s};
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = f[j] - stats.means[j];
      stats.stds[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < 3; ++j) {
    stats.stds[j] = std::sqrt(stats.stds[j] / n);
    // Relative threshold: identical values can leave a rounding-level std,
    // which would blow up the z-scores just as badly as an exact zero.
    if (!(stats.stds[j] > 1e-9 * std::max(1.0, std::abs(stats.means[j]))))
      throw DataError("feature " + std::to_string(j) + " has zero variance");
  }
  return stats;
}

std::vector<double> expand_basis(const std::array<double, 3>& z, PolyBasis basis) {
  std::vector<double> phi;
  phi.reserve(basis_size(basis));
  phi.push_back(1.0);
  if (basis == PolyBasis::kPerFeatureCubic) {
    for (double v : z) {
      phi.push_back(v);
      phi.push_back(v * v);
      phi.push_back(v * v * v);
    }
  } else {
    // All monomials z1^a z2^b z3^c with 1 <= a+b+c <= 3, a then b descending.
    for (int d = 1; d <= 3; ++d)
      for (int a = d; a >= 0; --a)
        for (int b = d - a; b >= 0; --b) {
          const int c = d - a - b;
          phi.push_back(std::pow(z[0], a) * std::pow(z[1], b) * std::pow(z[2], c));
        }
  }
  return phi;
}

DesignMatrix build_design(const std::vector<TWaveFeatureRow>& rows,
                          const FeatureStats& stats, PolyBasis basis) {
  DesignMatrix a;
  a.rows = rows.size();
  a.cols = basis_size(basis);
  a.values.reserve(a.rows * a.cols);
  for (const auto& row : rows) {
    const std::array<double, 3> z = {
        (row.t_amplitude_mv - stats.means[0]) / stats.stds[0],
        (row.asc_slope_mv_s - stats.means[1]) / stats.stds[1],
        (row.desc_slope_mv_s - stats.means[2]) / stats.stds[2],
    };
    const auto phi = expand_basis(z, basis);
    a.values.insert(a.values.end(), phi.begin(), phi.end());
  }
  return a;
}

namespace {

// y = A x for the row-major design matrix.
void matvec(const DesignMatrix& a, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t r = 0; r < a.rows; ++r) {
    double sum = 0.0;
    const double* row = &a.values[r * a.cols];
    for (std::size_t c = 0; c < a.cols; ++c) sum += row[c] * x[c];
    y[r] = sum;
  }
}

// g = A^T r.
void matvec_t(const DesignMatrix& a, const std::vector<double>& r, std::vector<double>& g) {
  std::fill(g.begin(), g.end(), 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* row = &a.values[i * a.cols];
    for (std::size_t c = 0; c < a.cols; ++c) g[c] += row[c] * r[i];
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Largest eigenvalue of A^T A by power iteration from a fixed start.
double lipschitz_bound(const DesignMatrix& a) {
  std::vector<double> v(a.cols, 1.0 / std::sqrt(static_cast<double>(a.cols)));
  std::vector<double> av(a.rows), atav(a.cols);
  double eig = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    matvec(a, v, av);
    matvec_t(a, av, atav);
    const double norm = std::sqrt(std::inner_product(atav.begin(), atav.end(),
                                                     atav.begin(), 0.0));
    if (!(norm > 0.0)) return 0.0;
    const double prev = eig;
    eig = norm;
    for (std::size_t c = 0; c < a.cols; ++c) v[c] = atav[c] / norm;
    if (iter > 4 && std::abs(eig - prev) <= 1e-12 * eig) break;
  }
  return eig;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

double wlasso_objective(const DesignMatrix& a, const std::vector<double>& b,
                        const std::vector<double>& w, const std::vector<double>& x,
                        double lambda, bool penalize_intercept) {
  std::vector<double> ax(a.rows);
  matvec(a, x, ax);
  double quad = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double r = w[i] * (ax[i] - b[i]);
    quad += r * r;
  }
  double l1 = 0.0;
  for (std::size_t c = penalize_intercept ? 0 : 1; c < x.size(); ++c) l1 += std::abs(x[c]);
  return 0.5 * quad + lambda * l1;
}

std::vector<double> fit_wlasso(const DesignMatrix& a, const std::vector<double>& b,
                               const std::vector<double>& w, const FitOptions& opts,
                               FitTrace* trace) {
  if (a.rows == 0 || a.cols == 0) throw DataError("empty design matrix");
  if (b.size() != a.rows || w.size() != a.rows)
    throw DataError("design matrix, targets and weights disagree in size");
  if (!(opts.lambda >= 0.0)) throw DataError("lambda must be >= 0");
  if (!(opts.tolerance > 0.0)) throw DataError("solver tolerance must be positive");
  double w_max = 0.0;
  for (double wi : w) {
    if (!(wi >= 0.0) || !std::isfinite(wi)) throw DataError("sample weights must be >= 0");
    w_max = std::max(w_max, wi);
  }
  if (w_max == 0.0) throw DataError("all sample weights are zero");
  for (double v : a.values)
    if (!std::isfinite(v)) throw DataError("non-finite design matrix entry");
  for (double v : b)
    if (!std::isfinite(v)) throw DataError("non-finite target value");

  // Fold the weights into the matrix and targets once.
  DesignMatrix aw;
  aw.rows = a.rows;
  aw.cols = a.cols;
  aw.values.resize(a.values.size());
  std::vector<double> bw(a.rows);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c)
      aw.values[r * a.cols + c] = w[r] * a.values[r * a.cols + c];
    bw[r] = w[r] * b[r];
  }

  const std::size_t first_penalized = opts.penalize_intercept ? 0 : 1;
  std::vector<double> x(a.cols, 0.0);

  const double lip = lipschitz_bound(aw);
  if (!(lip > 0.0)) {
    // All-zero weighted matrix: x = 0 is already optimal.
    if (trace) {
      trace->iterations = 0;
      trace->objective = wlasso_objective(a, b, w, x, opts.lambda, opts.penalize_intercept);
      trace->converged = true;
      trace->objectives.clear();
    }
    return x;
  }

  auto smooth_value = [&](const std::vector<double>& v, std::vector<double>& resid) {
    matvec(aw, v, resid);
    double quad = 0.0;
    for (std::size_t i = 0; i < aw.rows; ++i) {
      resid[i] -= bw[i];
      quad += resid[i] * resid[i];
    }
    return 0.5 * quad;
  };
  auto l1_value = [&](const std::vector<double>& v) {
    double l1 = 0.0;
    for (std::size_t c = first_penalized; c < v.size(); ++c) l1 += std::abs(v[c]);
    return opts.lambda * l1;
  };

  // Monotone accelerated proximal gradient: the prox step is taken from an
  // extrapolated point y, but the iterate x only moves when the objective
  // improves, so the reported objective never increases. Residuals are
  // carried for every tracked point; y is an affine combination of them, so
  // its residual combines the same way without an extra matrix product.
  std::vector<double> x_prev(a.cols, 0.0), y(a.cols, 0.0), z(a.cols);
  std::vector<double> resid_x(aw.rows), resid_prev(aw.rows), resid_y(aw.rows),
      resid_z(aw.rows);
  std::vector<double> grad(aw.cols), grad_x(aw.cols);
  smooth_value(x, resid_x);
  resid_prev = resid_x;
  resid_y = resid_x;
  double obj = l1_value(x) + 0.5 * dot(resid_x, resid_x);
  double step = 1.0 / lip;
  double t = 1.0;

  if (trace) {
    trace->objectives.clear();
    trace->converged = false;
  }

  std::size_t iter = 0;
  bool obj_settled = false;
  bool converged = false;
  for (; iter < opts.max_iterations; ++iter) {
    // Optimality is judged by the proximal-gradient residual of the accepted
    // iterate at the fixed safe step 1/L. Unlike the last backtracked step
    // length or the extrapolated point, this cannot be distorted by step
    // collapse or momentum overshoot.
    matvec_t(aw, resid_x, grad_x);
    double dx0_inf = 0.0, x_inf = 0.0;
    for (std::size_t c = 0; c < aw.cols; ++c) {
      const double raw = x[c] - grad_x[c] / lip;
      const double p = c >= first_penalized ? soft_threshold(raw, opts.lambda / lip) : raw;
      dx0_inf = std::max(dx0_inf, std::abs(p - x[c]));
      x_inf = std::max(x_inf, std::abs(x[c]));
    }
    if (iter > 0 && obj_settled &&
        dx0_inf <= 0.01 * opts.tolerance * std::max(1.0, x_inf)) {
      converged = true;
      break;
    }

    matvec_t(aw, resid_y, grad);
    const double f_y = 0.5 * dot(resid_y, resid_y);

    // One backtracked prox step: writes the candidate into z / resid_z and
    // returns its smooth value, halving the step until the quadratic
    // majorizer holds at the start point. The slack scales with the
    // objective: near the optimum the true descent sinks below rounding
    // noise in f, and an absolute slack would shrink the step to nothing
    // and stall the iteration.
    const auto prox_step = [&](const std::vector<double>& from, double f_from,
                               const std::vector<double>& g) {
      double f_cand = 0.0;
      for (int tries = 0; tries < 60; ++tries) {
        for (std::size_t c = 0; c < aw.cols; ++c) {
          const double raw = from[c] - step * g[c];
          z[c] = c >= first_penalized ? soft_threshold(raw, step * opts.lambda) : raw;
        }
        f_cand = smooth_value(z, resid_z);
        double lin = 0.0, dist = 0.0;
        for (std::size_t c = 0; c < aw.cols; ++c) {
          const double d = z[c] - from[c];
          lin += g[c] * d;
          dist += d * d;
        }
        if (f_cand <=
            f_from + lin + 0.5 * dist / step + 1e-12 * std::max(1.0, std::abs(f_from)))
          break;
        step *= 0.5;
      }
      return f_cand;
    };

    const double f_z = prox_step(y, f_y, grad);
    const double obj_z = f_z + l1_value(z);
    double obj_next;
    if (obj_z <= obj) {
      // Accept z; extrapolate along the accepted move x - x_prev.
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double c_x = (t - 1.0) / t_next;
      x_prev.swap(x);
      resid_prev.swap(resid_x);
      x.swap(z);
      resid_x.swap(resid_z);
      for (std::size_t c = 0; c < aw.cols; ++c)
        y[c] = x[c] + c_x * (x[c] - x_prev[c]);
      for (std::size_t i = 0; i < aw.rows; ++i)
        resid_y[i] = resid_x[i] + c_x * (resid_x[i] - resid_prev[i]);
      obj_next = obj_z;
      t = t_next;
    } else {
      // The extrapolated point overshot: restart the momentum and take a
      // plain prox step from x instead, reusing the gradient computed for
      // the optimality check. The restart breaks the slow oscillation
      // momentum develops on badly conditioned designs. The plain step is
      // accepted unconditionally: the majorizer guarantees it descends in
      // exact arithmetic, so an apparent increase is rounding noise, and
      // refusing it would freeze the iterate before the optimality residual
      // can settle.
      const double f_x = 0.5 * dot(resid_x, resid_x);
      const double f_p = prox_step(x, f_x, grad_x);
      x_prev = x;
      resid_prev = resid_x;
      x.swap(z);
      resid_x.swap(resid_z);
      y = x;
      resid_y = resid_x;
      obj_next = f_p + l1_value(x);
      t = 1.0;
    }
    if (trace) trace->objectives.push_back(obj_next);
    obj_settled = obj - obj_next <= opts.tolerance * std::max(1.0, std::abs(obj));
    obj = obj_next;
  }
  if (trace) trace->converged = converged;

  if (trace) {
    trace->iterations = iter;
    trace->objective = obj;
  }
  return x;
}

PotassiumModel fit_model(const std::vector<TWaveFeatureRow>& rows, const ModelOptions& opts,
                         FitTrace* trace) {
  if (rows.size() < 4) throw DataError("model fit needs at least 4 feature rows");
  for (const auto& row : rows) row.validate();
  if (opts.wr && !(*opts.wr >= 0.0 && *opts.wr <= 1.0))
    throw DataError("weighting ratio must be in [0, 1]");

  PotassiumModel model;
  const FeatureStats stats = compute_feature_stats(rows);
  model.feature_means = stats.means;
  model.feature_stds = stats.stds;
  model.basis = opts.basis;
  model.lambda = opts.lambda;
  model.clamp_range = opts.clamp_range;

  std::vector<double> k(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) k[i] = rows[i].k_mmol_l;
  model.weighting = opts.wr ? build_weighting_curve(k, *opts.wr) : identity_weighting();

  std::vector<double> w(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) w[i] = weight_of(model.weighting, k[i]);

  const DesignMatrix a = build_design(rows, stats, opts.basis);
  FitOptions fit;
  fit.lambda = opts.lambda;
  fit.tolerance = opts.tolerance;
  fit.max_iterations = opts.max_iterations;
  model.coefficients = fit_wlasso(a, k, w, fit, trace);
  model.validate();
  return model;
}

double predict(const PotassiumModel& model, double t_amplitude_mv, double asc_slope_mv_s,
               double desc_slope_mv_s) {
  const std::array<double, 3> z = {
      (t_amplitude_mv - model.feature_means[0]) / model.feature_stds[0],
      (asc_slope_mv_s - model.feature_means[1]) / model.feature_stds[1],
      (desc_slope_mv_s - model.feature_means[2]) / model.feature_stds[2],
  };
  const auto phi = expand_basis(z, model.basis);
  double y = 0.0;
  for (std::size_t c = 0; c < phi.size(); ++c) y += model.coefficients[c] * phi[c];
  return std::clamp(y, model.clamp_range[0], model.clamp_range[1]);
}

double predict(const PotassiumModel& model, const TWaveFeatureRow& row) {
  return predict(model, row.t_amplitude_mv, row.asc_slope_mv_s, row.desc_slope_mv_s);
}

double compute_offset(const PotassiumModel& model,
                      const std::vector<TWaveFeatureRow>& first_session_rows) {
  if (first_session_rows.empty())
    throw DataError("offset calibration needs at least one first-session row");
  double sum = 0.0;
  for (const auto& row : first_session_rows) sum += row.k_mmol_l - predict(model, row);
  return sum / static_cast<double>(first_session_rows.size());
}

namespace {

StratumMetrics metrics_of(const std::vector<double>& abs_errors) {
  StratumMetrics m;
  m.count = abs_errors.size();
  if (m.count == 0) return m;
  m.mae = std::accumulate(abs_errors.begin(), abs_errors.end(), 0.0) /
          static_cast<double>(m.count);
  double var = 0.0;
  for (double e : abs_errors) var += (e - m.mae) * (e - m.mae);
  m.std = std::sqrt(var / static_cast<double>(m.count));
  return m;
}

}  // namespace

ErrorSummary summarize_errors(const std::vector<double>& truth,
                              const std::vector<double>& predicted,
                              const WeightingCurve& weighting) {
  if (truth.size() != predicted.size())
    throw DataError("truth and prediction counts disagree");
  std::vector<double> low_err, high_err, all_err;
  double wsum = 0.0, wesum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = std::abs(predicted[i] - truth[i]);
    all_err.push_back(e);
    (truth[i] < kStratumBoundary ? low_err : high_err).push_back(e);
    const double w = weight_of(weighting, truth[i]);
    wsum += w;
    wesum += w * e;
  }
  ErrorSummary summary;
  summary.low = metrics_of(low_err);
  summary.high = metrics_of(high_err);
  summary.all = metrics_of(all_err);
  summary.weighted_mae = wsum > 0.0 ? wesum / wsum : 0.0;
  return summary;
}

CrossValResult cross_validate(const std::vector<TWaveFeatureRow>& rows,
                              const ModelOptions& opts) {
  std::map<std::string, std::vector<TWaveFeatureRow>> by_patient;
  for (const auto& row : rows) {
    row.validate();
    by_patient[row.patient_id].push_back(row);
  }
  if (by_patient.size() < 2)
    throw DataError("cross validation needs at least 2 patients");

  CrossValResult result;
  std::vector<double> truths, preds;

  for (const auto& [patient, patient_rows] : by_patient) {
    std::vector<TWaveFeatureRow> train;
    for (const auto& [other, other_rows] : by_patient)
      if (other != patient) train.insert(train.end(), other_rows.begin(), other_rows.end());

    std::vector<TWaveFeatureRow> first_session, later;
    for (const auto& row : patient_rows)
      (row.session_index <= 1 ? first_session : later).push_back(row);
    if (first_session.empty() || later.empty()) {
      result.report.skipped_patients.push_back(patient);
      continue;
    }

    FoldLog fold;
    fold.patient_id = patient;
    fold.train_rows = train.size();
    fold.eval_rows = later.size();
    fold.model = fit_model(train, opts);
    fold.offset = compute_offset(fold.model, first_session);

    std::stable_sort(later.begin(), later.end(),
                     [](const TWaveFeatureRow& a, const TWaveFeatureRow& b) {
                       return a.session_index != b.session_index
                                  ? a.session_index < b.session_index
                                  : a.time_s < b.time_s;
                     });
    for (const auto& row : later) {
      const double p = predict(fold.model, row) + fold.offset;
      fold.truths.push_back(row.k_mmol_l);
      fold.predictions.push_back(p);
      truths.push_back(row.k_mmol_l);
      preds.push_back(p);
    }
    result.report.offsets[patient] = fold.offset;
    result.folds.push_back(std::move(fold));
  }

  if (truths.empty()) throw DataError("no patient had evaluable later sessions");

  // The report's weighted MAE uses a curve over every row in the dataset so
  // runs with different wr are comparable on the same footing.
  WeightingCurve report_curve;
  if (opts.wr) {
    std::vector<double> all_k(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) all_k[i] = rows[i].k_mmol_l;
    report_curve = build_weighting_curve(all_k, *opts.wr);
  } else {
    report_curve = identity_weighting();
  }

  const ErrorSummary summary = summarize_errors(truths, preds, report_curve);
  result.report.low = summary.low;
  result.report.high = summary.high;
  result.report.all = summary.all;
  result.report.weighted_mae = summary.weighted_mae;
  result.report.wr = opts.wr;
  result.report.lambda = opts.lambda;
  result.report.validate();
  return result;
}

}  // namespace kalium

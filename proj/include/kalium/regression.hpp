#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kalium/types.hpp"

namespace kalium {

// --- Density weighting -------------------------------------------------

// Builds the weighting curve from training concentrations: a Gaussian
// kernel density d(c), normalized by its maximum over the training values,
// turned into a weight w(c) = 1 - (1+wr)/2 * d(c)/max(d). With wr = 0 the
// most common concentration keeps half its weight, with wr = 1 it is
// suppressed entirely; rare concentrations always keep weight ~1.
WeightingCurve build_weighting_curve(const std::vector<double>& training_k, double wr,
                                     double bandwidth = 0.25);

// Weighting that leaves every sample at weight 1 ("no weights").
WeightingCurve identity_weighting();

// Unnormalized kernel density of the training values at concentration k.
double kernel_density(const WeightingCurve& curve, double k);

// Weight assigned to a sample with true concentration k, in [(1-wr)/2, 1].
double weight_of(const WeightingCurve& curve, double k);

// --- Feature standardization and polynomial basis ----------------------

struct FeatureStats {
  std::array<double, 3> means{};
  std::array<double, 3> stds{};  // population std, each > 0
};

FeatureStats compute_feature_stats(const std::vector<TWaveFeatureRow>& rows);

// Expands standardized features into the polynomial basis, intercept first.
std::vector<double> expand_basis(const std::array<double, 3>& z, PolyBasis basis);

// Row-major design matrix.
struct DesignMatrix {
  std::vector<double> values;  // rows * cols entries
  std::size_t rows = 0;
  std::size_t cols = 0;
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

DesignMatrix build_design(const std::vector<TWaveFeatureRow>& rows,
                          const FeatureStats& stats, PolyBasis basis);

// --- Weighted LASSO solver ---------------------------------------------

struct FitOptions {
  double lambda = 0.9;
  double tolerance = 1e-8;         // relative objective decrease
  std::size_t max_iterations = 10000;
  bool penalize_intercept = false;
};

struct FitTrace {
  std::size_t iterations = 0;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> objectives;  // objective after each iteration
};

// J(x) = 1/2 ||w o (Ax - b)||^2 + lambda * ||x without intercept||_1.
double wlasso_objective(const DesignMatrix& a, const std::vector<double>& b,
                        const std::vector<double>& w, const std::vector<double>& x,
                        double lambda, bool penalize_intercept);

// Proximal gradient descent with Nesterov momentum and a backtracking line
// search; momentum steps are kept only when they improve the objective,
// otherwise the solver restarts with a plain descent step, so the objective
// never increases beyond rounding noise. Deterministic: starts from x = 0
// and uses no randomness beyond a fixed-seed power iteration for the
// initial step size.
std::vector<double> fit_wlasso(const DesignMatrix& a, const std::vector<double>& b,
                               const std::vector<double>& w, const FitOptions& opts,
                               FitTrace* trace = nullptr);

// --- Model-level API ----------------------------------------------------

struct ModelOptions {
  double lambda = 0.9;
  std::optional<double> wr;  // nullopt = identity weighting
  PolyBasis basis = PolyBasis::kPerFeatureCubic;
  std::array<double, 2> clamp_range{1.5, 9.0};
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
};

PotassiumModel fit_model(const std::vector<TWaveFeatureRow>& rows,
                         const ModelOptions& opts, FitTrace* trace = nullptr);

// Prediction clamped to the model's plausible concentration range.
double predict(const PotassiumModel& model, double t_amplitude_mv, double asc_slope_mv_s,
               double desc_slope_mv_s);
double predict(const PotassiumModel& model, const TWaveFeatureRow& row);

// Patient-specific calibration: mean of (truth - prediction) over the
// patient's first-session rows. Added to later predictions un-clamped.
double compute_offset(const PotassiumModel& model,
                      const std::vector<TWaveFeatureRow>& first_session_rows);

// --- Evaluation ----------------------------------------------------------

struct ErrorSummary {
  StratumMetrics low;   // truth < 5 mmol/l
  StratumMetrics high;  // truth >= 5 mmol/l
  StratumMetrics all;
  double weighted_mae = 0.0;
};

// MAE and population std of absolute errors per stratum; weighted_mae uses
// weighting-curve weights evaluated at the true concentrations.
ErrorSummary summarize_errors(const std::vector<double>& truth,
                              const std::vector<double>& predicted,
                              const WeightingCurve& weighting);

// One leave-one-patient-out fold, kept for inspection.
struct FoldLog {
  std::string patient_id;
  std::size_t train_rows = 0;
  std::size_t eval_rows = 0;
  double offset = 0.0;
  PotassiumModel model;
  std::vector<double> truths;       // session >= 2 rows, time order
  std::vector<double> predictions;  // offset-adjusted
};

struct CrossValResult {
  EvaluationReport report;
  std::vector<FoldLog> folds;
};

// Leave-one-patient-out protocol: fit on all rows of the other patients,
// calibrate the offset on the held-out patient's first session, evaluate on
// their later sessions. Patients without a first session or without later
// sessions are skipped (but still train other folds). The report's
// weighted MAE uses a curve built on all rows at the run's wr.
CrossValResult cross_validate(const std::vector<TWaveFeatureRow>& rows,
                              const ModelOptions& opts);

}  // namespace kalium

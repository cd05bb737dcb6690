#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rhfe/identification.hpp"
#include "rhfe/online_robust.hpp"
#include "rhfe/robust_design.hpp"

namespace rhfe {

/// Settings for one identification + design + Monte Carlo run.
///
/// Precedence: built-in defaults < JSON config file < command-line flags.
/// Seeds: the identification experiment uses `seed`; Monte Carlo replicate i
/// (0-based) uses `seed + 1 + i`.
struct ExperimentConfig {
    std::string model = "vtol";  // "vtol" or a model JSON path
    FaultConfig fault{{}, {0, 1}};
    int N = 1000;
    int p = 10;
    int L = 30;
    int m = 0;  // 0 means m = p
    double gamma_f2 = std::numeric_limits<double>::quiet_NaN();  // NaN: nominal-gain default
    double gamma_z2 = std::numeric_limits<double>::quiet_NaN();  // NaN: midpoint default
    double alpha = 300.0;
    double eta = 15.0;
    int mc = 1000;
    std::uint64_t seed = 1;
    int k_eval = 150;  // errors sampled for f(k_eval), window ends at k_eval + tau
    int trace_length = 200;
    int workers = 0;  // 0: hardware concurrency
    std::vector<std::string> algorithms{"alg0", "alg1", "alg2", "alg3"};
    std::vector<double> sweep_etas{0.0, 1.0, 2.0};
    int sweep_points = 8;
    std::string out = ".";

    int m_eff() const { return m > 0 ? m : p; }
};

std::string config_to_json(const ExperimentConfig& cfg);
/// Overlays the fields present in `text` on top of `base`.
ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base = {});
/// Structural checks that need no model (positivity, horizon ordering, names).
void validate(const ExperimentConfig& cfg);

GainKind parse_algorithm(const std::string& name);
const char* algorithm_name(GainKind k);

/// Model, identification, designs and tuning shared by every replicate.
struct Pipeline {
    Pipeline(StateSpaceModel m, ControllerConfig c) : model(std::move(m)), ctrl(std::move(c)) {}

    StateSpaceModel model;
    ControllerConfig ctrl;
    PredictorModel predictor;
    FaultConfig fault;
    FaultMatrices fm;
    MarkovSet truth;
    MarkovSet id;
    int tau = 0;
    std::optional<SensitivityStack> stack;
    std::optional<RobustProblem> prob;
    std::optional<DefaultTuning> tuning;
    EstimatorGain g0, g1;
    std::optional<EstimatorGain> g2;
    double gamma_f2 = std::numeric_limits<double>::quiet_NaN();
    double gamma_z2 = std::numeric_limits<double>::quiet_NaN();
    double gate_weight = 0.0;
    std::vector<std::string> warnings;
};

std::pair<StateSpaceModel, ControllerConfig> load_plant(const ExperimentConfig& cfg);

/// Identification and the requested designs. The robust problem is only
/// assembled when Alg2 or Alg3 is requested; gamma values are checked against
/// gamma_f_min2 and [0, inf) before any offline solve. A given `identified`
/// set replaces the identification experiment.
Pipeline build_pipeline(const ExperimentConfig& cfg, const sdp::SolverOptions& opts = {},
                        const MarkovSet* identified = nullptr);

/// Step-onset profile on n_f channels (sinusoid / step, alternating).
FaultProfile evaluation_profile(int n_f);

/// Constant reference at `eta` on every input channel.
ControllerConfig evaluation_controller(const Pipeline& pl, double eta);

struct AlgorithmMetrics {
    std::string name;
    Matrix errors;  // M x n_f, NaN rows for failed replicates
    Vector bias;    // mean error
    Matrix cov;     // population covariance (1/M)
    double rmse = 0.0;  // sqrt(mean ||e||^2 / n_f) = sqrt((||bias||^2 + tr cov) / n_f)
    Vector ellipse_center;
    Matrix ellipse_shape;  // 3 cov: {e : (e - c)^T shape^{-1} (e - c) = 1}
    int failures = 0;
    double runtime_s = 0.0;
    std::vector<int> trace_k;  // per-k mean error over replicates (Alg3 excluded)
    Matrix trace_mean;
};

struct GateStats {
    int windows = 0;
    int fired = 0;
    int fallbacks = 0;
    double mean_ms = 0.0;
    double max_ms = 0.0;
};

/// One point of the gamma_f2 sweep.
/// bias = sqrt(||mean||^2 / n_f), variance = tr(cov) / n_f, rmse^2 = bias^2 + variance.
struct SweepRow {
    double eta = 0.0;
    double gamma_f2 = 0.0;
    double gamma_z2 = 0.0;
    double bias = 0.0;
    double variance = 0.0;
    double rmse = 0.0;
    double design_variance = 0.0;
    std::string status;
};

/// Single-run estimates of every requested algorithm.
struct TraceData {
    Matrix f;  // T x n_f truth
    std::vector<std::string> names;
    std::vector<Matrix> estimates;  // T x n_f each, NaN before the window is full
};

struct MetricsReport {
    std::string fault;
    int tau = 0;
    int k_eval = 0;
    int mc = 0;
    double eta = 0.0;
    std::vector<AlgorithmMetrics> algorithms;
    GateStats gate;
    std::vector<GateLogEntry> gate_log;
    std::vector<SweepRow> sweep;
    std::optional<TraceData> trace;
    std::vector<std::string> warnings;

    const AlgorithmMetrics* find(const std::string& name) const;
};

/// Population statistics of an error sample (rows with NaN are skipped).
void summarize(AlgorithmMetrics& m);

/// M independent online datasets (fresh noise, shared identification), errors
/// collected at f(k_eval). Failed replicates are counted, not fatal.
MetricsReport monte_carlo(const ExperimentConfig& cfg, const Pipeline& pl,
                          const std::vector<std::string>& algorithms,
                          const sdp::SolverOptions& opts = {});

/// Alg2 evaluated over a gamma_f2 grid (gamma_z2 at the per-point midpoint)
/// for each reference level in cfg.sweep_etas. An empty grid uses
/// cfg.sweep_points values spread over (gamma_f_min2, 1).
std::vector<SweepRow> gamma_f_sweep(const ExperimentConfig& cfg, const Pipeline& pl,
                                    std::vector<double> grid = {}, const sdp::SolverOptions& opts = {});

TraceData trace_run(const ExperimentConfig& cfg, const Pipeline& pl, const std::vector<std::string>& algorithms,
                    const sdp::SolverOptions& opts = {});

/// Writes the CSV files of figure "2", "3a", "3b" or "4" into `dir` and
/// returns their paths. Throws UnknownFigure for other ids or when the report
/// lacks the data of that figure.
std::vector<std::string> figure_data(const MetricsReport& report, const std::string& figure_id,
                                     const std::string& dir);

std::string metrics_json(const MetricsReport& report);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace rhfe

#pragma once

#include <string>
#include <vector>

#include "rhfe/robust_design.hpp"

namespace rhfe {

struct OnlineContext {
    Matrix beta;  // n_bar x L, column i is beta_{k,i}
    Matrix B;     // L x L gram of the beta blocks
    Matrix cost;  // Sigma_eL + B kron Sigma_e
    int k = 0;
};

OnlineContext build_context(const SensitivityStack& stack, const StackedWindow& win,
                            const Matrix& Sigma_e);

/// Precomputed lambda_min(G_off Pi_z G_off^T) for the gate.
double gate_weight(const EstimatorGain& G_off, const RobustProblem& prob);

/// True when lambda_min(G_off Pi_z G_off^T) ||z||^2 > alpha.
bool gate(double weight, const StackedWindow& win, double alpha);
bool gate(const EstimatorGain& G_off, const RobustProblem& prob, const StackedWindow& win, double alpha);

DesignPoint solve_online_point(const OnlineContext& ctx, const RobustProblem& prob, double gamma_f2,
                               const sdp::SolverOptions& opts = {});
EstimatorGain solve_online(const OnlineContext& ctx, const RobustProblem& prob, double gamma_f2,
                           const sdp::SolverOptions& opts = {});

struct GateLogEntry {
    int k = 0;
    bool gate_fired = false;
    std::string solver_status;
    double solve_ms = 0.0;
    double gamma_f2 = 0.0;
};

struct Alg3Result {
    Matrix estimates;  // T x n_f, NaN before the window is full
    std::vector<GateLogEntry> log;
};

/// Runs the gated online design over every full window of the trajectory.
/// Failed online solves fall back to the offline gain and are logged.
Alg3Result run_alg3(const TrajectoryDataset& traj, const EstimatorGain& G_off, const RobustProblem& prob,
                    const SensitivityStack& stack, double alpha, double gamma_f2,
                    const sdp::SolverOptions& opts = {});

/// Estimate for the single window ending at k (gated online design).
Vector alg3_estimate(const StackedWindow& win, const EstimatorGain& G_off, const RobustProblem& prob,
                     const SensitivityStack& stack, double weight, double alpha, double gamma_f2,
                     GateLogEntry* entry = nullptr, const sdp::SolverOptions& opts = {});

std::string gate_log_csv(const std::vector<GateLogEntry>& log);

}  // namespace rhfe

#pragma once

#include "rhfe/simulator.hpp"
#include "rhfe/system_model.hpp"

namespace rhfe {

/// Column t of Z_id stacks [u(t-p); y(t-p); ...; u(t-1); y(t-1); u(t)] and the
/// matching column of Y_id is y(t), for t = p..T-1. Without feedthrough the
/// trailing u(t) is dropped and H_0^u is fixed to zero: under output feedback
/// without delay u(t) is correlated with e(t) and would bias the fit.
struct RegressionData {
    Matrix Y_id;
    Matrix Z_id;
    int p = 0;
    int n_bar = 0;
    int nu = 0;
    int ny = 0;
    bool feedthrough = true;
};

struct LsFit {
    Matrix Xi_hat;  // n_y x rows(Z_id), blocks [H_p^u H_p^y ... H_1^u H_1^y H_0^u]
    Matrix Z_pinv;  // N_bar x rows(Z_id), Z_id^T (Z_id Z_id^T)^{-1}
    Matrix E_hat;   // n_y x N_bar residual
};

/// Data matrices without any excitation or length checks.
RegressionData regression_matrices(const Matrix& u, const Matrix& y, int p, bool feedthrough = true);

/// Checked construction: fault-free data, T >= p + 10, cond(Z Z^T) <= 1e12.
RegressionData build_regression(const TrajectoryDataset& traj, int p, bool feedthrough = true);

LsFit ls_identify(const RegressionData& reg);

/// Sample covariance of the residual columns, floored at 1e-10 * max(trace, 1).
Matrix innovation_cov(const Matrix& residual);

/// Slices H_i and the sensitivities M_i (i = 0..p) out of the fit and forms
/// the fault blocks for the given configuration. Blocks past p are implicitly zero.
MarkovSet extract_markov(const LsFit& fit, const FaultConfig& cfg, const RegressionData& reg);

/// Assembles Xi = [H_p^u H_p^y ... H_1^u H_1^y H_0^u] from a Markov set.
Matrix assemble_xi(const MarkovSet& ms, int p);

/// build_regression -> ls_identify -> innovation_cov -> extract_markov.
/// `feedthrough` selects whether H_0^u = D is estimated (see RegressionData).
MarkovSet identify(const TrajectoryDataset& traj, int p, const FaultConfig& cfg, bool feedthrough = false);

}  // namespace rhfe

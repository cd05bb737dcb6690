#pragma once

#include <limits>
#include <string>
#include <vector>

#include "rhfe/simulator.hpp"
#include "rhfe/system_model.hpp"

namespace rhfe {

/// (i, j) block = H_{i-j} for i >= j, zero above the diagonal.
Matrix block_toeplitz(const std::vector<Matrix>& H, int L);

/// (i, j) block = H_{i+j+1} (0-based i, j), i.e. H_1 in the top-left corner.
Matrix block_hankel(const std::vector<Matrix>& H, int L, int m);

/// [hankel, first L - tau block columns of Tf].
Matrix build_upsilon(const Matrix& hankel, const Matrix& Tf, int L, int tau, int n_f);

/// Selector picking f(k - tau) (the last n_f unknowns) out of [zeta; f-stack].
Matrix fault_selector(int n_cols, int n_f);

/// Oldest-first stacked samples k-L+1..k.
struct StackedWindow {
    Vector y_win;
    Vector u_win;
    int k = 0;
    int L = 0;

    Vector z() const;
};

StackedWindow make_window(const Matrix& u, const Matrix& y, int k, int L);
inline StackedWindow make_window(const TrajectoryDataset& traj, int k, int L) {
    return make_window(traj.u, traj.y, k, L);
}

/// r = (I - Ty) y_win - Tu u_win
Vector residual(const Matrix& Ty, const Matrix& Tu, const StackedWindow& win);

enum class GainKind { Alg0, Nominal, OfflineRobust, OnlineRobust };
const char* to_string(GainKind k);
GainKind gain_kind_from_string(const std::string& s);

struct EstimatorGain {
    Matrix Gmat;  // n_f x n_y L
    Matrix Ty;    // n_y L x n_y L
    Matrix Tu;    // n_y L x n_u L
    int L = 0;
    int m = 0;
    int tau = 0;
    GainKind kind = GainKind::Nominal;
    double gamma_f2 = std::numeric_limits<double>::quiet_NaN();
    double gamma_z2 = std::numeric_limits<double>::quiet_NaN();
    std::string solver_status = "none";

    int n_f() const { return static_cast<int>(Gmat.rows()); }
};

/// Toeplitz/Hankel data of one Markov set for a given horizon.
struct WindowMatrices {
    Matrix Ty, Tu, Tf_tau, hankel, upsilon;
    int L = 0, m = 0, tau = 0, n_f = 0;
};

WindowMatrices window_matrices(const MarkovSet& ms, int L, int m, int tau);

/// I (U^T S^-1 U)^+ U^T S^-1 with S = I_L kron Sigma_e.
Matrix nominal_gain_matrix(const Matrix& upsilon, const Matrix& Sigma_e, int L, int n_f);

EstimatorGain nominal_gain(const WindowMatrices& wm, const Matrix& Sigma_e, GainKind kind);

/// Estimate of f(k - tau) from the window ending at k.
Vector estimate(const EstimatorGain& gain, const StackedWindow& win);

/// Row k holds the estimate of f(k - tau) for the window ending at k, or NaN
/// while the window is not yet full.
Matrix estimate_trajectory(const EstimatorGain& gain, const TrajectoryDataset& traj);

/// Windowed least-squares estimator built directly from the plant matrices
/// (free initial state, stacked process and measurement noise covariance).
EstimatorGain original_model_gain(const StateSpaceModel& model, const FaultConfig& cfg, int L,
                                  int tau);

}  // namespace rhfe

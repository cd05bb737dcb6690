#pragma once

#include <limits>
#include <string>
#include <vector>

#include "rhfe/estimator.hpp"
#include "rhfe/sdp.hpp"
#include "rhfe/system_model.hpp"

namespace rhfe {

/// Sensitivities of the window matrices to the identification residual.
/// Every stack has L row blocks of height n_bar.
struct SensitivityStack {
    Matrix Mbar_Lm_o;     // Hankel of M_i^u
    Matrix Mbar_L_u;      // Toeplitz of M_i^u
    Matrix Mbar_L_y;      // Toeplitz of M_i^y
    Matrix Mbar_Ltau_f;   // first L - tau block columns of the Toeplitz of M_i^f
    Matrix Mbar_Upsilon;  // [Mbar_Lm_o, Mbar_Ltau_f]
    Matrix Mbar_L_z;      // [Mbar_L_y, Mbar_L_u], acts on z = [y_win; u_win]
    int L = 0;
    int n_bar = 0;
};

SensitivityStack build_sensitivity(const MarkovSet& markov, int L, int m, int tau);

/// P[i][j] = tr(M_i M_j^T) over the L row blocks of M.
Matrix row_block_gram(const Matrix& M, int L);

struct GramBlocks {
    Matrix P_Upsilon;
    Matrix P_z;
};
GramBlocks gram_blocks(const SensitivityStack& stack);

struct RobustProblem {
    WindowMatrices wm;
    Matrix Sigma_e;
    Matrix Sigma_eL;
    Matrix P_Upsilon, P_z;
    Matrix Pi_f, Pi_z;
    Matrix G0;           // I Upsilon^T Pi_f^{-1}
    Matrix selector;     // n_f x cols(Upsilon)
    Matrix W_f;          // W_f W_f^T = [[Pi_f, -Upsilon], [-Upsilon^T, I]]
    Matrix W_z;          // W_z W_z^T = Pi_z
    double pi_f_regularization = 0.0;

    int n_f() const { return wm.n_f; }
    int L() const { return wm.L; }
};

/// Pi_f is regularized by eps I (eps = 1e-10 trace) when its smallest eigenvalue is below eps.
RobustProblem build_problem(const WindowMatrices& wm, const Matrix& Sigma_e, const Matrix& P_Upsilon,
                            const Matrix& P_z);

/// Convenience: window matrices, sensitivities and grams from one identified set.
RobustProblem build_problem(const MarkovSet& markov, int L, int m, int tau);

/// lambda_max of the expected fault-channel bias matrix [G I] M [G I]^T.
double bias_f(const RobustProblem& prob, const Matrix& G);
/// lambda_max(G Pi_z G^T).
double bias_z(const RobustProblem& prob, const Matrix& G);
/// tr(G Sigma_eL G^T).
double variance(const RobustProblem& prob, const Matrix& G);

struct GammaFMin {
    double gamma_f_min2 = 0.0;
    Matrix G0;
};
GammaFMin gamma_f_min(const RobustProblem& prob);

/// One solved design with its independently recomputed metrics.
struct DesignPoint {
    Matrix G;
    double gamma_f2 = std::numeric_limits<double>::quiet_NaN();
    double gamma_z2 = std::numeric_limits<double>::quiet_NaN();
    double bias_f = 0.0;
    double bias_z = 0.0;
    double variance = 0.0;
    sdp::Solution solution;
};

/// Programs (exposed for direct inspection and for infeasibility tests).
struct DesignProgram {
    sdp::ConicProgram prog;
    sdp::GainLayout gain;
    int gamma_var = -1;
};
DesignProgram g1_program(const RobustProblem& prob, double gamma_f2, const Matrix& cost);
DesignProgram gamma_z_min_program(const RobustProblem& prob, double gamma_f2);
DesignProgram offline_program(const RobustProblem& prob, double gamma_f2, double gamma_z2);

DesignPoint gamma_z_min(const RobustProblem& prob, double gamma_f2,
                        const sdp::SolverOptions& opts = {});
/// minimize tr(G Sigma_eL G^T) subject to the fault-channel constraint only;
/// gamma_z2 of the result is gamma_{z,1}^2.
DesignPoint solve_G1(const RobustProblem& prob, double gamma_f2, const sdp::SolverOptions& opts = {});
DesignPoint solve_offline_point(const RobustProblem& prob, double gamma_f2, double gamma_z2,
                                const sdp::SolverOptions& opts = {});

EstimatorGain to_gain(const RobustProblem& prob, const DesignPoint& d, GainKind kind);
EstimatorGain solve_offline(const RobustProblem& prob, double gamma_f2, double gamma_z2,
                            const sdp::SolverOptions& opts = {});

/// Default tuning: gamma_f2 from the nominal gain, gamma_z2 at the midpoint of [z_min, z_1].
struct DefaultTuning {
    double gamma_f_min2 = 0.0;
    double gamma_f2 = 0.0;
    double gamma_z_min2 = 0.0;
    double gamma_z1_2 = 0.0;
    double gamma_z2 = 0.0;
};
DefaultTuning default_tuning(const RobustProblem& prob, const Matrix& G_nominal,
                             const sdp::SolverOptions& opts = {});

struct TradeoffRow {
    double gamma_f2 = 0.0;
    double gamma_z2 = 0.0;
    double bias_f = 0.0;
    double bias_z = 0.0;
    double variance = 0.0;
    std::string status;
};

/// Solves the offline problem at every (gamma_f2, gamma_z2) pair; failures
/// are recorded in the status column instead of aborting.
std::vector<TradeoffRow> tradeoff_sweep(const RobustProblem& prob,
                                        const std::vector<double>& gamma_f2_grid,
                                        const std::vector<double>& gamma_z2_grid,
                                        const sdp::SolverOptions& opts = {});

std::string tradeoff_csv(const std::vector<TradeoffRow>& rows);

}  // namespace rhfe

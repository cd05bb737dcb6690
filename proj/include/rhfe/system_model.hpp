#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rhfe/common.hpp"

namespace rhfe {

struct ModelChecks {
    // |1 - |lambda|| below this counts as "on the unit circle".
    double unit_circle_tol = 1e-8;
};

/// Discrete-time plant
///   x(k+1) = A x(k) + B u(k) + E f(k) + F w(k)
///   y(k)   = C x(k) + D u(k) + G f(k) + v(k)
/// with w ~ N(0, Q), v ~ N(0, R). The fault channels (E, G) are not part of
/// the plant; they are derived from a FaultConfig by fault_matrices().
///
/// The constructor validates dimensions, covariance definiteness, detectability
/// of (C, A) and the absence of uncontrollable unit-circle modes of
/// (A, F Q^{1/2}); violations throw InvalidModel.
class StateSpaceModel {
public:
    StateSpaceModel(Matrix A, Matrix B, Matrix C, Matrix D, Matrix F, Matrix Q, Matrix R,
                    ModelChecks checks = {});

    const Matrix& A() const { return A_; }
    const Matrix& B() const { return B_; }
    const Matrix& C() const { return C_; }
    const Matrix& D() const { return D_; }
    const Matrix& F() const { return F_; }
    const Matrix& Q() const { return Q_; }
    const Matrix& R() const { return R_; }
    const ModelChecks& checks() const { return checks_; }

    int n() const { return static_cast<int>(A_.rows()); }
    int nu() const { return static_cast<int>(B_.cols()); }
    int ny() const { return static_cast<int>(C_.rows()); }
    int nw() const { return static_cast<int>(F_.cols()); }

private:
    Matrix A_, B_, C_, D_, F_, Q_, R_;
    ModelChecks checks_;
};

/// Innovation form x(k+1) = Phi x + Btilde u + Etilde f + K y, y = C x + D u + G f + e.
struct PredictorModel {
    Matrix Phi;
    Matrix Btilde;
    Matrix K;
    Matrix C;
    Matrix D;
    Matrix Sigma_e;
    Matrix P;  // steady-state one-step prediction error covariance

    int n() const { return static_cast<int>(Phi.rows()); }
    int nu() const { return static_cast<int>(Btilde.cols()); }
    int ny() const { return static_cast<int>(C.rows()); }
};

/// Additive faults on a set of sensors and/or actuators (0-based indices).
/// Fault columns are ordered sensors first, then actuators.
struct FaultConfig {
    std::vector<int> sensors;
    std::vector<int> actuators;

    static FaultConfig sensor(int j) { return {{j}, {}}; }
    static FaultConfig actuator(int l) { return {{}, {l}}; }
    static FaultConfig simultaneous(int j, int l) { return {{j}, {l}}; }

    int n_f() const { return static_cast<int>(sensors.size() + actuators.size()); }
    bool sensor_only() const { return actuators.empty() && !sensors.empty(); }
    std::string describe() const;
};

struct FaultMatrices {
    Matrix E;       // n x n_f
    Matrix G;       // n_y x n_f
    Matrix Etilde;  // n x n_f
};

/// Markov parameters of the predictor (true or identified), indexed 0..count.
/// For identified sets the sensitivity blocks M_i (N_bar x width) map the
/// identification innovations E_id to the parameter errors: dH_i = E_id M_i.
struct MarkovSet {
    std::vector<Matrix> Hu, Hy, Hf;
    std::vector<Matrix> Mu, My, Mf;
    int p = 0;       // truncation lag; 0 means untruncated (true parameters)
    int n_bar = 0;   // identification column count, 0 for true parameters
    Matrix Sigma_e;

    int count() const { return static_cast<int>(Hu.size()) - 1; }
    int nu() const { return static_cast<int>(Hu.front().cols()); }
    int ny() const { return static_cast<int>(Hu.front().rows()); }
    int n_f() const { return static_cast<int>(Hf.front().cols()); }
    bool has_sensitivities() const { return !Mu.empty(); }
};

/// Returns seq[i], or a zero block shaped like seq[0] when i is past the end.
Matrix block_or_zero(const std::vector<Matrix>& seq, int i);

/// Fixed-point iteration of the filtering Riccati equation.
PredictorModel steady_state_predictor(const StateSpaceModel& model,
                                      double tol = 1e-12, int max_iter = 100000);

FaultMatrices fault_matrices(const StateSpaceModel& model, const PredictorModel& predictor,
                             const FaultConfig& cfg);

/// H_i for i = 0..count (no sensitivities).
MarkovSet markov_parameters(const PredictorModel& predictor, const FaultMatrices& fm, int count);

/// Smallest i with H_i^f nonzero; requires rank(H_tau^f) == n_f.
int relative_degree(const MarkovSet& markov, int n_f);

enum class Verdict { Unbiased, AsymptoticallyUnbiased, Biased };
const char* to_string(Verdict v);

struct UnbiasednessReport {
    std::vector<std::complex<double>> transmission_zeros;
    std::vector<std::complex<double>> unobservable_modes;
    int observability_index = 0;
    int tau = 0;
    Verdict verdict = Verdict::Unbiased;
};

/// The fault subsystem (Phi, Etilde, C, G) seen by the estimator.
struct FaultSubsystem {
    Matrix Phi;
    Matrix Etilde;
    Matrix C;
    Matrix G;
};

/// Classifies the invariant zeros of [Phi - lambda I, Etilde; O_{tau+1}, H_tau^f].
UnbiasednessReport analyze_fault_subsystem(const FaultSubsystem& sys, std::uint64_t seed = 7);

UnbiasednessReport unbiasedness_check(const PredictorModel& predictor, const FaultMatrices& fm);

/// Warning text when the horizon is shorter than nu + tau.
std::optional<std::string> horizon_warning(const UnbiasednessReport& report, int L);

}  // namespace rhfe

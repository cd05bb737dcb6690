#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rhfe/system_model.hpp"

namespace rhfe {

struct ReferenceSource {
    enum class Kind { White, Constant };
    Kind kind = Kind::Constant;
    Matrix cov;    // White: covariance (n_u x n_u)
    Vector level;  // Constant: value (n_u)

    static ReferenceSource white(const Matrix& cov) { return {Kind::White, cov, Vector()}; }
    static ReferenceSource constant(const Vector& level) { return {Kind::Constant, Matrix(), level}; }
};

/// u(k) = -Ky y(k) + eta(k)
struct ControllerConfig {
    Matrix Ky;
    ReferenceSource reference;
};

struct Waveform {
    enum class Kind { Zero, Constant, Sinusoid };
    Kind kind = Kind::Zero;
    double amplitude = 0.0;
    double omega = 0.0;  // rad / sample
    double phase = 0.0;

    double value(int k) const;
};

/// Faults are zero for k <= onset and follow the channel waveforms afterwards.
struct FaultProfile {
    int onset = 0;
    std::vector<Waveform> channels;

    int n_f() const { return static_cast<int>(channels.size()); }
    Vector at(int k) const;
    static FaultProfile none(int n_f);
};

struct TrajectoryDataset {
    Matrix u;    // T x n_u
    Matrix y;    // T x n_y
    Matrix f;    // T x n_f
    Matrix eta;  // T x n_u
    std::uint64_t seed = 0;

    int length() const { return static_cast<int>(u.rows()); }
};

struct SimulationOptions {
    std::optional<Vector> x0;
};

TrajectoryDataset simulate_closed_loop(const StateSpaceModel& model, const ControllerConfig& ctrl,
                                       const FaultProfile& fault, const FaultConfig& cfg, int T,
                                       std::uint64_t seed, const SimulationOptions& opts = {});

/// Spectral radius of the closed loop with the static output feedback.
double closed_loop_radius(const StateSpaceModel& model, const Matrix& Ky);
std::optional<std::string> closed_loop_warning(const StateSpaceModel& model, const Matrix& Ky);

/// exp([[Ac, Bc], [0, 0]] h) partitioned into (A, B).
std::pair<Matrix, Matrix> zoh_discretize(const Matrix& Ac, const Matrix& Bc, double h);

/// Linearized VTOL aircraft sampled at 0.5 s with its stabilizing output
/// feedback. The reference defaults to white noise with identity covariance.
std::pair<StateSpaceModel, ControllerConfig> vtol_model();

/// Two channels: sin(0.1 pi k) and 1 for k > 50, zero before.
FaultProfile step_sine_fault_profile();

}  // namespace rhfe

#include "rhfe/simulator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace rhfe {

double Waveform::value(int k) const {
    switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return amplitude;
        case Kind::Sinusoid: return amplitude * std::sin(omega * static_cast<double>(k) + phase);
    }
    return 0.0;
}

Vector FaultProfile::at(int k) const {
    Vector f = Vector::Zero(n_f());
    if (k <= onset) return f;
    for (int i = 0; i < n_f(); ++i) f(i) = channels[static_cast<std::size_t>(i)].value(k);
    return f;
}

FaultProfile FaultProfile::none(int n_f) {
    return FaultProfile{0, std::vector<Waveform>(static_cast<std::size_t>(n_f))};
}

namespace {

// Independent Gaussian stream per noise source, derived from (seed, stream).
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream)};
        rng_.seed(seq);
    }
    Vector draw(const Matrix& factor) {
        Vector z(factor.cols());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = nd_(rng_);
        return factor * z;
    }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> nd_;
};

Matrix cov_factor(const Matrix& cov) {
    if (cov.size() == 0) return cov;
    return linalg::psd_factor(cov, 1e-12);
}

}  // namespace

TrajectoryDataset simulate_closed_loop(const StateSpaceModel& model, const ControllerConfig& ctrl,
                                       const FaultProfile& fault, const FaultConfig& cfg, int T,
                                       std::uint64_t seed, const SimulationOptions& opts) {
    if (T < 1) fail(ErrorCode::InvalidArgument, "T must be >= 1");
    const int n = model.n(), nu = model.nu(), ny = model.ny(), nf = cfg.n_f();
    if (ctrl.Ky.rows() != nu || ctrl.Ky.cols() != ny) {
        fail(ErrorCode::ShapeMismatch, "controller gain must be n_u x n_y");
    }
    if (fault.n_f() != nf) fail(ErrorCode::ShapeMismatch, "fault profile channel count != n_f");

    PredictorModel dummy;
    dummy.K = Matrix::Zero(n, ny);
    dummy.Btilde = model.B();
    const FaultMatrices fm = nf ? fault_matrices(model, dummy, cfg)
                                : FaultMatrices{Matrix::Zero(n, 0), Matrix::Zero(ny, 0), Matrix()};

    const Matrix Wf = model.F() * cov_factor(model.Q());
    const Matrix Vf = cov_factor(model.R());
    Matrix Ef;
    Vector level = Vector::Zero(nu);
    if (ctrl.reference.kind == ReferenceSource::Kind::White) {
        if (ctrl.reference.cov.rows() != nu || ctrl.reference.cov.cols() != nu) {
            fail(ErrorCode::ShapeMismatch, "reference covariance must be n_u x n_u");
        }
        Ef = cov_factor(ctrl.reference.cov);
    } else {
        if (ctrl.reference.level.size() != nu) {
            fail(ErrorCode::ShapeMismatch, "reference level must have n_u entries");
        }
        level = ctrl.reference.level;
    }

    // u = -Ky (C x + D u + G f + v) + eta  ->  (I + Ky D) u = -Ky (C x + G f + v) + eta
    const Eigen::PartialPivLU<Matrix> loop(Matrix::Identity(nu, nu) + ctrl.Ky * model.D());

    GaussianStream w_stream(seed, 1), v_stream(seed, 2), eta_stream(seed, 3);
    TrajectoryDataset out;
    out.u.resize(T, nu);
    out.y.resize(T, ny);
    out.f.resize(T, nf);
    out.eta.resize(T, nu);
    out.seed = seed;

    Vector x = opts.x0 ? *opts.x0 : Vector::Zero(n);
    if (x.size() != n) fail(ErrorCode::ShapeMismatch, "x0 has wrong dimension");
    for (int k = 0; k < T; ++k) {
        const Vector f = fault.at(k);
        const Vector w = Wf.cols() ? w_stream.draw(Wf) : Vector::Zero(n);
        const Vector v = Vf.cols() ? v_stream.draw(Vf) : Vector::Zero(ny);
        const Vector eta = Ef.size() ? eta_stream.draw(Ef) : level;
        const Vector y_free = model.C() * x + fm.G * f + v;
        const Vector u = loop.solve(-ctrl.Ky * y_free + eta);
        const Vector y = y_free + model.D() * u;
        out.u.row(k) = u.transpose();
        out.y.row(k) = y.transpose();
        out.f.row(k) = f.transpose();
        out.eta.row(k) = eta.transpose();
        x = model.A() * x + model.B() * u + fm.E * f + w;
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12) {
            fail(ErrorCode::DivergedState, "state diverged at k = " + std::to_string(k));
        }
    }
    return out;
}

double closed_loop_radius(const StateSpaceModel& model, const Matrix& Ky) {
    const int nu = model.nu();
    const Matrix loop = (Matrix::Identity(nu, nu) + Ky * model.D()).inverse();
    return linalg::spectral_radius(model.A() - model.B() * loop * Ky * model.C());
}

std::optional<std::string> closed_loop_warning(const StateSpaceModel& model, const Matrix& Ky) {
    const double rho = closed_loop_radius(model, Ky);
    if (rho < 1.0) return std::nullopt;
    std::ostringstream os;
    os << "closed loop is not stable (spectral radius " << rho << ")";
    return os.str();
}

std::pair<Matrix, Matrix> zoh_discretize(const Matrix& Ac, const Matrix& Bc, double h) {
    const Eigen::Index n = Ac.rows(), m = Bc.cols();
    Matrix M = Matrix::Zero(n + m, n + m);
    M.topLeftCorner(n, n) = Ac * h;
    M.topRightCorner(n, m) = Bc * h;
    const Matrix E = M.exp();
    return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

std::pair<StateSpaceModel, ControllerConfig> vtol_model() {
    Matrix Ac(4, 4), Bc(4, 2), C(4, 4), Ky(2, 4);
    Ac << -0.0366, 0.0271, 0.0188, -0.4555,
          0.0482, -1.01, 0.0024, -4.0208,
          0.1002, 0.3681, -0.707, 1.42,
          0, 0, 1, 0;
    Bc << 0.4422, 0.1761,
          3.5446, -7.5922,
          -5.52, 4.49,
          0, 0;
    C << 1, 0, 0, 0,
         0, 1, 0, 0,
         0, 0, 1, 0,
         0, 1, 1, 1;
    Ky << 0, 0, -0.5, 0,
          0, 0, -0.1, -0.1;
    auto [A, B] = zoh_discretize(Ac, Bc, 0.5);
    StateSpaceModel model(A, B, C, Matrix::Zero(4, 2), Matrix::Identity(4, 4),
                          0.16 * Matrix::Identity(4, 4), 0.64 * Matrix::Identity(4, 4));
    ControllerConfig ctrl{Ky, ReferenceSource::white(Matrix::Identity(2, 2))};
    return {std::move(model), std::move(ctrl)};
}

FaultProfile step_sine_fault_profile() {
    FaultProfile fp;
    fp.onset = 50;
    fp.channels = {Waveform{Waveform::Kind::Sinusoid, 1.0, 0.1 * std::numbers::pi, 0.0},
                   Waveform{Waveform::Kind::Constant, 1.0, 0.0, 0.0}};
    return fp;
}

}  // namespace rhfe

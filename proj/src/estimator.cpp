#include "rhfe/estimator.hpp"

#include <cmath>

namespace rhfe {

Matrix block_toeplitz(const std::vector<Matrix>& H, int L) {
    if (L < 1) fail(ErrorCode::InvalidArgument, "L must be >= 1");
    const Eigen::Index r = H.front().rows(), c = H.front().cols();
    Matrix T = Matrix::Zero(L * r, L * c);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j <= i; ++j) T.block(i * r, j * c, r, c) = block_or_zero(H, i - j);
    return T;
}

Matrix block_hankel(const std::vector<Matrix>& H, int L, int m) {
    if (L < 1 || m < 1) fail(ErrorCode::InvalidArgument, "L and m must be >= 1");
    const Eigen::Index r = H.front().rows(), c = H.front().cols();
    Matrix T(L * r, m * c);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < m; ++j) T.block(i * r, j * c, r, c) = block_or_zero(H, i + j + 1);
    return T;
}

Matrix build_upsilon(const Matrix& hankel, const Matrix& Tf, int L, int tau, int n_f) {
    if (tau < 0 || tau >= L) fail(ErrorCode::InvalidArgument, "tau must lie in [0, L)");
    if (hankel.rows() != Tf.rows() || Tf.cols() != static_cast<Eigen::Index>(L) * n_f) {
        fail(ErrorCode::ShapeMismatch, "Hankel and fault Toeplitz shapes disagree");
    }
    Matrix U(hankel.rows(), hankel.cols() + (L - tau) * n_f);
    U << hankel, Tf.leftCols((L - tau) * n_f);
    return U;
}

Matrix fault_selector(int n_cols, int n_f) {
    Matrix I = Matrix::Zero(n_f, n_cols);
    I.rightCols(n_f) = Matrix::Identity(n_f, n_f);
    return I;
}

Vector StackedWindow::z() const {
    Vector out(y_win.size() + u_win.size());
    out << y_win, u_win;
    return out;
}

StackedWindow make_window(const Matrix& u, const Matrix& y, int k, int L) {
    if (k < L - 1 || k >= u.rows()) {
        fail(ErrorCode::WindowNotFull, "window ending at k = " + std::to_string(k) + " with L = " +
                                           std::to_string(L) + " is not available");
    }
    StackedWindow w;
    w.k = k;
    w.L = L;
    const Eigen::Index nu = u.cols(), ny = y.cols();
    w.u_win.resize(L * nu);
    w.y_win.resize(L * ny);
    for (int i = 0; i < L; ++i) {
        w.u_win.segment(i * nu, nu) = u.row(k - L + 1 + i).transpose();
        w.y_win.segment(i * ny, ny) = y.row(k - L + 1 + i).transpose();
    }
    return w;
}

Vector residual(const Matrix& Ty, const Matrix& Tu, const StackedWindow& win) {
    if (Ty.rows() != win.y_win.size() || Tu.cols() != win.u_win.size()) {
        fail(ErrorCode::WindowNotFull, "window length does not match the Toeplitz matrices");
    }
    return win.y_win - Ty * win.y_win - Tu * win.u_win;
}

const char* to_string(GainKind k) {
    switch (k) {
        case GainKind::Alg0: return "Alg0";
        case GainKind::Nominal: return "Nominal";
        case GainKind::OfflineRobust: return "OfflineRobust";
        case GainKind::OnlineRobust: return "OnlineRobust";
    }
    return "Unknown";
}

GainKind gain_kind_from_string(const std::string& s) {
    if (s == "Alg0") return GainKind::Alg0;
    if (s == "Nominal") return GainKind::Nominal;
    if (s == "OfflineRobust") return GainKind::OfflineRobust;
    if (s == "OnlineRobust") return GainKind::OnlineRobust;
    fail(ErrorCode::InvalidArgument, "unknown estimator kind '" + s + "'");
}

WindowMatrices window_matrices(const MarkovSet& ms, int L, int m, int tau) {
    WindowMatrices wm;
    wm.L = L;
    wm.m = m;
    wm.tau = tau;
    wm.n_f = ms.n_f();
    wm.Ty = block_toeplitz(ms.Hy, L);
    wm.Tu = block_toeplitz(ms.Hu, L);
    const Matrix Tf = block_toeplitz(ms.Hf, L);
    wm.Tf_tau = Tf.leftCols((L - tau) * wm.n_f);
    wm.hankel = block_hankel(ms.Hu, L, m);
    wm.upsilon = build_upsilon(wm.hankel, Tf, L, tau, wm.n_f);
    return wm;
}

Matrix nominal_gain_matrix(const Matrix& upsilon, const Matrix& Sigma_e, int L, int n_f) {
    const Eigen::Index ny = Sigma_e.rows();
    if (upsilon.rows() != L * ny) fail(ErrorCode::ShapeMismatch, "Upsilon rows != L n_y");
    const Eigen::LLT<Matrix> llt(Sigma_e);
    if (llt.info() != Eigen::Success) fail(ErrorCode::SingularCovariance, "Sigma_e not PD");
    const Matrix Si = llt.solve(Matrix::Identity(ny, ny));
    Matrix SiU(upsilon.rows(), upsilon.cols());
    for (int i = 0; i < L; ++i) SiU.middleRows(i * ny, ny) = Si * upsilon.middleRows(i * ny, ny);
    const Matrix info = linalg::symmetrize(upsilon.transpose() * SiU);
    const Matrix sel = fault_selector(static_cast<int>(upsilon.cols()), n_f);
    return sel * linalg::pinv(info) * SiU.transpose();
}

EstimatorGain nominal_gain(const WindowMatrices& wm, const Matrix& Sigma_e, GainKind kind) {
    EstimatorGain g;
    g.Gmat = nominal_gain_matrix(wm.upsilon, Sigma_e, wm.L, wm.n_f);
    g.Ty = wm.Ty;
    g.Tu = wm.Tu;
    g.L = wm.L;
    g.m = wm.m;
    g.tau = wm.tau;
    g.kind = kind;
    return g;
}

Vector estimate(const EstimatorGain& gain, const StackedWindow& win) {
    if (win.L != gain.L) fail(ErrorCode::WindowNotFull, "window horizon != estimator horizon");
    return gain.Gmat * residual(gain.Ty, gain.Tu, win);
}

Matrix estimate_trajectory(const EstimatorGain& gain, const TrajectoryDataset& traj) {
    const int T = traj.length();
    Matrix out = Matrix::Constant(T, gain.n_f(), std::numeric_limits<double>::quiet_NaN());
    for (int k = gain.L - 1; k < T; ++k) {
        out.row(k) = estimate(gain, make_window(traj, k, gain.L)).transpose();
    }
    return out;
}

EstimatorGain original_model_gain(const StateSpaceModel& model, const FaultConfig& cfg, int L,
                                  int tau) {
    const int n = model.n(), ny = model.ny(), nw = model.nw();
    PredictorModel dummy;
    dummy.K = Matrix::Zero(n, ny);
    dummy.Btilde = model.B();
    const FaultMatrices fm = fault_matrices(model, dummy, cfg);
    const int nf = cfg.n_f();

    std::vector<Matrix> Hu{model.D()}, Hf{fm.G}, Hw{Matrix::Zero(ny, nw)};
    Matrix S(L * ny, n);
    Matrix CA = model.C();
    for (int i = 0; i < L; ++i) {
        S.middleRows(i * ny, ny) = CA;
        if (i + 1 < L) {
            Hu.push_back(CA * model.B());
            Hf.push_back(CA * fm.E);
            Hw.push_back(CA * model.F());
        }
        CA = CA * model.A();
    }
    const Matrix Tu = block_toeplitz(Hu, L);
    const Matrix Tf = block_toeplitz(Hf, L);
    const Matrix Tw = block_toeplitz(Hw, L);
    const Matrix Sigma = linalg::symmetrize(
        Tw * linalg::kron(Matrix::Identity(L, L), model.Q()) * Tw.transpose() +
        linalg::kron(Matrix::Identity(L, L), model.R()));
    const Eigen::LLT<Matrix> llt(Sigma);
    if (llt.info() != Eigen::Success) {
        fail(ErrorCode::SingularCovariance, "stacked noise covariance is not positive definite");
    }
    const Matrix Psi = build_upsilon(S, Tf, L, tau, nf);
    const Matrix SiPsi = llt.solve(Psi);
    const Matrix info = linalg::symmetrize(Psi.transpose() * SiPsi);
    EstimatorGain g;
    g.Gmat = fault_selector(static_cast<int>(Psi.cols()), nf) * linalg::pinv(info) *
             SiPsi.transpose();
    g.Ty = Matrix::Zero(L * ny, L * ny);
    g.Tu = Tu;
    g.L = L;
    g.m = 0;
    g.tau = tau;
    g.kind = GainKind::Alg0;
    return g;
}

}  // namespace rhfe

#include "rhfe/identification.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace rhfe {

RegressionData regression_matrices(const Matrix& u, const Matrix& y, int p, bool feedthrough) {
    if (p < 1) fail(ErrorCode::InvalidArgument, "p must be >= 1");
    if (u.rows() != y.rows()) fail(ErrorCode::ShapeMismatch, "u and y lengths differ");
    const int T = static_cast<int>(u.rows());
    if (T <= p) fail(ErrorCode::InvalidArgument, "trajectory shorter than p + 1");
    RegressionData reg;
    reg.p = p;
    reg.nu = static_cast<int>(u.cols());
    reg.ny = static_cast<int>(y.cols());
    reg.n_bar = T - p;
    reg.feedthrough = feedthrough;
    const int w = reg.nu + reg.ny;
    reg.Z_id.resize(p * w + (feedthrough ? reg.nu : 0), reg.n_bar);
    reg.Y_id.resize(reg.ny, reg.n_bar);
    for (int c = 0; c < reg.n_bar; ++c) {
        const int t = c + p;
        for (int i = p; i >= 1; --i) {
            const int off = (p - i) * w;
            reg.Z_id.block(off, c, reg.nu, 1) = u.row(t - i).transpose();
            reg.Z_id.block(off + reg.nu, c, reg.ny, 1) = y.row(t - i).transpose();
        }
        if (feedthrough) reg.Z_id.block(p * w, c, reg.nu, 1) = u.row(t).transpose();
        reg.Y_id.col(c) = y.row(t).transpose();
    }
    return reg;
}

RegressionData build_regression(const TrajectoryDataset& traj, int p, bool feedthrough) {
    if (traj.f.size() && traj.f.cwiseAbs().maxCoeff() != 0.0) {
        fail(ErrorCode::InvalidArgument, "identification data must be fault-free");
    }
    if (traj.length() < p + 10) {
        fail(ErrorCode::InvalidArgument, "trajectory length must be >= p + 10");
    }
    RegressionData reg = regression_matrices(traj.u, traj.y, p, feedthrough);
    Eigen::BDCSVD<Matrix> svd(reg.Z_id);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (reg.Z_id.rows() > reg.n_bar || smin <= 0.0 || (s(0) / smin) * (s(0) / smin) > 1e12) {
        std::ostringstream os;
        os << "regressor is ill-conditioned (cond(Z Z^T) = "
           << (smin > 0.0 ? (s(0) / smin) * (s(0) / smin) : std::numeric_limits<double>::infinity()) << ")";
        fail(ErrorCode::RankDeficientRegressor, os.str());
    }
    return reg;
}

LsFit ls_identify(const RegressionData& reg) {
    // Z^T = Q R  ->  Z^T (Z Z^T)^{-1} = Q R^{-T}
    const Eigen::Index r = reg.Z_id.rows();
    Eigen::HouseholderQR<Matrix> qr(reg.Z_id.transpose());
    const Matrix Q = qr.householderQ() * Matrix::Identity(reg.n_bar, r);
    const Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < r; ++i) {
        if (R(i, i) == 0.0) fail(ErrorCode::RankDeficientRegressor, "singular regressor");
    }
    LsFit fit;
    fit.Z_pinv = R.triangularView<Eigen::Upper>().solve(Q.transpose()).transpose();
    fit.Xi_hat = reg.Y_id * fit.Z_pinv;
    fit.E_hat = reg.Y_id - fit.Xi_hat * reg.Z_id;
    return fit;
}

Matrix innovation_cov(const Matrix& residual) {
    const Eigen::Index ny = residual.rows();
    const Eigen::Index N = residual.cols();
    Matrix S = Matrix::Zero(ny, ny);
    if (N > 1) {
        const Vector mean = residual.rowwise().mean();
        const Matrix centered = residual.colwise() - mean;
        S = linalg::symmetrize(centered * centered.transpose() / static_cast<double>(N - 1));
    }
    const double floor = 1e-10 * std::max(S.trace(), 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    const Vector w = es.eigenvalues().cwiseMax(floor);
    return linalg::symmetrize(es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose());
}

MarkovSet extract_markov(const LsFit& fit, const FaultConfig& cfg, const RegressionData& reg) {
    const int p = reg.p, nu = reg.nu, ny = reg.ny, w = nu + ny;
    const int width = p * w + (reg.feedthrough ? nu : 0);
    if (fit.Xi_hat.rows() != ny || fit.Xi_hat.cols() != width || fit.Z_pinv.rows() != reg.n_bar ||
        fit.Z_pinv.cols() != width) {
        fail(ErrorCode::BlockMisalignment, "fit dimensions do not match (p, n_u, n_y)");
    }
    if (cfg.n_f() == 0) fail(ErrorCode::InvalidArgument, "fault configuration is empty");
    for (int j : cfg.sensors)
        if (j < 0 || j >= ny) fail(ErrorCode::IndexOutOfRange, "sensor index out of range");
    for (int l : cfg.actuators)
        if (l < 0 || l >= nu) fail(ErrorCode::IndexOutOfRange, "actuator index out of range");

    MarkovSet ms;
    ms.p = p;
    ms.n_bar = reg.n_bar;
    ms.Sigma_e = innovation_cov(fit.E_hat);
    const int Nb = reg.n_bar;
    if (reg.feedthrough) {
        ms.Hu.push_back(fit.Xi_hat.middleCols(p * w, nu));
        ms.Mu.push_back(fit.Z_pinv.middleCols(p * w, nu));
    } else {
        ms.Hu.push_back(Matrix::Zero(ny, nu));
        ms.Mu.push_back(Matrix::Zero(Nb, nu));
    }
    ms.Hy.push_back(Matrix::Zero(ny, ny));
    ms.My.push_back(Matrix::Zero(Nb, ny));
    for (int i = 1; i <= p; ++i) {
        const int off = (p - i) * w;
        ms.Hu.push_back(fit.Xi_hat.middleCols(off, nu));
        ms.Hy.push_back(fit.Xi_hat.middleCols(off + nu, ny));
        ms.Mu.push_back(fit.Z_pinv.middleCols(off, nu));
        ms.My.push_back(fit.Z_pinv.middleCols(off + nu, ny));
    }
    const int nf = cfg.n_f();
    for (int i = 0; i <= p; ++i) {
        Matrix hf(ny, nf), mf(Nb, nf);
        int col = 0;
        for (int j : cfg.sensors) {
            if (i == 0) {
                hf.col(col) = Vector::Unit(ny, j);
                mf.col(col).setZero();
            } else {
                hf.col(col) = -ms.Hy[static_cast<std::size_t>(i)].col(j);
                mf.col(col) = -ms.My[static_cast<std::size_t>(i)].col(j);
            }
            ++col;
        }
        for (int l : cfg.actuators) {
            hf.col(col) = ms.Hu[static_cast<std::size_t>(i)].col(l);
            mf.col(col) = ms.Mu[static_cast<std::size_t>(i)].col(l);
            ++col;
        }
        ms.Hf.push_back(std::move(hf));
        ms.Mf.push_back(std::move(mf));
    }
    return ms;
}

Matrix assemble_xi(const MarkovSet& ms, int p) {
    const int nu = ms.nu(), ny = ms.ny(), w = nu + ny;
    Matrix xi(ny, p * w + nu);
    for (int i = 1; i <= p; ++i) {
        const int off = (p - i) * w;
        xi.middleCols(off, nu) = block_or_zero(ms.Hu, i);
        xi.middleCols(off + nu, ny) = block_or_zero(ms.Hy, i);
    }
    xi.middleCols(p * w, nu) = ms.Hu.front();
    return xi;
}

MarkovSet identify(const TrajectoryDataset& traj, int p, const FaultConfig& cfg, bool feedthrough) {
    const RegressionData reg = build_regression(traj, p, feedthrough);
    return extract_markov(ls_identify(reg), cfg, reg);
}

}  // namespace rhfe

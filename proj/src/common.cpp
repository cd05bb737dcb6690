#include "rhfe/common.hpp"

#include <algorithm>
#include <cmath>

namespace rhfe {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidModel: return "InvalidModel";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NonConvergentRiccati: return "NonConvergentRiccati";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::RankDeficientFaultChannel: return "RankDeficientFaultChannel";
        case ErrorCode::NoNonzeroMarkov: return "NoNonzeroMarkov";
        case ErrorCode::NumericalRankAmbiguity: return "NumericalRankAmbiguity";
        case ErrorCode::DivergedState: return "DivergedState";
        case ErrorCode::RankDeficientRegressor: return "RankDeficientRegressor";
        case ErrorCode::BlockMisalignment: return "BlockMisalignment";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::WindowNotFull: return "WindowNotFull";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::InfeasibleFaultConstraint: return "InfeasibleFaultConstraint";
        case ErrorCode::SolverFailure: return "SolverFailure";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::Unbounded: return "Unbounded";
        case ErrorCode::NumericalFailure: return "NumericalFailure";
        case ErrorCode::IndefiniteMiddleMatrix: return "IndefiniteMiddleMatrix";
        case ErrorCode::UnknownFigure: return "UnknownFigure";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

namespace linalg {

double rank_threshold(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const double top = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    return static_cast<double>(std::max(m.rows(), m.cols())) * top * kRankTol;
}

int numerical_rank(const Matrix& m) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    const double thr = static_cast<double>(std::max(m.rows(), m.cols())) * s(0) * kRankTol;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > thr) ++r;
    }
    return r;
}

Matrix pinv(const Matrix& m) {
    if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double thr = static_cast<double>(std::max(m.rows(), m.cols())) * s(0) * kRankTol;
    Vector inv = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > thr) inv(i) = 1.0 / s(i);
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

double spectral_radius(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double lambda_max_sym(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double lambda_min_sym(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Matrix psd_factor(const Matrix& m, double neg_tol) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
    const Vector& w = es.eigenvalues();
    const double scale = std::max(w.cwiseAbs().maxCoeff(), 0.0);
    if (w.size() && w.minCoeff() < -neg_tol * scale) {
        fail(ErrorCode::IndefiniteMiddleMatrix,
             "middle matrix has eigenvalue " + std::to_string(w.minCoeff()));
    }
    const double keep = scale * kRankTol * static_cast<double>(std::max<Eigen::Index>(m.rows(), 1));
    std::vector<Eigen::Index> cols;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w(i) > keep) cols.push_back(i);
    }
    Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(cols[c]) * std::sqrt(w(cols[c]));
    }
    return out;
}

Matrix hcat(const std::vector<Matrix>& blocks) {
    if (blocks.empty()) return Matrix();
    Eigen::Index rows = blocks.front().rows();
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        if (b.rows() != rows) fail(ErrorCode::ShapeMismatch, "hcat row mismatch");
        cols += b.cols();
    }
    Matrix out(rows, cols);
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        out.middleCols(off, b.cols()) = b;
        off += b.cols();
    }
    return out;
}

}  // namespace linalg
}  // namespace rhfe

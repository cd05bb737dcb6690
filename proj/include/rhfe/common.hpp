#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace rhfe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

enum class ErrorCode {
    InvalidModel,
    InvalidArgument,
    NonConvergentRiccati,
    IndexOutOfRange,
    RankDeficientFaultChannel,
    NoNonzeroMarkov,
    NumericalRankAmbiguity,
    DivergedState,
    RankDeficientRegressor,
    BlockMisalignment,
    ShapeMismatch,
    WindowNotFull,
    SingularCovariance,
    InfeasibleFaultConstraint,
    SolverFailure,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IndefiniteMiddleMatrix,
    UnknownFigure,
    Io,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

namespace linalg {

// Relative rank threshold shared by every rank decision in the library:
// singular values below max(rows, cols) * ||M||_2 * kRankTol are zero.
inline constexpr double kRankTol = 1e-10;

double rank_threshold(const Matrix& m);
int numerical_rank(const Matrix& m);

// Moore-Penrose pseudo-inverse using the shared rank threshold.
Matrix pinv(const Matrix& m);

Matrix symmetrize(const Matrix& m);
Matrix kron(const Matrix& a, const Matrix& b);
double spectral_radius(const Matrix& m);
double lambda_max_sym(const Matrix& m);
double lambda_min_sym(const Matrix& m);

// Symmetric square root factor W with W * W^T = M. Eigenvalues below
// -neg_tol * ||M|| raise IndefiniteMiddleMatrix; the rest of the negative
// part is clipped to zero and the zero columns are dropped.
Matrix psd_factor(const Matrix& m, double neg_tol = 1e-8);

// Horizontal concatenation of the given column range of blocks.
Matrix hcat(const std::vector<Matrix>& blocks);

}  // namespace linalg
}  // namespace rhfe

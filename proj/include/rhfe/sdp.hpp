#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rhfe/common.hpp"

namespace rhfe::sdp {

/// x[var] * (a b^T + b a^T)
struct LowRankTerm {
    int var = 0;
    Vector a;
    Vector b;
};

/// C + sum_t x[var_t] (a_t b_t^T + b_t a_t^T)  is PSD.
struct PsdBlock {
    Matrix C;
    std::vector<LowRankTerm> terms;
    std::string tag;

    int dim() const { return static_cast<int>(C.rows()); }
};

/// h - G x lies in the second-order cone {s : s_0 >= ||s_1:||}.
struct SocBlock {
    Matrix G;
    Vector h;
    std::string tag;
};

/// h - G x >= 0 componentwise.
struct LinearBlock {
    Matrix G;
    Vector h;
};

/// minimize c^T x subject to the cone memberships above.
struct ConicProgram {
    int n_vars = 0;
    Vector c;
    LinearBlock linear;
    std::vector<SocBlock> soc;
    std::vector<PsdBlock> psd;

    int add_vars(int count);
};

enum class Status { Optimal, NearOptimal, Infeasible, Unbounded, NumericalFailure };
const char* to_string(Status s);

struct SolverOptions {
    double feastol = 1e-8;
    double abstol = 1e-9;
    double reltol = 1e-8;
    int max_iter = 120;
    bool verbose = false;
};

struct Solution {
    Status status = Status::NumericalFailure;
    Vector x;
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    double gap = 0.0;
    double pres = 0.0;
    double dres = 0.0;
    int iterations = 0;
    std::string diagnostics;

    bool ok() const { return status == Status::Optimal || status == Status::NearOptimal; }
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// Mehrotra correction. Never throws for infeasible or unbounded programs;
/// the status carries the verdict.
Solution solve(const ConicProgram& prog, const SolverOptions& opts = {});

/// Solution that throws Infeasible, Unbounded or NumericalFailure when not ok().
Solution solve_or_throw(const ConicProgram& prog, const SolverOptions& opts = {});

/// Row-major placement of an r x c gain matrix inside x.
struct GainLayout {
    int rows = 0;
    int cols = 0;
    int offset = 0;

    int index(int i, int j) const { return offset + i * cols + j; }
};

GainLayout add_gain(ConicProgram& prog, int rows, int cols);
Matrix extract_gain(const Vector& x, const GainLayout& layout);

/// PSD lift of  [G S] M [G S]^T <= gamma2 I  with W W^T = M:
///   [[gamma2 I, [G S] W], [W^T [G S]^T, I]] >= 0.
/// `selector` may have zero columns (constraint on G M G^T). When gamma_var is
/// set, gamma2 is the decision variable x[*gamma_var] instead of a constant.
PsdBlock quad_constraint_to_psd(const GainLayout& layout, const Matrix& W, const Matrix& selector,
                                double gamma2, std::optional<int> gamma_var = std::nullopt);

/// Adds epigraph scalars t_i with ||row_i(G) Sigma_half||^2 <= t_i and
/// objective sum_i t_i. Returns the index of t_0.
int add_trace_objective(ConicProgram& prog, const GainLayout& layout, const Matrix& Sigma_half);

/// lambda_max([G S] M [G S]^T) evaluated directly, independent of any solver.
double quad_form_lambda_max(const Matrix& G, const Matrix& selector, const Matrix& M);

/// Smallest eigenvalue of a PSD block evaluated at x.
double psd_block_min_eig(const PsdBlock& block, const Vector& x);

/// JSON interchange of a program (objective, cones, data arrays).
std::string dump_json(const ConicProgram& prog);

}  // namespace rhfe::sdp

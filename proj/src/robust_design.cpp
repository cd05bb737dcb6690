#include "rhfe/robust_design.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace rhfe {

namespace {

Matrix lower_factor(const Matrix& S, const char* what) {
    const Eigen::LLT<Matrix> llt(linalg::symmetrize(S));
    if (llt.info() != Eigen::Success) fail(ErrorCode::SingularCovariance, std::string(what) + " is not positive definite");
    return llt.matrixL();
}

void check_gamma_f2(const RobustProblem& prob, double gamma_f2) {
    if (!(gamma_f2 < 1.0)) fail(ErrorCode::InvalidArgument, "gamma_f2 must be < 1");
    const double lo = gamma_f_min(prob).gamma_f_min2;
    if (gamma_f2 < lo - 1e-9) {
        std::ostringstream os;
        os << "gamma_f2 = " << gamma_f2 << " is below gamma_f_min2 = " << lo;
        fail(ErrorCode::InvalidArgument, os.str());
    }
}

DesignPoint finish(const RobustProblem& prob, const DesignProgram& dp, sdp::Solution sol, double gamma_f2) {
    DesignPoint d;
    d.G = sdp::extract_gain(sol.x, dp.gain);
    d.gamma_f2 = gamma_f2;
    d.bias_f = bias_f(prob, d.G);
    d.bias_z = bias_z(prob, d.G);
    d.variance = variance(prob, d.G);
    d.solution = std::move(sol);
    return d;
}

}  // namespace

SensitivityStack build_sensitivity(const MarkovSet& markov, int L, int m, int tau) {
    if (!markov.has_sensitivities()) {
        fail(ErrorCode::InvalidArgument, "Markov set carries no identification sensitivities");
    }
    if (markov.Mu.size() != markov.Hu.size() || markov.My.size() != markov.Hu.size() ||
        markov.Mf.size() != markov.Hf.size()) {
        fail(ErrorCode::ShapeMismatch, "sensitivity sequences do not mirror the Markov sequences");
    }
    if (tau < 0 || tau >= L) fail(ErrorCode::InvalidArgument, "tau must lie in [0, L)");
    const int nf = markov.n_f();
    SensitivityStack s;
    s.L = L;
    s.n_bar = static_cast<int>(markov.Mu.front().rows());
    s.Mbar_Lm_o = block_hankel(markov.Mu, L, m);
    s.Mbar_L_u = block_toeplitz(markov.Mu, L);
    s.Mbar_L_y = block_toeplitz(markov.My, L);
    s.Mbar_Ltau_f = block_toeplitz(markov.Mf, L).leftCols((L - tau) * nf);
    s.Mbar_Upsilon.resize(s.Mbar_Lm_o.rows(), s.Mbar_Lm_o.cols() + s.Mbar_Ltau_f.cols());
    s.Mbar_Upsilon << s.Mbar_Lm_o, s.Mbar_Ltau_f;
    s.Mbar_L_z.resize(s.Mbar_L_y.rows(), s.Mbar_L_y.cols() + s.Mbar_L_u.cols());
    s.Mbar_L_z << s.Mbar_L_y, s.Mbar_L_u;
    return s;
}

Matrix row_block_gram(const Matrix& M, int L) {
    if (L < 1 || M.rows() % L != 0) fail(ErrorCode::ShapeMismatch, "row count is not a multiple of L");
    const Eigen::Index h = M.rows() / L;
    Matrix P(L, L);
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double v = M.middleRows(i * h, h).cwiseProduct(M.middleRows(j * h, h)).sum();
            P(i, j) = v;
            P(j, i) = v;
        }
    }
    return P;
}

GramBlocks gram_blocks(const SensitivityStack& stack) {
    return {row_block_gram(stack.Mbar_Upsilon, stack.L), row_block_gram(stack.Mbar_L_z, stack.L)};
}

RobustProblem build_problem(const WindowMatrices& wm, const Matrix& Sigma_e, const Matrix& P_Upsilon,
                            const Matrix& P_z) {
    const int L = wm.L;
    if (P_Upsilon.rows() != L || P_Upsilon.cols() != L || P_z.rows() != L || P_z.cols() != L) {
        fail(ErrorCode::ShapeMismatch, "gram blocks must be L x L");
    }
    lower_factor(Sigma_e, "Sigma_e");
    RobustProblem prob;
    prob.wm = wm;
    prob.Sigma_e = Sigma_e;
    prob.Sigma_eL = linalg::kron(Matrix::Identity(L, L), Sigma_e);
    prob.P_Upsilon = P_Upsilon;
    prob.P_z = P_z;
    const Matrix& U = wm.upsilon;
    prob.Pi_f = linalg::symmetrize(U * U.transpose() + linalg::kron(P_Upsilon, Sigma_e));
    prob.Pi_z = linalg::symmetrize(linalg::kron(P_z, Sigma_e));
    const double eps = 1e-10 * prob.Pi_f.trace();
    if (linalg::lambda_min_sym(prob.Pi_f) < eps) {
        prob.Pi_f.diagonal().array() += eps;
        prob.pi_f_regularization = eps;
    }
    prob.selector = fault_selector(static_cast<int>(U.cols()), wm.n_f);
    const Eigen::LLT<Matrix> llt(prob.Pi_f);
    if (llt.info() != Eigen::Success) fail(ErrorCode::NumericalFailure, "Pi_f factorization failed");
    prob.G0 = (llt.solve(U * prob.selector.transpose())).transpose();

    const Eigen::Index a = U.rows(), b = U.cols();
    Matrix mid(a + b, a + b);
    mid << prob.Pi_f, -U, -U.transpose(), Matrix::Identity(b, b);
    prob.W_f = linalg::psd_factor(mid);
    prob.W_z = linalg::psd_factor(prob.Pi_z);
    return prob;
}

RobustProblem build_problem(const MarkovSet& markov, int L, int m, int tau) {
    const WindowMatrices wm = window_matrices(markov, L, m, tau);
    const GramBlocks g = gram_blocks(build_sensitivity(markov, L, m, tau));
    return build_problem(wm, markov.Sigma_e, g.P_Upsilon, g.P_z);
}

double bias_f(const RobustProblem& prob, const Matrix& G) {
    const Matrix GU = G * prob.wm.upsilon * prob.selector.transpose();
    const Matrix S = G * prob.Pi_f * G.transpose() - GU - GU.transpose() +
                     prob.selector * prob.selector.transpose();
    return linalg::lambda_max_sym(S);
}

double bias_z(const RobustProblem& prob, const Matrix& G) {
    return linalg::lambda_max_sym(G * prob.Pi_z * G.transpose());
}

double variance(const RobustProblem& prob, const Matrix& G) {
    return (G * prob.Sigma_eL * G.transpose()).trace();
}

GammaFMin gamma_f_min(const RobustProblem& prob) {
    GammaFMin out;
    out.G0 = prob.G0;
    const double lmin = linalg::lambda_min_sym(prob.G0 * prob.Pi_f * prob.G0.transpose());
    if (lmin <= 1e-12) {
        fail(ErrorCode::InfeasibleFaultConstraint,
             "lambda_min(G0 Pi_f G0^T) = " + std::to_string(lmin) + ": no nontrivial design exists");
    }
    out.gamma_f_min2 = std::clamp(1.0 - lmin, 0.0, std::nextafter(1.0, 0.0));
    return out;
}

DesignProgram g1_program(const RobustProblem& prob, double gamma_f2, const Matrix& cost) {
    DesignProgram dp;
    dp.gain = sdp::add_gain(dp.prog, prob.n_f(), static_cast<int>(prob.wm.upsilon.rows()));
    sdp::add_trace_objective(dp.prog, dp.gain, lower_factor(cost, "cost matrix"));
    dp.prog.psd.push_back(sdp::quad_constraint_to_psd(dp.gain, prob.W_f, prob.selector, gamma_f2));
    dp.prog.psd.back().tag = "fault_channel";
    return dp;
}

DesignProgram gamma_z_min_program(const RobustProblem& prob, double gamma_f2) {
    DesignProgram dp;
    dp.gain = sdp::add_gain(dp.prog, prob.n_f(), static_cast<int>(prob.wm.upsilon.rows()));
    dp.gamma_var = dp.prog.add_vars(1);
    dp.prog.c(dp.gamma_var) = 1.0;
    dp.prog.psd.push_back(sdp::quad_constraint_to_psd(dp.gain, prob.W_f, prob.selector, gamma_f2));
    dp.prog.psd.back().tag = "fault_channel";
    dp.prog.psd.push_back(sdp::quad_constraint_to_psd(dp.gain, prob.W_z, Matrix(prob.n_f(), 0), 0.0,
                                                      dp.gamma_var));
    dp.prog.psd.back().tag = "data_channel";
    return dp;
}

DesignProgram offline_program(const RobustProblem& prob, double gamma_f2, double gamma_z2) {
    DesignProgram dp = g1_program(prob, gamma_f2, prob.Sigma_eL);
    dp.prog.psd.push_back(
        sdp::quad_constraint_to_psd(dp.gain, prob.W_z, Matrix(prob.n_f(), 0), gamma_z2));
    dp.prog.psd.back().tag = "data_channel";
    return dp;
}

DesignPoint gamma_z_min(const RobustProblem& prob, double gamma_f2, const sdp::SolverOptions& opts) {
    check_gamma_f2(prob, gamma_f2);
    const DesignProgram dp = gamma_z_min_program(prob, gamma_f2);
    DesignPoint d = finish(prob, dp, sdp::solve_or_throw(dp.prog, opts), gamma_f2);
    d.gamma_z2 = d.bias_z;
    return d;
}

DesignPoint solve_G1(const RobustProblem& prob, double gamma_f2, const sdp::SolverOptions& opts) {
    check_gamma_f2(prob, gamma_f2);
    const DesignProgram dp = g1_program(prob, gamma_f2, prob.Sigma_eL);
    DesignPoint d = finish(prob, dp, sdp::solve_or_throw(dp.prog, opts), gamma_f2);
    d.gamma_z2 = d.bias_z;
    return d;
}

DesignPoint solve_offline_point(const RobustProblem& prob, double gamma_f2, double gamma_z2,
                                const sdp::SolverOptions& opts) {
    check_gamma_f2(prob, gamma_f2);
    if (!(gamma_z2 >= 0.0)) fail(ErrorCode::InvalidArgument, "gamma_z2 must be >= 0");
    const DesignProgram dp = offline_program(prob, gamma_f2, gamma_z2);
    DesignPoint d = finish(prob, dp, sdp::solve_or_throw(dp.prog, opts), gamma_f2);
    d.gamma_z2 = gamma_z2;
    return d;
}

EstimatorGain to_gain(const RobustProblem& prob, const DesignPoint& d, GainKind kind) {
    EstimatorGain g;
    g.Gmat = d.G;
    g.Ty = prob.wm.Ty;
    g.Tu = prob.wm.Tu;
    g.L = prob.wm.L;
    g.m = prob.wm.m;
    g.tau = prob.wm.tau;
    g.kind = kind;
    g.gamma_f2 = d.gamma_f2;
    g.gamma_z2 = d.gamma_z2;
    g.solver_status = sdp::to_string(d.solution.status);
    return g;
}

EstimatorGain solve_offline(const RobustProblem& prob, double gamma_f2, double gamma_z2,
                            const sdp::SolverOptions& opts) {
    return to_gain(prob, solve_offline_point(prob, gamma_f2, gamma_z2, opts), GainKind::OfflineRobust);
}

DefaultTuning default_tuning(const RobustProblem& prob, const Matrix& G_nominal,
                             const sdp::SolverOptions& opts) {
    DefaultTuning t;
    t.gamma_f_min2 = gamma_f_min(prob).gamma_f_min2;
    t.gamma_f2 = bias_f(prob, G_nominal);
    if (!(t.gamma_f2 < 1.0) || t.gamma_f2 < t.gamma_f_min2) {
        std::ostringstream os;
        os << "nominal fault-channel bias " << t.gamma_f2 << " lies outside [" << t.gamma_f_min2
           << ", 1); pass gamma_f2 explicitly";
        fail(ErrorCode::InvalidArgument, os.str());
    }
    t.gamma_z_min2 = gamma_z_min(prob, t.gamma_f2, opts).gamma_z2;
    t.gamma_z1_2 = solve_G1(prob, t.gamma_f2, opts).gamma_z2;
    t.gamma_z2 = 0.5 * (t.gamma_z_min2 + t.gamma_z1_2);
    return t;
}

std::vector<TradeoffRow> tradeoff_sweep(const RobustProblem& prob,
                                        const std::vector<double>& gamma_f2_grid,
                                        const std::vector<double>& gamma_z2_grid,
                                        const sdp::SolverOptions& opts) {
    std::vector<TradeoffRow> rows;
    for (double gf : gamma_f2_grid) {
        for (double gz : gamma_z2_grid) {
            TradeoffRow r;
            r.gamma_f2 = gf;
            r.gamma_z2 = gz;
            const double nan = std::numeric_limits<double>::quiet_NaN();
            try {
                const DesignPoint d = solve_offline_point(prob, gf, gz, opts);
                r.bias_f = d.bias_f;
                r.bias_z = d.bias_z;
                r.variance = d.variance;
                r.status = sdp::to_string(d.solution.status);
            } catch (const Error& e) {
                r.bias_f = r.bias_z = r.variance = nan;
                r.status = to_string(e.code());
            }
            rows.push_back(r);
        }
    }
    return rows;
}

std::string tradeoff_csv(const std::vector<TradeoffRow>& rows) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "gamma_f2,gamma_z2,bias_f,bias_z,variance,status\n";
    for (const auto& r : rows) {
        os << r.gamma_f2 << ',' << r.gamma_z2 << ',' << r.bias_f << ',' << r.bias_z << ',' << r.variance
           << ',' << r.status << '\n';
    }
    return os.str();
}

}  // namespace rhfe

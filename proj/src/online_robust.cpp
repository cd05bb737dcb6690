#include "rhfe/online_robust.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>

namespace rhfe {

OnlineContext build_context(const SensitivityStack& stack, const StackedWindow& win,
                            const Matrix& Sigma_e) {
    if (win.L != stack.L) fail(ErrorCode::WindowNotFull, "window horizon != sensitivity horizon");
    const Vector z = win.z();
    if (z.size() != stack.Mbar_L_z.cols()) fail(ErrorCode::WindowNotFull, "window length mismatch");
    OnlineContext ctx;
    ctx.k = win.k;
    const Vector beta = stack.Mbar_L_z * z;
    ctx.beta = Eigen::Map<const Matrix>(beta.data(), stack.n_bar, stack.L);
    ctx.B = linalg::symmetrize(ctx.beta.transpose() * ctx.beta);
    const int L = stack.L;
    ctx.cost = linalg::symmetrize(linalg::kron(Matrix::Identity(L, L), Sigma_e) + linalg::kron(ctx.B, Sigma_e));
    return ctx;
}

double gate_weight(const EstimatorGain& G_off, const RobustProblem& prob) {
    return linalg::lambda_min_sym(G_off.Gmat * prob.Pi_z * G_off.Gmat.transpose());
}

bool gate(double weight, const StackedWindow& win, double alpha) {
    return weight * win.z().squaredNorm() > alpha;
}

bool gate(const EstimatorGain& G_off, const RobustProblem& prob, const StackedWindow& win, double alpha) {
    return gate(gate_weight(G_off, prob), win, alpha);
}

DesignPoint solve_online_point(const OnlineContext& ctx, const RobustProblem& prob, double gamma_f2,
                               const sdp::SolverOptions& opts) {
    if (!(gamma_f2 < 1.0) || gamma_f2 < gamma_f_min(prob).gamma_f_min2 - 1e-9) {
        fail(ErrorCode::InvalidArgument, "gamma_f2 outside [gamma_f_min2, 1)");
    }
    const DesignProgram dp = g1_program(prob, gamma_f2, ctx.cost);
    const sdp::Solution sol = sdp::solve(dp.prog, opts);
    if (!sol.ok()) {
        fail(ErrorCode::SolverFailure, std::string(sdp::to_string(sol.status)) + ": " + sol.diagnostics);
    }
    DesignPoint d;
    d.G = sdp::extract_gain(sol.x, dp.gain);
    d.gamma_f2 = gamma_f2;
    d.bias_f = bias_f(prob, d.G);
    d.bias_z = bias_z(prob, d.G);
    d.variance = (d.G * ctx.cost * d.G.transpose()).trace();
    d.solution = sol;
    return d;
}

EstimatorGain solve_online(const OnlineContext& ctx, const RobustProblem& prob, double gamma_f2,
                           const sdp::SolverOptions& opts) {
    return to_gain(prob, solve_online_point(ctx, prob, gamma_f2, opts), GainKind::OnlineRobust);
}

Vector alg3_estimate(const StackedWindow& win, const EstimatorGain& G_off, const RobustProblem& prob,
                     const SensitivityStack& stack, double weight, double alpha, double gamma_f2,
                     GateLogEntry* entry, const sdp::SolverOptions& opts) {
    GateLogEntry e;
    e.k = win.k;
    e.gamma_f2 = gamma_f2;
    e.gate_fired = gate(weight, win, alpha);
    const Vector r = residual(G_off.Ty, G_off.Tu, win);
    Vector f = G_off.Gmat * r;
    if (e.gate_fired) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const DesignPoint d =
                solve_online_point(build_context(stack, win, prob.Sigma_e), prob, gamma_f2, opts);
            f = d.G * r;
            e.solver_status = sdp::to_string(d.solution.status);
        } catch (const Error& err) {
            e.solver_status = std::string("fallback:") + to_string(err.code());
        }
        e.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    } else {
        e.solver_status = "offline";
    }
    if (entry) *entry = e;
    return f;
}

Alg3Result run_alg3(const TrajectoryDataset& traj, const EstimatorGain& G_off, const RobustProblem& prob,
                    const SensitivityStack& stack, double alpha, double gamma_f2,
                    const sdp::SolverOptions& opts) {
    Alg3Result out;
    const int T = traj.length();
    out.estimates = Matrix::Constant(T, G_off.n_f(), std::numeric_limits<double>::quiet_NaN());
    const double weight = gate_weight(G_off, prob);
    for (int k = G_off.L - 1; k < T; ++k) {
        GateLogEntry e;
        const StackedWindow win = make_window(traj, k, G_off.L);
        out.estimates.row(k) =
            alg3_estimate(win, G_off, prob, stack, weight, alpha, gamma_f2, &e, opts).transpose();
        out.log.push_back(e);
    }
    return out;
}

std::string gate_log_csv(const std::vector<GateLogEntry>& log) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "k,gate_fired,solver_status,solve_ms,gamma_f2\n";
    for (const auto& e : log) {
        os << e.k << ',' << (e.gate_fired ? 1 : 0) << ',' << e.solver_status << ',' << e.solve_ms << ','
           << e.gamma_f2 << '\n';
    }
    return os.str();
}

}  // namespace rhfe

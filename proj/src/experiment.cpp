#include "rhfe/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "rhfe/io.hpp"

namespace rhfe {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool wants(const std::vector<std::string>& algs, const std::string& name) {
    return std::find(algs.begin(), algs.end(), name) != algs.end();
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_rows(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

int worker_count(const ExperimentConfig& cfg, int jobs) {
    int w = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::thread::hardware_concurrency());
    return std::clamp(w, 1, std::max(jobs, 1));
}

// Runs body(i) for i in [0, n) on a small thread pool; body must not throw.
template <typename Body>
void parallel_for(int n, int workers, Body body) {
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---- config ------------------------------------------------------------------

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["model"] = cfg.model;
    j["fault"] = io::fault_to_string(cfg.fault);
    j["N"] = cfg.N;
    j["p"] = cfg.p;
    j["L"] = cfg.L;
    j["m"] = cfg.m;
    j["gamma_f2"] = std::isnan(cfg.gamma_f2) ? json(nullptr) : json(cfg.gamma_f2);
    j["gamma_z2"] = std::isnan(cfg.gamma_z2) ? json(nullptr) : json(cfg.gamma_z2);
    j["alpha"] = cfg.alpha;
    j["eta"] = cfg.eta;
    j["mc"] = cfg.mc;
    j["seed"] = cfg.seed;
    j["k_eval"] = cfg.k_eval;
    j["trace_length"] = cfg.trace_length;
    j["workers"] = cfg.workers;
    j["algorithms"] = cfg.algorithms;
    j["sweep_etas"] = cfg.sweep_etas;
    j["sweep_points"] = cfg.sweep_points;
    j["out"] = cfg.out;
    return j.dump(1);
}

ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::Io, std::string("config: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::Io, "config must be a JSON object");
    ExperimentConfig c = base;
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            const json& v = it.value();
            if (k == "model") c.model = v.get<std::string>();
            else if (k == "fault") c.fault = io::parse_fault(v.get<std::string>());
            else if (k == "N") c.N = v.get<int>();
            else if (k == "p") c.p = v.get<int>();
            else if (k == "L") c.L = v.get<int>();
            else if (k == "m") c.m = v.get<int>();
            else if (k == "gamma_f2") c.gamma_f2 = v.is_null() ? kNaN : v.get<double>();
            else if (k == "gamma_z2") c.gamma_z2 = v.is_null() ? kNaN : v.get<double>();
            else if (k == "alpha") c.alpha = v.get<double>();
            else if (k == "eta") c.eta = v.get<double>();
            else if (k == "mc") c.mc = v.get<int>();
            else if (k == "seed") c.seed = v.get<std::uint64_t>();
            else if (k == "k_eval") c.k_eval = v.get<int>();
            else if (k == "trace_length") c.trace_length = v.get<int>();
            else if (k == "workers") c.workers = v.get<int>();
            else if (k == "algorithms") c.algorithms = v.get<std::vector<std::string>>();
            else if (k == "sweep_etas") c.sweep_etas = v.get<std::vector<double>>();
            else if (k == "sweep_points") c.sweep_points = v.get<int>();
            else if (k == "out") c.out = v.get<std::string>();
            else fail(ErrorCode::InvalidArgument, "unknown config field '" + k + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidArgument, std::string("config field type: ") + e.what());
    }
    return c;
}

void validate(const ExperimentConfig& cfg) {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) fail(ErrorCode::InvalidArgument, what);
    };
    need(cfg.p >= 1, "p must be >= 1");
    need(cfg.N >= cfg.p + 10, "N must be >= p + 10");
    need(cfg.L >= 1, "L must be >= 1");
    need(cfg.m >= 0, "m must be >= 0");
    need(cfg.mc >= 1, "mc must be >= 1");
    need(cfg.k_eval >= 0, "k_eval must be >= 0");
    need(cfg.k_eval + 1 >= cfg.L, "k_eval must leave room for a full window (k_eval >= L - 1)");
    need(cfg.trace_length >= cfg.L, "trace_length must be >= L");
    need(cfg.sweep_points >= 3, "sweep_points must be >= 3");
    need(std::isfinite(cfg.eta) && std::isfinite(cfg.alpha), "eta and alpha must be finite");
    need(std::isnan(cfg.gamma_f2) || (cfg.gamma_f2 >= 0.0 && cfg.gamma_f2 < 1.0), "gamma_f2 must lie in [0, 1)");
    need(std::isnan(cfg.gamma_z2) || cfg.gamma_z2 >= 0.0, "gamma_z2 must be >= 0");
    need(cfg.fault.n_f() > 0, "fault configuration is empty");
    for (const auto& a : cfg.algorithms) parse_algorithm(a);
}

GainKind parse_algorithm(const std::string& name) {
    if (name == "alg0") return GainKind::Alg0;
    if (name == "alg1" || name == "nominal") return GainKind::Nominal;
    if (name == "alg2" || name == "offline") return GainKind::OfflineRobust;
    if (name == "alg3" || name == "online") return GainKind::OnlineRobust;
    fail(ErrorCode::InvalidArgument, "unknown algorithm '" + name + "' (alg0|alg1|alg2|alg3)");
}

const char* algorithm_name(GainKind k) {
    switch (k) {
        case GainKind::Alg0: return "alg0";
        case GainKind::Nominal: return "alg1";
        case GainKind::OfflineRobust: return "alg2";
        case GainKind::OnlineRobust: return "alg3";
    }
    return "unknown";
}

// ---- pipeline ------------------------------------------------------------------

std::pair<StateSpaceModel, ControllerConfig> load_plant(const ExperimentConfig& cfg) {
    if (cfg.model == "vtol") return vtol_model();
    io::ModelFile mf = io::load_model(cfg.model);
    if (!mf.Ky) fail(ErrorCode::InvalidModel, "model file " + cfg.model + " has no controller gain Ky");
    const int nu = mf.model.nu();
    ControllerConfig ctrl{*mf.Ky, ReferenceSource::white(Matrix::Identity(nu, nu))};
    return {std::move(mf.model), std::move(ctrl)};
}

Pipeline build_pipeline(const ExperimentConfig& cfg, const sdp::SolverOptions& opts, const MarkovSet* identified) {
    validate(cfg);
    auto plant = load_plant(cfg);
    Pipeline pl{std::move(plant.first), std::move(plant.second)};
    pl.fault = cfg.fault;
    if (auto w = closed_loop_warning(pl.model, pl.ctrl.Ky)) pl.warnings.push_back(*w);
    pl.predictor = steady_state_predictor(pl.model);
    pl.fm = fault_matrices(pl.model, pl.predictor, pl.fault);
    const int L = cfg.L, m = cfg.m_eff();
    pl.truth = markov_parameters(pl.predictor, pl.fm, L + m);
    pl.tau = relative_degree(pl.truth, pl.fault.n_f());
    if (pl.tau >= L) fail(ErrorCode::InvalidArgument, "horizon L must exceed the relative degree");
    if (auto w = horizon_warning(unbiasedness_check(pl.predictor, pl.fm), L)) pl.warnings.push_back(*w);

    if (identified) {
        if (identified->n_f() != pl.fault.n_f() || identified->Hu.front().rows() != pl.model.ny())
            fail(ErrorCode::ShapeMismatch, "identified Markov set does not match the model and fault configuration");
        pl.id = *identified;
    } else {
        const TrajectoryDataset idtraj = simulate_closed_loop(pl.model, pl.ctrl, FaultProfile::none(pl.fault.n_f()),
                                                              pl.fault, cfg.N, cfg.seed);
        pl.id = identify(idtraj, cfg.p, pl.fault, !pl.model.D().isZero(0.0));
    }

    pl.g0 = nominal_gain(window_matrices(pl.truth, L, m, pl.tau), pl.predictor.Sigma_e, GainKind::Alg0);
    const WindowMatrices wm = window_matrices(pl.id, L, m, pl.tau);
    pl.g1 = nominal_gain(wm, pl.id.Sigma_e, GainKind::Nominal);

    if (!wants(cfg.algorithms, "alg2") && !wants(cfg.algorithms, "alg3")) return pl;

    pl.stack = build_sensitivity(pl.id, L, m, pl.tau);
    const GramBlocks gb = gram_blocks(*pl.stack);
    pl.prob = build_problem(wm, pl.id.Sigma_e, gb.P_Upsilon, gb.P_z);
    const RobustProblem& prob = *pl.prob;
    const double gmin = gamma_f_min(prob).gamma_f_min2;
    if (std::isnan(cfg.gamma_f2)) {
        pl.tuning = default_tuning(prob, pl.g1.Gmat, opts);
        pl.gamma_f2 = pl.tuning->gamma_f2;
        pl.gamma_z2 = std::isnan(cfg.gamma_z2) ? pl.tuning->gamma_z2 : cfg.gamma_z2;
    } else {
        if (cfg.gamma_f2 < gmin) {
            std::ostringstream os;
            os << "gamma_f2 = " << cfg.gamma_f2 << " is below gamma_f_min2 = " << gmin;
            fail(ErrorCode::InvalidArgument, os.str());
        }
        pl.gamma_f2 = cfg.gamma_f2;
        if (std::isnan(cfg.gamma_z2)) {
            DefaultTuning t;
            t.gamma_f_min2 = gmin;
            t.gamma_f2 = cfg.gamma_f2;
            t.gamma_z_min2 = gamma_z_min(prob, cfg.gamma_f2, opts).gamma_z2;
            t.gamma_z1_2 = solve_G1(prob, cfg.gamma_f2, opts).gamma_z2;
            t.gamma_z2 = 0.5 * (t.gamma_z_min2 + t.gamma_z1_2);
            pl.tuning = t;
            pl.gamma_z2 = t.gamma_z2;
        } else {
            pl.gamma_z2 = cfg.gamma_z2;
        }
    }
    pl.g2 = solve_offline(prob, pl.gamma_f2, pl.gamma_z2, opts);
    pl.gate_weight = gate_weight(*pl.g2, prob);
    return pl;
}

FaultProfile evaluation_profile(int n_f) {
    FaultProfile fp = step_sine_fault_profile();
    const std::vector<Waveform> base = fp.channels;
    fp.channels.clear();
    for (int i = 0; i < n_f; ++i) fp.channels.push_back(base[static_cast<std::size_t>(i) % base.size()]);
    return fp;
}

ControllerConfig evaluation_controller(const Pipeline& pl, double eta) {
    ControllerConfig c = pl.ctrl;
    c.reference = ReferenceSource::constant(Vector::Constant(pl.model.nu(), eta));
    return c;
}

// ---- metrics ---------------------------------------------------------------------

const AlgorithmMetrics* MetricsReport::find(const std::string& name) const {
    for (const auto& a : algorithms)
        if (a.name == name) return &a;
    return nullptr;
}

void summarize(AlgorithmMetrics& m) {
    const Eigen::Index nf = m.errors.cols();
    std::vector<Eigen::Index> good;
    for (Eigen::Index r = 0; r < m.errors.rows(); ++r)
        if (m.errors.row(r).allFinite()) good.push_back(r);
    m.failures = static_cast<int>(m.errors.rows()) - static_cast<int>(good.size());
    m.bias = Vector::Zero(nf);
    m.cov = Matrix::Zero(nf, nf);
    if (good.empty()) {
        m.rmse = kNaN;
        m.bias.setConstant(kNaN);
        m.cov.setConstant(kNaN);
    } else {
        for (auto r : good) m.bias += m.errors.row(r).transpose();
        m.bias /= static_cast<double>(good.size());
        double sq = 0.0;
        for (auto r : good) {
            const Vector d = m.errors.row(r).transpose() - m.bias;
            m.cov += d * d.transpose();
            sq += m.errors.row(r).squaredNorm();
        }
        m.cov /= static_cast<double>(good.size());
        m.rmse = std::sqrt(sq / static_cast<double>(good.size()) / static_cast<double>(nf));
    }
    m.ellipse_center = m.bias;
    m.ellipse_shape = 3.0 * m.cov;
}

MetricsReport monte_carlo(const ExperimentConfig& cfg, const Pipeline& pl,
                          const std::vector<std::string>& algorithms, const sdp::SolverOptions& opts) {
    MetricsReport rep;
    rep.fault = io::fault_to_string(pl.fault);
    rep.tau = pl.tau;
    rep.k_eval = cfg.k_eval;
    rep.mc = cfg.mc;
    rep.eta = cfg.eta;
    rep.warnings = pl.warnings;
    const int nf = pl.fault.n_f();
    const int M = cfg.mc;
    const int L = cfg.L;
    const int k_end = cfg.k_eval + pl.tau;
    const int T = k_end + 1;

    std::vector<GainKind> kinds;
    for (const auto& a : algorithms) {
        const GainKind k = parse_algorithm(a);
        if ((k == GainKind::OfflineRobust || k == GainKind::OnlineRobust) && !pl.g2)
            fail(ErrorCode::InvalidArgument, std::string(algorithm_name(k)) + " requested but no robust design was built");
        kinds.push_back(k);
    }
    const std::size_t A = kinds.size();
    auto gain_of = [&](GainKind k) -> const EstimatorGain& {
        switch (k) {
            case GainKind::Alg0: return pl.g0;
            case GainKind::Nominal: return pl.g1;
            default: return *pl.g2;
        }
    };

    std::vector<Matrix> errors(A, Matrix::Constant(M, nf, kNaN));
    const int n_trace = k_end - (L - 1) + 1;
    std::vector<std::vector<Matrix>> trace_err(A);  // per alg, per replicate: n_trace x nf
    for (auto& t : trace_err) t.assign(static_cast<std::size_t>(M), Matrix());
    std::vector<std::vector<double>> runtime(A, std::vector<double>(static_cast<std::size_t>(M), 0.0));
    std::vector<GateLogEntry> gate_entries(static_cast<std::size_t>(M));
    std::vector<char> gate_used(static_cast<std::size_t>(M), 0);

    const ControllerConfig ctrl = evaluation_controller(pl, cfg.eta);
    const FaultProfile profile = evaluation_profile(nf);
    parallel_for(M, worker_count(cfg, M), [&](int r) {
        TrajectoryDataset traj;
        try {
            traj = simulate_closed_loop(pl.model, ctrl, profile, pl.fault, T,
                                        cfg.seed + 1 + static_cast<std::uint64_t>(r));
        } catch (const Error&) {
            return;
        }
        const Vector f_true = traj.f.row(cfg.k_eval).transpose();
        const StackedWindow win = make_window(traj, k_end, L);
        for (std::size_t a = 0; a < A; ++a) {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                Vector fh;
                if (kinds[a] == GainKind::OnlineRobust) {
                    GateLogEntry e;
                    fh = alg3_estimate(win, *pl.g2, *pl.prob, *pl.stack, pl.gate_weight, cfg.alpha, pl.gamma_f2, &e,
                                       opts);
                    gate_entries[static_cast<std::size_t>(r)] = e;
                    gate_used[static_cast<std::size_t>(r)] = 1;
                } else {
                    const EstimatorGain& g = gain_of(kinds[a]);
                    fh = estimate(g, win);
                    Matrix tr(n_trace, nf);
                    for (int i = 0; i < n_trace; ++i) {
                        const int ke = L - 1 + i;
                        tr.row(i) = (estimate(g, make_window(traj, ke, L)) - traj.f.row(ke - pl.tau).transpose())
                                        .transpose();
                    }
                    trace_err[a][static_cast<std::size_t>(r)] = std::move(tr);
                }
                errors[a].row(r) = (fh - f_true).transpose();
            } catch (const Error&) {
                errors[a].row(r).setConstant(kNaN);
            }
            runtime[a][static_cast<std::size_t>(r)] = seconds_since(t0);
        }
    });

    for (std::size_t a = 0; a < A; ++a) {
        AlgorithmMetrics am;
        am.name = algorithm_name(kinds[a]);
        am.errors = errors[a];
        summarize(am);
        for (double t : runtime[a]) am.runtime_s += t;
        if (kinds[a] != GainKind::OnlineRobust) {
            am.trace_mean = Matrix::Zero(n_trace, nf);
            int used = 0;
            for (const auto& tr : trace_err[a]) {
                if (tr.size() == 0 || !tr.allFinite()) continue;
                am.trace_mean += tr;
                ++used;
            }
            if (used) am.trace_mean /= used;
            else am.trace_mean.setConstant(kNaN);
            for (int i = 0; i < n_trace; ++i) am.trace_k.push_back(L - 1 + i - pl.tau);
        }
        rep.algorithms.push_back(std::move(am));
    }
    for (int r = 0; r < M; ++r) {
        if (!gate_used[static_cast<std::size_t>(r)]) continue;
        const auto& e = gate_entries[static_cast<std::size_t>(r)];
        rep.gate_log.push_back(e);
        ++rep.gate.windows;
        if (e.gate_fired) {
            ++rep.gate.fired;
            rep.gate.mean_ms += e.solve_ms;
            rep.gate.max_ms = std::max(rep.gate.max_ms, e.solve_ms);
        }
        if (e.solver_status.rfind("fallback:", 0) == 0) ++rep.gate.fallbacks;
    }
    if (rep.gate.fired) rep.gate.mean_ms /= rep.gate.fired;
    if (M == 1) rep.warnings.push_back("mc = 1: covariance reported as zero");
    return rep;
}

std::vector<SweepRow> gamma_f_sweep(const ExperimentConfig& cfg, const Pipeline& pl, std::vector<double> grid,
                                    const sdp::SolverOptions& opts) {
    if (!pl.prob) fail(ErrorCode::InvalidArgument, "gamma_f sweep needs the robust problem (request alg2)");
    const RobustProblem& prob = *pl.prob;
    const double gmin = gamma_f_min(prob).gamma_f_min2;
    if (grid.empty()) {
        // log-spaced offsets above gamma_f_min2, densest near the lower end
        const int P = cfg.sweep_points;
        for (int i = 0; i < P; ++i) {
            const double t = -3.0 + 3.0 * (i + 0.5) / P;
            grid.push_back(gmin + (1.0 - gmin) * std::pow(10.0, t));
        }
    }
    const int nf = pl.fault.n_f();
    const int M = cfg.mc;
    const int L = cfg.L;
    const int k_end = cfg.k_eval + pl.tau;
    const FaultProfile profile = evaluation_profile(nf);

    // residual windows are shared by every design of the sweep
    struct Sample {
        Matrix R;  // M x L n_y
        Matrix F;  // M x n_f
    };
    std::vector<Sample> samples;
    for (double eta : cfg.sweep_etas) {
        Sample s{Matrix::Constant(M, pl.g1.Ty.rows(), kNaN), Matrix::Constant(M, nf, kNaN)};
        const ControllerConfig ctrl = evaluation_controller(pl, eta);
        parallel_for(M, worker_count(cfg, M), [&](int r) {
            try {
                const TrajectoryDataset traj = simulate_closed_loop(pl.model, ctrl, profile, pl.fault, k_end + 1,
                                                                    cfg.seed + 1 + static_cast<std::uint64_t>(r));
                s.R.row(r) = residual(prob.wm.Ty, prob.wm.Tu, make_window(traj, k_end, L)).transpose();
                s.F.row(r) = traj.f.row(cfg.k_eval);
            } catch (const Error&) {
            }
        });
        samples.push_back(std::move(s));
    }

    std::vector<SweepRow> rows;
    for (double gf : grid) {
        Matrix G;
        double gz = kNaN, design_var = kNaN;
        std::string status;
        try {
            const double zmin = gamma_z_min(prob, gf, opts).gamma_z2;
            const double z1 = solve_G1(prob, gf, opts).gamma_z2;
            gz = 0.5 * (zmin + z1);
            const DesignPoint d = solve_offline_point(prob, gf, gz, opts);
            G = d.G;
            design_var = d.variance;
            status = sdp::to_string(d.solution.status);
        } catch (const Error& e) {
            status = to_string(e.code());
        }
        for (std::size_t e = 0; e < cfg.sweep_etas.size(); ++e) {
            SweepRow row;
            row.eta = cfg.sweep_etas[e];
            row.gamma_f2 = gf;
            row.gamma_z2 = gz;
            row.design_variance = design_var;
            row.status = status;
            if (G.size() == 0) {
                row.bias = row.variance = row.rmse = kNaN;
            } else {
                AlgorithmMetrics am;
                am.errors = samples[e].R * G.transpose() - samples[e].F;
                summarize(am);
                row.bias = std::sqrt(am.bias.squaredNorm() / nf);
                row.variance = am.cov.trace() / nf;
                row.rmse = am.rmse;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

TraceData trace_run(const ExperimentConfig& cfg, const Pipeline& pl, const std::vector<std::string>& algorithms,
                    const sdp::SolverOptions& opts) {
    const int nf = pl.fault.n_f();
    const int T = cfg.trace_length;
    const TrajectoryDataset traj = simulate_closed_loop(pl.model, evaluation_controller(pl, cfg.eta),
                                                        evaluation_profile(nf), pl.fault, T, cfg.seed + 1);
    TraceData td;
    td.f = traj.f;
    for (const auto& a : algorithms) {
        const GainKind k = parse_algorithm(a);
        Matrix est;
        switch (k) {
            case GainKind::Alg0: est = estimate_trajectory(pl.g0, traj); break;
            case GainKind::Nominal: est = estimate_trajectory(pl.g1, traj); break;
            case GainKind::OfflineRobust:
                if (!pl.g2) fail(ErrorCode::InvalidArgument, "alg2 requested but no robust design was built");
                est = estimate_trajectory(*pl.g2, traj);
                break;
            case GainKind::OnlineRobust:
                if (!pl.g2) fail(ErrorCode::InvalidArgument, "alg3 requested but no robust design was built");
                est = run_alg3(traj, *pl.g2, *pl.prob, *pl.stack, cfg.alpha, pl.gamma_f2, opts).estimates;
                break;
        }
        // row k of est estimates f(k - tau); realign to the fault time index
        Matrix aligned = Matrix::Constant(T, nf, kNaN);
        for (int t = 0; t + pl.tau < T; ++t) aligned.row(t) = est.row(t + pl.tau);
        td.names.push_back(algorithm_name(k));
        td.estimates.push_back(std::move(aligned));
    }
    return td;
}

// ---- output ----------------------------------------------------------------------

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "eta,gamma_f2,gamma_z2,bias,variance,rmse,design_variance,status\n";
    for (const auto& r : rows) {
        os << io::fmt(r.eta) << ',' << io::fmt(r.gamma_f2) << ',' << io::fmt(r.gamma_z2) << ',' << io::fmt(r.bias)
           << ',' << io::fmt(r.variance) << ',' << io::fmt(r.rmse) << ',' << io::fmt(r.design_variance) << ','
           << r.status << '\n';
    }
    return os.str();
}

std::vector<std::string> figure_data(const MetricsReport& report, const std::string& figure_id,
                                     const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        const std::string path = (std::filesystem::path(dir) / name).string();
        io::write_file(path, text);
        written.push_back(path);
    };
    if (figure_id == "2") {
        if (!report.trace) fail(ErrorCode::UnknownFigure, "report has no single-run trace for figure 2");
        const TraceData& td = *report.trace;
        std::ostringstream os;
        os << "k";
        for (Eigen::Index i = 0; i < td.f.cols(); ++i) os << ",f" << i + 1;
        for (const auto& n : td.names)
            for (Eigen::Index i = 0; i < td.f.cols(); ++i) os << ',' << n << "_f" << i + 1;
        os << '\n';
        for (Eigen::Index k = 0; k < td.f.rows(); ++k) {
            os << k;
            for (Eigen::Index i = 0; i < td.f.cols(); ++i) os << ',' << io::fmt(td.f(k, i));
            for (const auto& e : td.estimates)
                for (Eigen::Index i = 0; i < e.cols(); ++i) os << ',' << io::fmt(e(k, i));
            os << '\n';
        }
        emit("fig2_trace.csv", os.str());
    } else if (figure_id == "3a" || figure_id == "3b") {
        if (report.algorithms.empty()) fail(ErrorCode::UnknownFigure, "report has no error clouds for figure " + figure_id);
        const Eigen::Index nf = report.algorithms.front().errors.cols();
        std::ostringstream errs, ell;
        errs << "algorithm,run";
        for (Eigen::Index i = 0; i < nf; ++i) errs << ",e" << i + 1;
        errs << '\n';
        ell << "algorithm";
        for (Eigen::Index i = 0; i < nf; ++i) ell << ",center" << i + 1;
        for (Eigen::Index i = 0; i < nf; ++i)
            for (Eigen::Index j = 0; j < nf; ++j) ell << ",shape" << i + 1 << j + 1;
        ell << ",rmse,failures\n";
        for (const auto& a : report.algorithms) {
            for (Eigen::Index r = 0; r < a.errors.rows(); ++r) {
                errs << a.name << ',' << r;
                for (Eigen::Index i = 0; i < nf; ++i) errs << ',' << io::fmt(a.errors(r, i));
                errs << '\n';
            }
            ell << a.name;
            for (Eigen::Index i = 0; i < nf; ++i) ell << ',' << io::fmt(a.ellipse_center(i));
            for (Eigen::Index i = 0; i < nf; ++i)
                for (Eigen::Index j = 0; j < nf; ++j) ell << ',' << io::fmt(a.ellipse_shape(i, j));
            ell << ',' << io::fmt(a.rmse) << ',' << a.failures << '\n';
        }
        emit("fig" + figure_id + "_errors.csv", errs.str());
        emit("fig" + figure_id + "_ellipses.csv", ell.str());
    } else if (figure_id == "4") {
        if (report.sweep.empty()) fail(ErrorCode::UnknownFigure, "report has no gamma_f sweep for figure 4");
        emit("fig4_sweep.csv", sweep_csv(report.sweep));
    } else {
        fail(ErrorCode::UnknownFigure, "unknown figure '" + figure_id + "' (2, 3a, 3b, 4)");
    }
    return written;
}

std::string metrics_json(const MetricsReport& report) {
    json j;
    j["fault"] = report.fault;
    j["tau"] = report.tau;
    j["k_eval"] = report.k_eval;
    j["mc"] = report.mc;
    j["eta"] = report.eta;
    j["algorithms"] = json::array();
    for (const auto& a : report.algorithms) {
        json aj;
        aj["name"] = a.name;
        aj["bias"] = vec_json(a.bias);
        aj["cov"] = mat_rows(a.cov);
        aj["rmse"] = a.rmse;
        aj["ellipse"] = {{"center", vec_json(a.ellipse_center)}, {"shape", mat_rows(a.ellipse_shape)}};
        aj["failures"] = a.failures;
        aj["runtime_s"] = a.runtime_s;
        j["algorithms"].push_back(aj);
    }
    j["gate"] = {{"windows", report.gate.windows},
                 {"fired", report.gate.fired},
                 {"fallbacks", report.gate.fallbacks},
                 {"mean_ms", report.gate.mean_ms},
                 {"max_ms", report.gate.max_ms}};
    j["warnings"] = report.warnings;
    return j.dump(1);
}

}  // namespace rhfe

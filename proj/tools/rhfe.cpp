// rhfe: simulate, identify, design, estimate, sweep and bench from the command line.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "rhfe/experiment.hpp"
#include "rhfe/io.hpp"

using namespace rhfe;

namespace {

struct Common {
    std::string config;
    std::optional<std::string> model, fault, out, gamma_f2, gamma_z2;
    std::optional<int> N, p, L, m, mc, workers;
    std::optional<double> alpha, eta;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON config file (flags override its fields)");
    app->add_option("--model", c.model, "builtin 'vtol' or a model JSON path");
    app->add_option("--fault", c.fault, "sensor:J[,J..] | actuator:L[,L..] | both:J,L (1-based)");
    app->add_option("--N", c.N, "identification samples");
    app->add_option("--p", c.p, "identification lag");
    app->add_option("--L", c.L, "estimation horizon");
    app->add_option("--m", c.m, "Hankel depth (0: m = p)");
    app->add_option("--gamma-f2", c.gamma_f2, "fault-channel bound (default: nominal-gain bias)");
    app->add_option("--gamma-z2", c.gamma_z2, "data-channel bound (default: midpoint of its range)");
    app->add_option("--alpha", c.alpha, "online gate threshold");
    app->add_option("--eta", c.eta, "constant reference level of evaluation runs");
    app->add_option("--mc", c.mc, "Monte Carlo replicates");
    app->add_option("--seed", c.seed, "base seed");
    app->add_option("--workers", c.workers, "worker threads (0: all cores)");
    app->add_option("--out", c.out, "output directory");
}

double parse_gamma(const std::string& s) {
    if (s == "default") return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::InvalidArgument, "gamma value '" + s + "' is not a number");
}

ExperimentConfig resolve(const Common& c, ExperimentConfig base = {}) {
    ExperimentConfig cfg = c.config.empty() ? base : config_from_json(io::read_file(c.config), base);
    if (c.model) cfg.model = *c.model;
    if (c.fault) cfg.fault = io::parse_fault(*c.fault);
    if (c.N) cfg.N = *c.N;
    if (c.p) cfg.p = *c.p;
    if (c.L) cfg.L = *c.L;
    if (c.m) cfg.m = *c.m;
    if (c.gamma_f2) cfg.gamma_f2 = parse_gamma(*c.gamma_f2);
    if (c.gamma_z2) cfg.gamma_z2 = parse_gamma(*c.gamma_z2);
    if (c.alpha) cfg.alpha = *c.alpha;
    if (c.eta) cfg.eta = *c.eta;
    if (c.mc) cfg.mc = *c.mc;
    if (c.seed) cfg.seed = *c.seed;
    if (c.workers) cfg.workers = *c.workers;
    if (c.out) cfg.out = *c.out;
    validate(cfg);
    return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out);
    return (std::filesystem::path(cfg.out) / name).string();
}

void wrote(const std::string& path) { std::cout << "wrote " << path << '\n'; }

void print_warnings(const std::vector<std::string>& w) {
    for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

std::vector<TradeoffRow> gamma_z_table(const Pipeline& pl, int points) {
    const RobustProblem& prob = *pl.prob;
    const double zmin = gamma_z_min(prob, pl.gamma_f2).gamma_z2;
    const double z1 = solve_G1(prob, pl.gamma_f2).gamma_z2;
    std::vector<double> grid;
    for (int i = 0; i < points; ++i) grid.push_back(zmin + (z1 - zmin) * i / std::max(points - 1, 1));
    grid.push_back(1.5 * z1);
    return tradeoff_sweep(prob, {pl.gamma_f2}, grid);
}

// ---- subcommands ---------------------------------------------------------------

struct SimulateArgs {
    std::string kind = "identification";
    int T = 0;
    std::string output;
};

int run_simulate(const ExperimentConfig& cfg, const SimulateArgs& a) {
    auto [model, ctrl] = load_plant(cfg);
    const int nf = cfg.fault.n_f();
    TrajectoryDataset traj;
    if (a.kind == "identification") {
        traj = simulate_closed_loop(model, ctrl, FaultProfile::none(nf), cfg.fault, a.T > 0 ? a.T : cfg.N, cfg.seed);
    } else if (a.kind == "evaluation") {
        ctrl.reference = ReferenceSource::constant(Vector::Constant(model.nu(), cfg.eta));
        traj = simulate_closed_loop(model, ctrl, evaluation_profile(nf), cfg.fault, a.T > 0 ? a.T : cfg.trace_length, cfg.seed);
    } else {
        fail(ErrorCode::InvalidArgument, "--kind must be identification or evaluation");
    }
    const std::string path = a.output.empty() ? out_path(cfg, "trajectory.csv") : a.output;
    io::save_trajectory(path, traj);
    wrote(path);
    return 0;
}

struct IdentifyArgs {
    bool feedthrough = false;
    std::string data;
    std::string output;
};

int run_identify(const ExperimentConfig& cfg, const IdentifyArgs& a) {
    TrajectoryDataset traj;
    auto [model, ctrl] = load_plant(cfg);
    if (a.data.empty()) {
        traj = simulate_closed_loop(model, ctrl, FaultProfile::none(cfg.fault.n_f()), cfg.fault, cfg.N, cfg.seed);
    } else {
        traj = io::load_trajectory(a.data);
    }
    const bool feedthrough = a.feedthrough || !model.D().isZero(0.0);
    const MarkovSet ms = identify(traj, cfg.p, cfg.fault, feedthrough);
    const std::string path = a.output.empty() ? out_path(cfg, "identification.json") : a.output;
    io::save_identification(path, ms, cfg.fault);
    wrote(path);
    return 0;
}

struct DesignArgs {
    std::string identification;
    std::string mode = "alg2";
    std::string output;
    bool tradeoff = false;
    int points = 6;
};

int run_design(ExperimentConfig cfg, const DesignArgs& a) {
    const GainKind kind = parse_algorithm(a.mode);
    cfg.algorithms = {algorithm_name(kind)};
    std::optional<MarkovSet> id;
    if (!a.identification.empty()) id = io::load_identification(a.identification, &cfg.fault);
    else if (kind != GainKind::Alg0) fail(ErrorCode::InvalidArgument, "--identification is required for " + a.mode);
    const Pipeline pl = build_pipeline(cfg, {}, id ? &*id : nullptr);
    print_warnings(pl.warnings);
    const EstimatorGain& g = kind == GainKind::Alg0 ? pl.g0 : kind == GainKind::Nominal ? pl.g1 : *pl.g2;
    EstimatorGain out = g;
    out.kind = kind;
    const std::string path = a.output.empty() ? out_path(cfg, "estimator.json") : a.output;
    io::save_estimator(path, out);
    wrote(path);
    if (a.tradeoff) {
        if (!pl.prob) fail(ErrorCode::InvalidArgument, "--tradeoff needs a robust mode (alg2 or alg3)");
        const auto rows = gamma_z_table(pl, a.points);
        const std::string tpath = out_path(cfg, "tradeoff.csv");
        io::write_file(tpath, tradeoff_csv(rows));
        wrote(tpath);
    }
    if (pl.tuning)
        std::cout << "gamma_f_min2 " << io::fmt(pl.tuning->gamma_f_min2) << "\ngamma_z_min2 "
                  << io::fmt(pl.tuning->gamma_z_min2) << "\ngamma_z1_2 " << io::fmt(pl.tuning->gamma_z1_2) << '\n';
    if (pl.g2) std::cout << "gamma_f2 " << io::fmt(pl.gamma_f2) << "\ngamma_z2 " << io::fmt(pl.gamma_z2) << '\n';
    return 0;
}

struct EstimateArgs {
    std::string estimator;
    std::string data;
    std::string identification;
    std::string output;
};

int run_estimate(const ExperimentConfig& cfg, const EstimateArgs& a) {
    const EstimatorGain g = io::load_estimator(a.estimator);
    const TrajectoryDataset traj = io::load_trajectory(a.data);
    Matrix est;
    if (g.kind == GainKind::OnlineRobust) {
        if (a.identification.empty()) fail(ErrorCode::InvalidArgument, "alg3 estimation needs --identification");
        const MarkovSet id = io::load_identification(a.identification);
        const SensitivityStack stack = build_sensitivity(id, g.L, g.m, g.tau);
        const GramBlocks gb = gram_blocks(stack);
        const RobustProblem prob = build_problem(window_matrices(id, g.L, g.m, g.tau), id.Sigma_e, gb.P_Upsilon, gb.P_z);
        const Alg3Result r = run_alg3(traj, g, prob, stack, cfg.alpha, g.gamma_f2);
        est = r.estimates;
        const std::string lpath = out_path(cfg, "gate_log.csv");
        io::write_file(lpath, gate_log_csv(r.log));
        wrote(lpath);
    } else {
        est = estimate_trajectory(g, traj);
    }
    const std::string path = a.output.empty() ? out_path(cfg, "estimates.csv") : a.output;
    io::write_file(path, io::estimates_csv(est));
    wrote(path);
    return 0;
}

struct SweepArgs {
    bool gamma_f = false;
    bool gamma_z = false;
    int points = 0;
};

int run_sweep(ExperimentConfig cfg, const SweepArgs& a) {
    if (a.gamma_f == a.gamma_z) fail(ErrorCode::InvalidArgument, "choose exactly one of --gamma-f and --gamma-z");
    if (a.points > 0) cfg.sweep_points = a.points;
    cfg.algorithms = {"alg1", "alg2"};
    const Pipeline pl = build_pipeline(cfg);
    print_warnings(pl.warnings);
    if (a.gamma_f) {
        const auto rows = gamma_f_sweep(cfg, pl);
        const std::string path = out_path(cfg, "fig4_sweep.csv");
        io::write_file(path, sweep_csv(rows));
        wrote(path);
    } else {
        const auto rows = gamma_z_table(pl, a.points > 0 ? a.points : 6);
        const std::string path = out_path(cfg, "tradeoff.csv");
        io::write_file(path, tradeoff_csv(rows));
        wrote(path);
    }
    return 0;
}

struct BenchArgs {
    std::string target = "vtol";
    std::string figure;
};

int run_bench(ExperimentConfig cfg, const BenchArgs& a, const Common& flags) {
    if (a.target != "vtol") cfg.model = a.target;
    const std::string& fig = a.figure;
    if (fig == "3a" && !flags.fault) cfg.fault = FaultConfig{{}, {0, 1}};
    if (fig == "3b" && !flags.fault) cfg.fault = FaultConfig{{0, 1}, {}};
    if (fig == "3b" && !flags.mc && cfg.mc > 200) cfg.mc = 200;
    if (fig == "4" && !flags.mc && cfg.mc > 200) cfg.mc = 200;
    if (fig != "2" && fig != "3a" && fig != "3b" && fig != "4")
        fail(ErrorCode::UnknownFigure, "unknown figure '" + fig + "' (2, 3a, 3b, 4)");
    validate(cfg);

    const Pipeline pl = build_pipeline(cfg);
    print_warnings(pl.warnings);
    MetricsReport rep;
    if (fig == "2") {
        rep.fault = io::fault_to_string(pl.fault);
        rep.tau = pl.tau;
        rep.eta = cfg.eta;
        rep.trace = trace_run(cfg, pl, cfg.algorithms);
    } else if (fig == "4") {
        rep.fault = io::fault_to_string(pl.fault);
        rep.tau = pl.tau;
        rep.mc = cfg.mc;
        rep.sweep = gamma_f_sweep(cfg, pl);
    } else {
        rep = monte_carlo(cfg, pl, cfg.algorithms);
        const std::string mpath = out_path(cfg, "metrics_fig" + fig + ".json");
        io::write_file(mpath, metrics_json(rep));
        wrote(mpath);
        for (const auto& alg : rep.algorithms)
            std::cout << alg.name << " rmse " << io::fmt(alg.rmse) << " failures " << alg.failures << '\n';
        if (!rep.gate_log.empty()) {
            const std::string gpath = out_path(cfg, "gate_log_fig" + fig + ".csv");
            io::write_file(gpath, gate_log_csv(rep.gate_log));
            wrote(gpath);
        }
    }
    for (const auto& path : figure_data(rep, fig, cfg.out)) wrote(path);
    return 0;
}

int exit_code(ErrorCode c) {
    switch (c) {
        case ErrorCode::SolverFailure:
        case ErrorCode::Infeasible:
        case ErrorCode::Unbounded:
        case ErrorCode::NumericalFailure:
        case ErrorCode::InfeasibleFaultConstraint:
            return 3;
        default:
            return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust data-driven fault estimation toolkit"};
    app.require_subcommand(1);

    Common c_sim, c_id, c_des, c_est, c_swp, c_bench;

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Simulate the closed loop and write a trajectory CSV");
    add_common(sim, c_sim);
    sim->add_option("--kind", sa.kind, "identification (white reference, no fault) or evaluation")
        ->check(CLI::IsMember({"identification", "evaluation"}));
    sim->add_option("--T", sa.T, "samples (default N, or trace length for evaluation)");
    sim->add_option("-o,--output", sa.output, "output file");

    IdentifyArgs ia;
    auto* idn = app.add_subcommand("identify", "Least-squares Markov parameter identification");
    add_common(idn, c_id);
    idn->add_option("--data", ia.data, "trajectory CSV (default: simulate N samples)");
    idn->add_flag("--feedthrough", ia.feedthrough, "estimate H_0^u (default only when the model has D != 0)");
    idn->add_option("-o,--output", ia.output, "output JSON (M blocks go to a .bin sidecar)");

    DesignArgs da;
    auto* des = app.add_subcommand("design", "Design an estimator gain");
    add_common(des, c_des);
    des->add_option("--identification", da.identification, "identification JSON");
    des->add_option("--mode", da.mode, "alg0|alg1|alg2|alg3 (nominal, offline, online)");
    des->add_option("-o,--output", da.output, "output estimator JSON");
    des->add_flag("--tradeoff", da.tradeoff, "also write the gamma_z2 trade-off table");
    des->add_option("--points", da.points, "trade-off grid points");

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Run an estimator over a trajectory");
    add_common(est, c_est);
    est->add_option("--estimator", ea.estimator, "estimator JSON")->required();
    est->add_option("--data", ea.data, "trajectory CSV")->required();
    est->add_option("--identification", ea.identification, "identification JSON (alg3 only)");
    est->add_option("-o,--output", ea.output, "output CSV");

    SweepArgs wa;
    auto* swp = app.add_subcommand("sweep", "Trade-off sweeps");
    add_common(swp, c_swp);
    swp->add_flag("--gamma-f", wa.gamma_f, "Alg2 bias/variance/RMSE over gamma_f2 for each sweep eta");
    swp->add_flag("--gamma-z", wa.gamma_z, "design metrics over gamma_z2 at the default gamma_f2");
    swp->add_option("--points", wa.points, "grid points");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Benchmark figures as data files");
    add_common(bench, c_bench);
    bench->add_option("target", ba.target, "vtol or a model JSON path");
    bench->add_option("--figure", ba.figure, "2, 3a, 3b or 4")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*sim) return run_simulate(resolve(c_sim), sa);
        if (*idn) return run_identify(resolve(c_id), ia);
        if (*des) return run_design(resolve(c_des), da);
        if (*est) return run_estimate(resolve(c_est), ea);
        if (*swp) return run_sweep(resolve(c_swp), wa);
        if (*bench) return run_bench(resolve(c_bench), ba, c_bench);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "rhfe/estimator.hpp"

using namespace rhfe;

TEST_CASE("block Toeplitz and Hankel layouts") {
    std::vector<Matrix> H;
    for (int i = 0; i < 4; ++i) H.push_back(Matrix::Constant(2, 1, i + 1.0));
    const Matrix T = block_toeplitz(H, 3);
    REQUIRE(T.rows() == 6);
    REQUIRE(T.cols() == 3);
    CHECK(T(0, 0) == 1.0);
    CHECK(T(4, 0) == 3.0);
    CHECK(T(4, 2) == 1.0);
    CHECK(T(0, 2) == 0.0);
    const Matrix K = block_hankel(H, 3, 2);
    CHECK(K(0, 0) == 2.0);
    CHECK(K(2, 1) == 4.0);
    CHECK(K(4, 1) == 0.0);  // H_4 is past the end
    CHECK_THROWS_AS(block_hankel(H, 0, 1), Error);
}

TEST_CASE("fault selector picks the trailing columns") {
    const Matrix S = fault_selector(5, 2);
    CHECK(S(0, 3) == 1.0);
    CHECK(S(1, 4) == 1.0);
    CHECK(S.sum() == 2.0);
}

TEST_CASE("nominal gain is the weighted least-squares estimator") {
    std::mt19937_64 rng(12);
    const int L = 4, ny = 2, nf = 2;
    const Matrix U = fixtures::gaussian(L * ny, 5, rng);
    const Matrix Se = fixtures::spd(ny, rng);
    const Matrix G = nominal_gain_matrix(U, Se, L, nf);
    const Matrix Si = linalg::kron(Matrix::Identity(L, L), Se.inverse());
    const Matrix ref = (U.transpose() * Si * U).inverse() * U.transpose() * Si;
    CHECK((G - ref.bottomRows(nf)).norm() < 1e-10 * ref.norm());
    // exact data -> exact fault
    const Vector theta = fixtures::gaussian(5, 1, rng);
    CHECK((G * (U * theta) - theta.tail(nf)).norm() < 1e-10);
    CHECK_THROWS_AS(nominal_gain_matrix(U, Se, L + 1, nf), Error);
}

TEST_CASE("windows, residuals and trajectory estimates") {
    const auto [model, ctrl] = vtol_model();
    const TrajectoryDataset traj =
        simulate_closed_loop(model, ctrl, FaultProfile::none(2), fixtures::actuators(), 40, 2);
    const StackedWindow w = make_window(traj, 9, 5);
    CHECK(w.y_win.size() == 20);
    CHECK((w.y_win.segment(16, 4) - traj.y.row(9).transpose()).norm() == 0.0);
    CHECK((w.u_win.head(2) - traj.u.row(5).transpose()).norm() == 0.0);
    CHECK(w.z().size() == 30);
    CHECK_THROWS_AS(make_window(traj, 3, 5), Error);
    CHECK_THROWS_AS(make_window(traj, 40, 5), Error);

    const PredictorModel pred = steady_state_predictor(model);
    const MarkovSet truth = markov_parameters(pred, fault_matrices(model, pred, fixtures::actuators()), 12);
    const EstimatorGain g = nominal_gain(window_matrices(truth, 5, 4, 1), pred.Sigma_e, GainKind::Alg0);
    const Vector r = residual(g.Ty, g.Tu, w);
    CHECK((r - (w.y_win - g.Ty * w.y_win - g.Tu * w.u_win)).norm() == 0.0);
    const Matrix est = estimate_trajectory(g, traj);
    CHECK(std::isnan(est(3, 0)));
    CHECK((est.row(9).transpose() - estimate(g, w)).norm() == 0.0);
}

TEST_CASE("Alg0 gain annihilates the initial-condition term") {
    const auto [model, ctrl] = vtol_model();
    const PredictorModel pred = steady_state_predictor(model);
    for (const FaultConfig& fc : {fixtures::actuators(), fixtures::sensors()}) {
        const MarkovSet truth = markov_parameters(pred, fault_matrices(model, pred, fc), 45);
        const int tau = relative_degree(truth, 2);
        const WindowMatrices wm = window_matrices(truth, 30, 10, tau);
        const EstimatorGain g = nominal_gain(wm, pred.Sigma_e, GainKind::Alg0);
        const Matrix GU = g.Gmat * wm.upsilon;
        const Matrix sel = fault_selector(static_cast<int>(wm.upsilon.cols()), 2);
        CHECK((GU - sel).norm() < 1e-8);
    }
}

TEST_CASE("original-model and predictor-form Alg0 agree") {
    const auto [model, ctrl] = vtol_model();
    const PredictorModel pred = steady_state_predictor(model);
    const MarkovSet truth = markov_parameters(pred, fault_matrices(model, pred, fixtures::sensors()), 30);
    const EstimatorGain gp = nominal_gain(window_matrices(truth, 15, 6, 0), pred.Sigma_e, GainKind::Alg0);
    const EstimatorGain go = original_model_gain(model, fixtures::sensors(), 15, 0);
    const TrajectoryDataset traj =
        simulate_closed_loop(model, ctrl, step_sine_fault_profile(), fixtures::sensors(), 120, 31);
    for (int k : {14, 60, 119}) {
        const StackedWindow w = make_window(traj, k, 15);
        const Vector a = estimate(gp, w), b = estimate(go, w);
        CHECK((a - b).norm() <= 1e-6 * b.norm());
    }
}

TEST_CASE("gain kind names round-trip") {
    for (GainKind k : {GainKind::Alg0, GainKind::Nominal, GainKind::OfflineRobust, GainKind::OnlineRobust})
        CHECK(gain_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(gain_kind_from_string("alg9"), Error);
}

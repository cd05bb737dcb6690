#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "rhfe/simulator.hpp"

using namespace rhfe;

TEST_CASE("zero-order hold of a scalar lag") {
    Matrix a(1, 1), b(1, 1);
    a << -2.0;
    b << 3.0;
    const auto [A, B] = zoh_discretize(a, b, 0.25);
    CHECK(A(0, 0) == doctest::Approx(std::exp(-0.5)));
    CHECK(B(0, 0) == doctest::Approx(1.5 * (1.0 - std::exp(-0.5))));
}

TEST_CASE("VTOL plant is open-loop unstable and stabilized by the feedback") {
    const auto [model, ctrl] = vtol_model();
    CHECK(linalg::spectral_radius(model.A()) > 1.0);
    CHECK(closed_loop_radius(model, ctrl.Ky) < 1.0);
    CHECK_FALSE(closed_loop_warning(model, ctrl.Ky).has_value());
    CHECK(closed_loop_warning(model, Matrix::Zero(2, 4)).has_value());
}

TEST_CASE("fault profile is zero up to the onset") {
    const FaultProfile fp = step_sine_fault_profile();
    CHECK(fp.at(50).norm() == 0.0);
    const Vector f = fp.at(55);
    CHECK(f(0) == doctest::Approx(std::sin(0.1 * std::numbers::pi * 55)));
    CHECK(f(1) == 1.0);
}

TEST_CASE("trajectories are reproducible per seed") {
    const auto [model, ctrl] = vtol_model();
    const auto none = FaultProfile::none(2);
    const TrajectoryDataset a = simulate_closed_loop(model, ctrl, none, fixtures::actuators(), 80, 4);
    const TrajectoryDataset b = simulate_closed_loop(model, ctrl, none, fixtures::actuators(), 80, 4);
    const TrajectoryDataset c = simulate_closed_loop(model, ctrl, none, fixtures::actuators(), 80, 5);
    CHECK((a.y - b.y).norm() == 0.0);
    CHECK((a.u - b.u).norm() == 0.0);
    CHECK((a.y - c.y).norm() > 0.0);
    // controller law holds sample by sample
    for (int k = 0; k < 80; ++k) {
        const Vector u = -ctrl.Ky * a.y.row(k).transpose() + a.eta.row(k).transpose();
        CHECK((u - a.u.row(k).transpose()).norm() < 1e-12);
    }
}

TEST_CASE("fault response superposes on the noise realization") {
    const auto [model, base] = vtol_model();
    ControllerConfig ctrl = base;
    ctrl.reference = ReferenceSource::constant(Vector::Constant(2, 3.0));
    for (const FaultConfig& fc : {fixtures::actuators(), fixtures::sensors()}) {
        const int T = 120;
        const TrajectoryDataset h = simulate_closed_loop(model, ctrl, FaultProfile::none(2), fc, T, 9);
        const FaultProfile fp = step_sine_fault_profile();
        const TrajectoryDataset f = simulate_closed_loop(model, ctrl, fp, fc, T, 9);
        CHECK((h.eta - f.eta).norm() == 0.0);

        // deterministic closed-loop response to the fault alone
        Matrix E = Matrix::Zero(4, 2), G = Matrix::Zero(4, 2);
        int col = 0;
        for (int j : fc.sensors) G(j, col++) = 1.0;
        for (int l : fc.actuators) E.col(col++) = model.B().col(l);
        Vector x = Vector::Zero(4);
        double worst = 0.0;
        for (int k = 0; k < T; ++k) {
            const Vector fk = fp.at(k);
            const Vector dy = model.C() * x + G * fk;
            const Vector du = -ctrl.Ky * dy;
            worst = std::max(worst, dy.norm());
            CHECK((f.y.row(k) - h.y.row(k) - dy.transpose()).norm() < 1e-9);
            CHECK((f.u.row(k) - h.u.row(k) - du.transpose()).norm() < 1e-9);
            x = model.A() * x + model.B() * du + E * fk;
        }
        CHECK(worst > 0.0);
    }
}

TEST_CASE("simulation argument checks") {
    const auto [model, ctrl] = vtol_model();
    CHECK_THROWS_AS(simulate_closed_loop(model, ctrl, FaultProfile::none(1), fixtures::actuators(), 10, 1), Error);
    CHECK_THROWS_AS(simulate_closed_loop(model, ctrl, FaultProfile::none(2), fixtures::actuators(), 0, 1), Error);
    ControllerConfig bad = ctrl;
    bad.Ky = Matrix::Zero(4, 2);
    CHECK_THROWS_AS(simulate_closed_loop(model, bad, FaultProfile::none(2), fixtures::actuators(), 10, 1), Error);
    // open loop diverges
    ControllerConfig open = ctrl;
    open.Ky.setZero();
    open.reference = ReferenceSource::constant(Vector::Constant(2, 50.0));
    try {
        simulate_closed_loop(model, open, FaultProfile::none(2), fixtures::actuators(), 5000, 1);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DivergedState);
    }
}

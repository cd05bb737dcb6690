#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "rhfe/system_model.hpp"

using namespace rhfe;

namespace {

StateSpaceModel scalar_model(double a, double q, double r) {
    Matrix A(1, 1), B(1, 1), C(1, 1), D(1, 1), F(1, 1), Q(1, 1), R(1, 1);
    A << a;
    B << 1.0;
    C << 1.0;
    D << 0.0;
    F << 1.0;
    Q << q;
    R << r;
    return StateSpaceModel(A, B, C, D, F, Q, R);
}

}  // namespace

TEST_CASE("scalar Riccati matches the quadratic closed form") {
    for (double a : {0.5, 1.3, -2.0}) {
        const double q = 0.7, r = 0.4;
        const PredictorModel p = steady_state_predictor(scalar_model(a, q, r));
        const double b = r - a * a * r - q;
        const double P = 0.5 * (-b + std::sqrt(b * b + 4.0 * q * r));
        CHECK(p.P(0, 0) == doctest::Approx(P).epsilon(1e-9));
        CHECK(p.K(0, 0) == doctest::Approx(a * P / (P + r)).epsilon(1e-9));
        CHECK(p.Sigma_e(0, 0) == doctest::Approx(P + r).epsilon(1e-9));
        CHECK(std::abs(p.Phi(0, 0)) < 1.0);
    }
}

TEST_CASE("VTOL predictor satisfies the filtering Riccati equation") {
    const auto [model, ctrl] = vtol_model();
    const PredictorModel p = steady_state_predictor(model);
    const Matrix& A = model.A();
    const Matrix& C = model.C();
    const Matrix S = C * p.P * C.transpose() + model.R();
    const Matrix rhs = A * p.P * A.transpose() -
                       A * p.P * C.transpose() * S.inverse() * C * p.P * A.transpose() +
                       model.F() * model.Q() * model.F().transpose();
    CHECK((rhs - p.P).norm() <= 1e-8 * p.P.norm());
    CHECK(linalg::spectral_radius(p.Phi) < 1.0);
    CHECK((p.Phi - (A - p.K * C)).norm() < 1e-12);
    CHECK((p.Btilde - (model.B() - p.K * model.D())).norm() < 1e-12);
}

TEST_CASE("model validation rejects malformed plants") {
    Matrix A = Matrix::Identity(2, 2) * 0.5, B = Matrix::Ones(2, 1), C = Matrix::Identity(2, 2);
    Matrix D = Matrix::Zero(2, 1), F = Matrix::Identity(2, 2), Q = Matrix::Identity(2, 2),
           R = Matrix::Identity(2, 2);
    auto code_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    CHECK(code_of([&] { StateSpaceModel(A, B, C, Matrix::Zero(3, 1), F, Q, R); }) == ErrorCode::InvalidModel);
    Matrix Qbad = Q;
    Qbad(0, 1) = 0.3;
    CHECK(code_of([&] { StateSpaceModel(A, B, C, D, F, Qbad, R); }) == ErrorCode::InvalidModel);
    CHECK(code_of([&] { StateSpaceModel(A, B, C, D, F, Q, Matrix::Zero(2, 2)); }) == ErrorCode::InvalidModel);
    // unstable mode invisible to C
    Matrix Au = A;
    Au(1, 1) = 1.5;
    Matrix C1(1, 2);
    C1 << 1.0, 0.0;
    CHECK(code_of([&] { StateSpaceModel(Au, B, C1, Matrix::Zero(1, 1), F, Q, Matrix::Identity(1, 1)); }) ==
          ErrorCode::InvalidModel);
    // unit-circle mode without process noise
    Matrix Ai = A;
    Ai(0, 0) = 1.0;
    Matrix F1(2, 1);
    F1 << 0.0, 1.0;
    CHECK(code_of([&] { StateSpaceModel(Ai, B, C, D, F1, Matrix::Identity(1, 1), R); }) ==
          ErrorCode::InvalidModel);
    CHECK_NOTHROW(StateSpaceModel(A, B, C, D, F, Q, R));
}

TEST_CASE("fault matrices follow the sensor-first column convention") {
    const auto [model, ctrl] = vtol_model();
    const PredictorModel p = steady_state_predictor(model);
    const FaultMatrices fm = fault_matrices(model, p, FaultConfig{{2}, {1}});
    REQUIRE(fm.G.cols() == 2);
    CHECK(fm.G(2, 0) == 1.0);
    CHECK(fm.G.col(0).sum() == 1.0);
    CHECK((fm.Etilde.col(0) + p.K.col(2)).norm() == 0.0);
    CHECK((fm.E.col(1) - model.B().col(1)).norm() == 0.0);
    CHECK((fm.G.col(1) - model.D().col(1)).norm() == 0.0);
    CHECK((fm.Etilde.col(1) - p.Btilde.col(1)).norm() == 0.0);

    CHECK_THROWS_AS(fault_matrices(model, p, FaultConfig{{4}, {}}), Error);
    try {
        fault_matrices(model, p, FaultConfig{{}, {2}});
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IndexOutOfRange);
    }
}

TEST_CASE("Markov parameters are the predictor impulse response") {
    const auto [model, ctrl] = vtol_model();
    const PredictorModel p = steady_state_predictor(model);
    const FaultMatrices fm = fault_matrices(model, p, fixtures::actuators());
    const MarkovSet ms = markov_parameters(p, fm, 6);
    // impulse on u(0) through x(k+1) = Phi x + Btilde u
    Matrix x = p.Btilde;
    for (int i = 1; i <= 6; ++i) {
        CHECK((ms.Hu[static_cast<std::size_t>(i)] - p.C * x).norm() < 1e-10);
        x = p.Phi * x;
    }
    CHECK((ms.Hu[0] - model.D()).norm() == 0.0);
    CHECK(ms.Hy[0].norm() == 0.0);
    CHECK(relative_degree(ms, 2) == 1);
    const MarkovSet sm = markov_parameters(p, fault_matrices(model, p, fixtures::sensors()), 4);
    CHECK(relative_degree(sm, 2) == 0);
}

TEST_CASE("relative degree rejects zero and rank-deficient channels") {
    MarkovSet ms;
    ms.Hf = {Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
    CHECK_THROWS_AS(relative_degree(ms, 1), Error);
    ms.Hf = {Matrix::Zero(2, 2), Matrix::Ones(2, 2)};
    try {
        relative_degree(ms, 2);
        FAIL("expected RankDeficientFaultChannel");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficientFaultChannel);
    }
}

TEST_CASE("fault subsystem zeros and verdicts") {
    auto sub = [](double zero) {
        FaultSubsystem s;
        s.Phi.resize(2, 2);
        s.Phi << 0.0, 1.0, -0.08, 0.6;
        s.Etilde.resize(2, 1);
        s.Etilde << 0.0, 1.0;
        s.C.resize(1, 2);
        s.C << -zero, 1.0;
        s.G = Matrix::Zero(1, 1);
        return s;
    };
    const UnbiasednessReport biased = analyze_fault_subsystem(sub(1.5));
    REQUIRE(biased.transmission_zeros.size() == 1);
    CHECK(biased.transmission_zeros[0].real() == doctest::Approx(1.5));
    CHECK(biased.verdict == Verdict::Biased);
    CHECK(biased.tau == 1);
    CHECK(analyze_fault_subsystem(sub(-0.3)).verdict == Verdict::AsymptoticallyUnbiased);
}

TEST_CASE("pure feedthrough fault: zeros sit at the observable modes") {
    FaultSubsystem s;
    s.Phi = Vector{{0.5, 0.2}}.asDiagonal();
    s.Etilde = Matrix::Zero(2, 1);
    s.G = Matrix::Identity(1, 1);

    s.C = Matrix::Zero(1, 2);
    const UnbiasednessReport hidden = analyze_fault_subsystem(s);
    CHECK(hidden.transmission_zeros.empty());
    CHECK(hidden.unobservable_modes.size() == 2);
    CHECK(hidden.tau == 0);
    CHECK(hidden.verdict == Verdict::Unbiased);

    s.C = Matrix{{1.0, 0.0}};
    const UnbiasednessReport mixed = analyze_fault_subsystem(s);
    REQUIRE(mixed.transmission_zeros.size() == 1);
    CHECK(mixed.transmission_zeros[0].real() == doctest::Approx(0.5));
    REQUIRE(mixed.unobservable_modes.size() == 1);
    CHECK(mixed.unobservable_modes[0].real() == doctest::Approx(0.2));
    CHECK(mixed.verdict == Verdict::AsymptoticallyUnbiased);
}

TEST_CASE("horizon warning fires only for short horizons") {
    UnbiasednessReport r;
    r.observability_index = 3;
    r.tau = 1;
    CHECK(horizon_warning(r, 2).has_value());
    CHECK_FALSE(horizon_warning(r, 30).has_value());
}

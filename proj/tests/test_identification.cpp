#include <doctest.h>

#include "fixtures.hpp"
#include "rhfe/identification.hpp"

using namespace rhfe;

namespace {

struct ArxData {
    Matrix u, y, e;
    MarkovSet truth;
};

// Exact ARX of order p driven by white input and white innovation.
ArxData arx(int p, int T, bool feedthrough, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int nu = 2, ny = 3;
    ArxData d;
    d.truth.Hu.push_back(feedthrough ? Matrix(0.3 * fixtures::gaussian(ny, nu, rng)) : Matrix::Zero(ny, nu));
    d.truth.Hy.push_back(Matrix::Zero(ny, ny));
    for (int i = 1; i <= p; ++i) {
        const double s = 0.5 / (i * i);
        d.truth.Hu.push_back(s * fixtures::gaussian(ny, nu, rng));
        d.truth.Hy.push_back(0.4 * s * fixtures::gaussian(ny, ny, rng));
    }
    d.u = fixtures::gaussian(T, nu, rng);
    d.e = 0.2 * fixtures::gaussian(T, ny, rng);
    d.y = Matrix::Zero(T, ny);
    for (int t = 0; t < T; ++t) {
        Vector yt = d.e.row(t).transpose() + d.truth.Hu[0] * d.u.row(t).transpose();
        for (int i = 1; i <= p && t - i >= 0; ++i) {
            yt += d.truth.Hu[static_cast<std::size_t>(i)] * d.u.row(t - i).transpose() +
                  d.truth.Hy[static_cast<std::size_t>(i)] * d.y.row(t - i).transpose();
        }
        d.y.row(t) = yt.transpose();
    }
    return d;
}

TrajectoryDataset as_traj(const ArxData& d, int nf) {
    TrajectoryDataset t;
    t.u = d.u;
    t.y = d.y;
    t.f = Matrix::Zero(d.u.rows(), nf);
    t.eta = Matrix::Zero(d.u.rows(), d.u.cols());
    return t;
}

}  // namespace

TEST_CASE("regressor columns stack the past samples oldest first") {
    Matrix u(5, 1), y(5, 1);
    u << 1, 2, 3, 4, 5;
    y << 10, 20, 30, 40, 50;
    const RegressionData r = regression_matrices(u, y, 2);
    REQUIRE(r.Z_id.rows() == 5);
    REQUIRE(r.n_bar == 3);
    Vector c0(5);
    c0 << 1, 10, 2, 20, 3;
    CHECK((r.Z_id.col(0) - c0).norm() == 0.0);
    CHECK(r.Y_id(0, 2) == 50.0);
    const RegressionData s = regression_matrices(u, y, 2, false);
    CHECK(s.Z_id.rows() == 4);
    CHECK((s.Z_id.col(0) - c0.head(4)).norm() == 0.0);
}

TEST_CASE("least-squares error equals E_id times the sensitivities") {
    for (bool ft : {true, false}) {
        const int p = 3;
        const ArxData d = arx(p, 400, ft, ft ? 1 : 2);
        const RegressionData reg = regression_matrices(d.u, d.y, p, ft);
        const LsFit fit = ls_identify(reg);
        const MarkovSet ms = extract_markov(fit, FaultConfig{{1}, {0}}, reg);
        const Matrix E = d.e.bottomRows(reg.n_bar).transpose();
        for (int i = 0; i <= p; ++i) {
            const auto k = static_cast<std::size_t>(i);
            CHECK((ms.Hu[k] - d.truth.Hu[k] - E * ms.Mu[k]).norm() < 1e-10);
            CHECK((ms.Hy[k] - d.truth.Hy[k] - E * ms.My[k]).norm() < 1e-10);
            CHECK((ms.Hf[k].col(0) - (i == 0 ? Vector(Vector::Unit(3, 1)) : Vector(-ms.Hy[k].col(1)))).norm() ==
                  0.0);
            CHECK((ms.Hf[k].col(1) - ms.Hu[k].col(0)).norm() == 0.0);
            CHECK((ms.Mf[k].col(1) - ms.Mu[k].col(0)).norm() == 0.0);
        }
        if (!ft) CHECK(ms.Hu[0].norm() == 0.0);
        // residual orthogonal to the regressors
        CHECK((fit.E_hat * reg.Z_id.transpose()).norm() < 1e-9 * reg.Z_id.norm());
    }
}

TEST_CASE("assemble_xi places the blocks in regressor order") {
    const ArxData d = arx(2, 10, true, 3);
    MarkovSet ms = d.truth;
    const Matrix xi = assemble_xi(ms, 2);
    REQUIRE(xi.cols() == 2 * 5 + 2);
    CHECK((xi.middleCols(0, 2) - ms.Hu[2]).norm() == 0.0);
    CHECK((xi.middleCols(2, 3) - ms.Hy[2]).norm() == 0.0);
    CHECK((xi.middleCols(10, 2) - ms.Hu[0]).norm() == 0.0);
}

TEST_CASE("innovation covariance is the centered sample covariance") {
    std::mt19937_64 rng(8);
    const Matrix r = fixtures::gaussian(3, 50, rng);
    const Matrix S = innovation_cov(r);
    const Vector mu = r.rowwise().mean();
    Matrix ref = Matrix::Zero(3, 3);
    for (int c = 0; c < 50; ++c) ref += (r.col(c) - mu) * (r.col(c) - mu).transpose();
    ref /= 49.0;
    CHECK((S - ref).norm() < 1e-12);
    const Matrix Z = innovation_cov(Matrix::Zero(2, 10));
    CHECK(linalg::lambda_min_sym(Z) > 0.0);
}

TEST_CASE("identification data checks") {
    const ArxData d = arx(2, 200, false, 4);
    TrajectoryDataset t = as_traj(d, 1);
    CHECK_NOTHROW(build_regression(t, 2));
    t.f(5, 0) = 1.0;
    CHECK_THROWS_AS(build_regression(t, 2), Error);
    TrajectoryDataset shortt = as_traj(arx(2, 11, false, 4), 1);
    CHECK_THROWS_AS(build_regression(shortt, 2), Error);
    TrajectoryDataset flat = as_traj(d, 1);
    flat.u.setZero();
    try {
        build_regression(flat, 2);
        FAIL("expected a rank-deficient regressor");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficientRegressor);
    }
}

TEST_CASE("closed-loop VTOL identification without feedthrough is consistent") {
    const auto [model, ctrl] = vtol_model();
    const PredictorModel pred = steady_state_predictor(model);
    const MarkovSet truth = markov_parameters(pred, fault_matrices(model, pred, fixtures::actuators()), 10);
    const TrajectoryDataset traj =
        simulate_closed_loop(model, ctrl, FaultProfile::none(2), fixtures::actuators(), 20000, 6);
    const MarkovSet ms = identify(traj, 10, fixtures::actuators());
    CHECK((ms.Hu[1] - truth.Hu[1]).norm() < 0.1 * truth.Hu[1].norm());
    CHECK((ms.Sigma_e - pred.Sigma_e).norm() < 0.1 * pred.Sigma_e.norm());
    CHECK(ms.n_bar == 20000 - 10);
}

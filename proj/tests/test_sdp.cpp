#include <doctest.h>

#include <json.hpp>

#include "fixtures.hpp"
#include "rhfe/sdp.hpp"

using namespace rhfe;
using namespace rhfe::sdp;

namespace {

ConicProgram lp(const Matrix& G, const Vector& h, const Vector& c) {
    ConicProgram p;
    p.add_vars(static_cast<int>(c.size()));
    p.c = c;
    p.linear.G = G;
    p.linear.h = h;
    return p;
}

Vector e(int n, int i) { return Vector::Unit(n, i); }

}  // namespace

TEST_CASE("linear program optimum") {
    // min x0 + x1, x0 >= 1, x1 >= 2
    const Solution s = solve(lp(-Matrix::Identity(2, 2), Vector{{-1.0, -2.0}}, Vector{{1.0, 1.0}}));
    REQUIRE(s.ok());
    CHECK(s.primal_obj == doctest::Approx(3.0).epsilon(1e-7));
    CHECK(s.x(1) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("second-order cone optimum") {
    // min t, ||(3, 4)|| <= t
    ConicProgram p;
    p.add_vars(1);
    p.c(0) = 1.0;
    SocBlock q;
    q.G = Matrix::Zero(3, 1);
    q.G(0, 0) = -1.0;
    q.h = Vector{{0.0, 3.0, 4.0}};
    p.soc.push_back(q);
    const Solution s = solve(p);
    REQUIRE(s.ok());
    CHECK(s.x(0) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("semidefinite optima") {
    SUBCASE("[[x, 1], [1, 1]] >= 0") {
        ConicProgram p;
        p.add_vars(1);
        p.c(0) = 1.0;
        PsdBlock b;
        b.C = Matrix{{0.0, 1.0}, {1.0, 1.0}};
        b.terms.push_back({0, e(2, 0), 0.5 * e(2, 0)});
        p.psd.push_back(b);
        const Solution s = solve(p);
        REQUIRE(s.ok());
        CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("largest eigenvalue epigraph") {
        std::mt19937_64 rng(4);
        const Matrix a = fixtures::gaussian(4, 4, rng);
        const Matrix A = a + a.transpose();
        ConicProgram p;
        p.add_vars(1);
        p.c(0) = 1.0;
        PsdBlock b;
        b.C = -A;
        for (int i = 0; i < 4; ++i) b.terms.push_back({0, e(4, i), 0.5 * e(4, i)});
        p.psd.push_back(b);
        const Solution s = solve(p);
        REQUIRE(s.ok());
        const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(A).eigenvalues().maxCoeff();
        CHECK(s.x(0) == doctest::Approx(lmax).epsilon(1e-6));
    }
}

TEST_CASE("infeasible and unbounded programs are reported") {
    // x >= 1 and x <= 0
    const Solution inf = solve(lp(Matrix{{-1.0}, {1.0}}, Vector{{-1.0, 0.0}}, Vector{{1.0}}));
    CHECK(inf.status == Status::Infeasible);
    CHECK_THROWS_AS(solve_or_throw(lp(Matrix{{-1.0}, {1.0}}, Vector{{-1.0, 0.0}}, Vector{{1.0}})), Error);
    // min x, x <= 0
    const Solution unb = solve(lp(Matrix{{1.0}}, Vector{{0.0}}, Vector{{1.0}}));
    CHECK(unb.status == Status::Unbounded);
}

TEST_CASE("shape errors") {
    ConicProgram p = lp(Matrix::Identity(2, 2), Vector::Zero(2), Vector::Ones(2));
    p.c.resize(3);
    CHECK_THROWS_AS(solve(p), Error);
}

TEST_CASE("gain lift matches the direct quadratic form") {
    std::mt19937_64 rng(8);
    const int r = 2, c = 3, ns = 2;
    const Matrix W = fixtures::gaussian(c + ns, c + ns, rng);
    const Matrix M = W * W.transpose();
    const Matrix S = fixtures::gaussian(r, ns, rng);
    ConicProgram prog;
    const GainLayout lay = add_gain(prog, r, c);
    const double gamma2 = 3.0;
    const PsdBlock blk = quad_constraint_to_psd(lay, W, S, gamma2);
    for (int s = 0; s < 200; ++s) {
        const Matrix G = 0.3 * fixtures::gaussian(r, c, rng);
        Vector x = Vector::Zero(prog.n_vars);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) x(lay.index(i, j)) = G(i, j);
        CHECK((extract_gain(x, lay) - G).norm() == 0.0);
        const double lam = quad_form_lambda_max(G, S, M);
        const double mn = psd_block_min_eig(blk, x);
        if (std::abs(lam - gamma2) > 1e-8) CHECK((lam <= gamma2) == (mn >= 0.0));
    }
}

TEST_CASE("trace objective under a lifted constraint") {
    // min ||G||_F^2 subject to lambda_max((G - I)(G - I)^T) <= 0.25: optimum G = 0.5 I.
    const int n = 2;
    ConicProgram prog;
    const GainLayout lay = add_gain(prog, n, n);
    Matrix W(2 * n, 2 * n);
    W << Matrix::Identity(n, n), Matrix::Zero(n, n), -Matrix::Identity(n, n), Matrix::Zero(n, n);
    // [G I] W W^T [G I]^T = (G - I)(G - I)^T
    const Matrix M = W * W.transpose();
    prog.psd.push_back(quad_constraint_to_psd(lay, W, Matrix::Identity(n, n), 0.25));
    add_trace_objective(prog, lay, Matrix::Identity(n, n));
    const Solution s = solve(prog);
    REQUIRE(s.ok());
    const Matrix G = extract_gain(s.x, lay);
    CHECK((G - 0.5 * Matrix::Identity(n, n)).norm() < 1e-5);
    CHECK(quad_form_lambda_max(G, Matrix::Identity(n, n), M) <= 0.25 + 1e-6);
    CHECK(s.primal_obj == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("program dump is valid JSON") {
    ConicProgram prog;
    const GainLayout lay = add_gain(prog, 1, 2);
    prog.psd.push_back(quad_constraint_to_psd(lay, Matrix::Identity(2, 2), Matrix(1, 0), 1.0));
    prog.psd.back().tag = "fault";
    const auto j = nlohmann::json::parse(dump_json(prog));
    CHECK(j["n_vars"] == 2);
    CHECK(j["psd"].size() == 1);
    CHECK(j["psd"][0]["tag"] == "fault");
    CHECK(j["c"].size() == 2);
}

TEST_CASE("status names") {
    CHECK(std::string(to_string(Status::Optimal)) != to_string(Status::Infeasible));
}

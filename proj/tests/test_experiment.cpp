#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "rhfe/experiment.hpp"
#include "rhfe/io.hpp"

using namespace rhfe;

namespace {

ExperimentConfig small_cfg() {
    ExperimentConfig c;
    c.N = 400;
    c.p = 4;
    c.L = 8;
    c.mc = 24;
    c.k_eval = 60;
    c.algorithms = {"alg0", "alg1", "alg2"};
    c.seed = 9;
    return c;
}

}  // namespace

TEST_CASE("config JSON overlays the base") {
    ExperimentConfig base;
    base.N = 77;
    const ExperimentConfig c = config_from_json(R"({"p": 6, "gamma_f2": 0.4, "fault": "sensor:1"})", base);
    CHECK(c.N == 77);
    CHECK(c.p == 6);
    CHECK(c.m_eff() == 6);
    CHECK(c.gamma_f2 == 0.4);
    CHECK(c.fault.sensors == std::vector<int>{0});
    const ExperimentConfig r = config_from_json(config_to_json(c));
    CHECK(r.N == 77);
    CHECK(r.gamma_f2 == 0.4);
    CHECK(std::isnan(config_from_json(config_to_json(ExperimentConfig{})).gamma_z2));
    CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), Error);
    CHECK_THROWS_AS(config_from_json("[1, 2]"), Error);
}

TEST_CASE("config validation") {
    ExperimentConfig c;
    CHECK_NOTHROW(validate(c));
    c.L = 0;
    CHECK_THROWS_AS(validate(c), Error);
    c = ExperimentConfig{};
    c.mc = 0;
    CHECK_THROWS_AS(validate(c), Error);
    c = ExperimentConfig{};
    c.algorithms = {"alg7"};
    CHECK_THROWS_AS(validate(c), Error);
    CHECK(parse_algorithm("nominal") == GainKind::Nominal);
    CHECK(parse_algorithm("alg3") == GainKind::OnlineRobust);
    CHECK(std::string(algorithm_name(GainKind::OfflineRobust)) == "alg2");
}

TEST_CASE("summary statistics") {
    AlgorithmMetrics m;
    m.errors.resize(4, 2);
    m.errors << 1, 0, 3, 2, std::nan(""), 0, 2, 1;
    summarize(m);
    CHECK(m.failures == 1);
    CHECK(m.bias(0) == doctest::Approx(2.0));
    CHECK(m.bias(1) == doctest::Approx(1.0));
    CHECK(m.cov(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(m.cov(0, 1) == doctest::Approx(2.0 / 3.0));
    const double ms = (1.0 + 13.0 + 5.0) / 3.0;
    CHECK(m.rmse == doctest::Approx(std::sqrt(ms / 2.0)));
    CHECK(m.rmse * m.rmse == doctest::Approx((m.bias.squaredNorm() + m.cov.trace()) / 2.0));
    CHECK((m.ellipse_shape - 3.0 * m.cov).norm() < 1e-12);
}

TEST_CASE("pipeline and Monte Carlo are reproducible across worker counts") {
    ExperimentConfig c = small_cfg();
    const Pipeline pl = build_pipeline(c);
    CHECK(pl.tau == 1);
    REQUIRE(pl.g2);
    REQUIRE(pl.tuning);
    CHECK(pl.gamma_f2 == doctest::Approx(pl.tuning->gamma_f2));
    c.workers = 1;
    const MetricsReport a = monte_carlo(c, pl, c.algorithms);
    c.workers = 3;
    const MetricsReport b = monte_carlo(c, pl, c.algorithms);
    REQUIRE(a.algorithms.size() == 3);
    for (std::size_t i = 0; i < a.algorithms.size(); ++i) {
        CHECK(a.algorithms[i].errors == b.algorithms[i].errors);
        CHECK(a.algorithms[i].failures == 0);
    }
    CHECK(a.find("alg1") != nullptr);
    CHECK(a.find("alg3") == nullptr);

    const auto j = nlohmann::json::parse(metrics_json(a));
    CHECK(j.contains("algorithms"));

    c.mc = 1;
    const MetricsReport one = monte_carlo(c, pl, {"alg0"});
    CHECK_FALSE(one.warnings.empty());
}

TEST_CASE("explicit gamma values and range checks") {
    ExperimentConfig c = small_cfg();
    c.algorithms = {"alg2"};
    c.gamma_f2 = 1e-6;
    CHECK_THROWS_AS(build_pipeline(c), Error);
    c.gamma_f2 = std::nan("");
    c.gamma_z2 = -1.0;
    CHECK_THROWS_AS(build_pipeline(c), Error);
}

TEST_CASE("a supplied identification replaces the experiment") {
    ExperimentConfig c = small_cfg();
    c.algorithms = {"alg1"};
    const Pipeline ref = build_pipeline(c);
    ExperimentConfig other = c;
    other.seed = 12345;
    const Pipeline pl = build_pipeline(other, {}, &ref.id);
    CHECK(pl.g1.Gmat == ref.g1.Gmat);
    MarkovSet bad = ref.id;
    for (auto& h : bad.Hf) h = h.leftCols(1).eval();
    CHECK_THROWS_AS(build_pipeline(other, {}, &bad), Error);
}

TEST_CASE("figure files") {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "rhfe_unit_fig";
    std::filesystem::create_directories(dir);
    MetricsReport empty;
    CHECK_THROWS_AS(figure_data(empty, "3a", dir.string()), Error);
    CHECK_THROWS_AS(figure_data(empty, "9", dir.string()), Error);

    ExperimentConfig c = small_cfg();
    c.algorithms = {"alg0", "alg1"};
    c.mc = 5;
    const Pipeline pl = build_pipeline(c);
    const MetricsReport r = monte_carlo(c, pl, c.algorithms);
    const auto files = figure_data(r, "3a", dir.string());
    REQUIRE(files.size() == 2);
    const std::string errs = io::read_file(files[0]);
    CHECK(std::count(errs.begin(), errs.end(), '\n') == 1 + 2 * 5);
}

TEST_CASE("trace run realigns estimates") {
    ExperimentConfig c = small_cfg();
    c.algorithms = {"alg0"};
    c.trace_length = 80;
    const Pipeline pl = build_pipeline(c);
    const TraceData t = trace_run(c, pl, c.algorithms);
    REQUIRE(t.estimates.size() == 1);
    CHECK(t.f.rows() == 80);
    CHECK(t.estimates[0].rows() == 80);
    CHECK(std::isnan(t.estimates[0](0, 0)));
    CHECK_FALSE(std::isnan(t.estimates[0](70, 0)));
}

TEST_CASE("evaluation profile") {
    const FaultProfile fp = evaluation_profile(3);
    CHECK(fp.n_f() == 3);
}

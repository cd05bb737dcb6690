#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "fixtures.hpp"
#include "rhfe/io.hpp"

using namespace rhfe;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "rhfe_unit";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("matrix records round-trip bit for bit") {
    std::mt19937_64 rng(1);
    const Matrix m = fixtures::gaussian(3, 5, rng);
    std::stringstream ss;
    io::write_matrix_record(ss, m);
    io::write_matrix_record(ss, Matrix(0, 2));
    CHECK(ss.str().size() == 2 * 16 + 15 * 8);
    CHECK(ss.str().compare(0, 7, "RHFEMAT") == 0);
    CHECK(io::read_matrix_record(ss) == m);
    const Matrix e = io::read_matrix_record(ss);
    CHECK(e.rows() == 0);
    CHECK(e.cols() == 2);

    std::stringstream bad("NOTMAGIC........");
    CHECK_THROWS_AS(io::read_matrix_record(bad), Error);
    std::stringstream whole;
    io::write_matrix_record(whole, m);
    std::stringstream trunc(whole.str().substr(0, 40));
    CHECK_THROWS_AS(io::read_matrix_record(trunc), Error);
}

TEST_CASE("model files") {
    const auto [model, ctrl] = vtol_model();
    const io::ModelFile mf = io::model_from_json(io::model_to_json(model, &ctrl.Ky));
    CHECK(mf.model.A() == model.A());
    CHECK(mf.model.R() == model.R());
    REQUIRE(mf.Ky);
    CHECK(*mf.Ky == ctrl.Ky);
    CHECK_FALSE(io::model_from_json(io::model_to_json(model)).Ky);
    CHECK_THROWS_AS(io::model_from_json(R"({"A": {"rows": 1, "cols": 1, "data": [1]}})"), Error);
    CHECK_THROWS_AS(io::model_from_json("not json"), Error);
}

TEST_CASE("identification and estimator files") {
    const auto& d = fixtures::small_design();
    const fs::path p = scratch("id.json");
    io::save_identification(p.string(), d.id, fixtures::actuators());
    CHECK(fs::exists(scratch("id.bin")));
    FaultConfig fc;
    const MarkovSet back = io::load_identification(p.string(), &fc);
    CHECK(fc.actuators == fixtures::actuators().actuators);
    CHECK(back.p == d.id.p);
    CHECK(back.n_bar == d.id.n_bar);
    CHECK(back.Sigma_e == d.id.Sigma_e);
    REQUIRE(back.Hu.size() == d.id.Hu.size());
    for (std::size_t i = 0; i < back.Hu.size(); ++i) {
        CHECK(back.Hu[i] == d.id.Hu[i]);
        CHECK(back.My[i] == d.id.My[i]);
        CHECK(back.Mf[i] == d.id.Mf[i]);
    }

    EstimatorGain g = nominal_gain(d.prob.wm, d.prob.Sigma_e, GainKind::Nominal);
    const fs::path ep = scratch("est.json");
    io::save_estimator(ep.string(), g);
    const EstimatorGain h = io::load_estimator(ep.string());
    CHECK(h.Gmat == g.Gmat);
    CHECK(h.Ty == g.Ty);
    CHECK(h.Tu == g.Tu);
    CHECK(h.kind == g.kind);
    CHECK(h.tau == g.tau);
    CHECK(std::isnan(h.gamma_f2));

    CHECK_THROWS_AS(io::load_estimator(scratch("missing.json").string()), Error);
    io::write_file(scratch("id.bin").string(), "garbage");
    CHECK_THROWS_AS(io::load_identification(p.string()), Error);
}

TEST_CASE("trajectory CSV") {
    const auto [model, ctrl] = vtol_model();
    const TrajectoryDataset t =
        simulate_closed_loop(model, ctrl, step_sine_fault_profile(), fixtures::sensors(), 60, 3);
    const std::string csv = io::trajectory_csv(t);
    CHECK(csv.rfind("k,u1,u2,y1,y2,y3,y4,f1,f2,eta1,eta2\n", 0) == 0);
    const TrajectoryDataset b = io::parse_trajectory_csv(csv);
    CHECK(b.u == t.u);
    CHECK(b.y == t.y);
    CHECK(b.f == t.f);
    CHECK(b.eta == t.eta);
    CHECK_THROWS_AS(io::parse_trajectory_csv(""), Error);
    CHECK_THROWS_AS(io::parse_trajectory_csv("k,u1\n0\n"), Error);
    CHECK_THROWS_AS(io::parse_trajectory_csv("k,u1\n1,0.5\n"), Error);
    CHECK_THROWS_AS(io::parse_trajectory_csv("k,u1,w1\n0,1,2\n"), Error);
    CHECK_THROWS_AS(io::parse_trajectory_csv("k,u1\n0,abc\n"), Error);
}

TEST_CASE("estimates CSV and number formatting") {
    Matrix est(2, 1);
    est << std::numeric_limits<double>::quiet_NaN(), 0.1;
    CHECK(io::estimates_csv(est) == "k,fhat1\n0,nan\n1,0.10000000000000001\n");
    CHECK(io::fmt(1.0) == "1");
    CHECK(std::stod(io::fmt(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("fault specs") {
    const FaultConfig s = io::parse_fault("sensor:1,2");
    CHECK(s.sensors == std::vector<int>{0, 1});
    CHECK(s.actuators.empty());
    const FaultConfig a = io::parse_fault("actuator:2");
    CHECK(a.actuators == std::vector<int>{1});
    const FaultConfig b = io::parse_fault("both:3,1");
    CHECK(b.sensors == std::vector<int>{2});
    CHECK(b.actuators == std::vector<int>{0});
    for (const FaultConfig& fc : {s, a, b}) {
        const FaultConfig r = io::parse_fault(io::fault_to_string(fc));
        CHECK(r.sensors == fc.sensors);
        CHECK(r.actuators == fc.actuators);
    }
    for (const char* bad : {"", "sensor", "sensor:", "sensor:0", "sensor:x", "both:1", "wing:1"})
        CHECK_THROWS_AS(io::parse_fault(bad), Error);
}

TEST_CASE("missing files") {
    CHECK_THROWS_AS(io::read_file(scratch("nope.txt").string()), Error);
    CHECK_THROWS_AS(io::read_sidecar(scratch("nope.bin").string()), Error);
}

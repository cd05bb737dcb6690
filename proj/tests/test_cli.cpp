#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "rhfe/experiment.hpp"
#include "rhfe/io.hpp"

using namespace rhfe;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(RHFE_CLI) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

Matrix read_estimates(const std::string& path) {
    std::istringstream is(io::read_file(path));
    std::string line;
    std::getline(is, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        std::vector<double> r;
        std::stringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        while (std::getline(ls, cell, ',')) r.push_back(cell == "nan" ? std::nan("") : std::stod(cell));
        rows.push_back(r);
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

}  // namespace

TEST_CASE("CLI exit codes") {
    const fs::path dir = fs::temp_directory_path() / "rhfe_cli_codes";
    fs::create_directories(dir);
    CHECK(run("--help") == 0);
    CHECK(run("frobnicate") == 2);
    CHECK(run("design --mode alg1 --identification " + (dir / "missing.json").string()) == 2);
    CHECK(run("estimate --estimator " + (dir / "missing.json").string() + " --data x.csv") == 2);
    CHECK(run("bench vtol --figure 9 --out " + dir.string()) == 2);
    CHECK(run("identify --fault wing:1 --out " + dir.string()) == 2);
}

TEST_CASE("CLI pipeline matches the in-process result") {
    const fs::path dir = fs::temp_directory_path() / "rhfe_cli_pipeline";
    fs::create_directories(dir);
    const std::string common = " --N 400 --p 4 --L 8 --seed 5 --fault actuator:1,2 --out " + dir.string();
    const std::string id = (dir / "id.json").string(), est = (dir / "est.json").string();
    const std::string data = (dir / "eval.csv").string(), out = (dir / "fhat.csv").string();
    REQUIRE(run("identify" + common + " -o " + id) == 0);
    REQUIRE(run("design --mode alg1 --identification " + id + common + " -o " + est) == 0);
    REQUIRE(run("simulate --kind evaluation --T 60" + common + " -o " + data) == 0);
    REQUIRE(run("estimate --estimator " + est + " --data " + data + common + " -o " + out) == 0);

    ExperimentConfig c;
    c.N = 400;
    c.p = 4;
    c.L = 8;
    c.seed = 5;
    c.algorithms = {"alg1"};
    const Pipeline pl = build_pipeline(c);
    const Matrix ref = estimate_trajectory(pl.g1, io::load_trajectory(data));
    const Matrix got = read_estimates(out);
    REQUIRE(got.rows() == ref.rows());
    REQUIRE(got.cols() == ref.cols());
    for (Eigen::Index k = 0; k < ref.rows(); ++k) {
        for (Eigen::Index i = 0; i < ref.cols(); ++i) {
            if (std::isnan(ref(k, i))) {
                CHECK(std::isnan(got(k, i)));
            } else {
                CHECK(got(k, i) == doctest::Approx(ref(k, i)).epsilon(1e-12));
            }
        }
    }
}

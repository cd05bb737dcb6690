#pragma once

#include <random>

#include "rhfe/identification.hpp"
#include "rhfe/robust_design.hpp"
#include "rhfe/simulator.hpp"

namespace fixtures {

using rhfe::Matrix;
using rhfe::Vector;

inline Matrix gaussian(int r, int c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = nd(rng);
    return m;
}

inline Matrix spd(int n, std::mt19937_64& rng) {
    const Matrix a = gaussian(n, n, rng);
    return a * a.transpose() + n * Matrix::Identity(n, n);
}

inline const rhfe::FaultConfig& actuators() {
    static const rhfe::FaultConfig f{{}, {0, 1}};
    return f;
}

inline const rhfe::FaultConfig& sensors() {
    static const rhfe::FaultConfig f{{0, 1}, {}};
    return f;
}

// Small identified VTOL instance for design-level tests.
struct SmallDesign {
    rhfe::MarkovSet id;
    rhfe::SensitivityStack stack;
    rhfe::RobustProblem prob;
    int L = 0, m = 0, tau = 0;
};

inline const SmallDesign& small_design() {
    static const SmallDesign d = [] {
        SmallDesign s;
        auto [model, ctrl] = rhfe::vtol_model();
        const rhfe::TrajectoryDataset traj =
            rhfe::simulate_closed_loop(model, ctrl, rhfe::FaultProfile::none(2), actuators(), 400, 21);
        s.L = 8;
        s.m = 4;
        s.tau = 1;
        s.id = rhfe::identify(traj, 4, actuators());
        s.stack = rhfe::build_sensitivity(s.id, s.L, s.m, s.tau);
        const rhfe::GramBlocks gb = rhfe::gram_blocks(s.stack);
        s.prob = rhfe::build_problem(rhfe::window_matrices(s.id, s.L, s.m, s.tau), s.id.Sigma_e, gb.P_Upsilon,
                                     gb.P_z);
        return s;
    }();
    return d;
}

}  // namespace fixtures

#include "rhfe/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace rhfe {

namespace {

using cd = std::complex<double>;

int complex_rank(const ComplexMatrix& m) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const auto& s = svd.singularValues();
    const double thr =
        static_cast<double>(std::max(m.rows(), m.cols())) * s(0) * linalg::kRankTol;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > thr) ++r;
    }
    return r;
}

void require_shape(const Matrix& m, Eigen::Index r, Eigen::Index c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
        std::ostringstream os;
        os << name << " is " << m.rows() << "x" << m.cols() << ", expected " << r << "x" << c;
        fail(ErrorCode::InvalidModel, os.str());
    }
}

bool is_symmetric(const Matrix& m) {
    return (m - m.transpose()).norm() <= 1e-12 * std::max(1.0, m.norm());
}

}  // namespace

StateSpaceModel::StateSpaceModel(Matrix A, Matrix B, Matrix C, Matrix D, Matrix F, Matrix Q,
                                 Matrix R, ModelChecks checks)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)),
      F_(std::move(F)), Q_(std::move(Q)), R_(std::move(R)), checks_(checks) {
    const Eigen::Index n = A_.rows();
    if (n == 0) fail(ErrorCode::InvalidModel, "empty state");
    require_shape(A_, n, n, "A");
    require_shape(B_, n, B_.cols(), "B");
    require_shape(C_, C_.rows(), n, "C");
    require_shape(D_, C_.rows(), B_.cols(), "D");
    require_shape(F_, n, F_.cols(), "F");
    require_shape(Q_, F_.cols(), F_.cols(), "Q");
    require_shape(R_, C_.rows(), C_.rows(), "R");
    if (C_.rows() == 0) fail(ErrorCode::InvalidModel, "no outputs");
    if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite() || !D_.allFinite() ||
        !F_.allFinite() || !Q_.allFinite() || !R_.allFinite()) {
        fail(ErrorCode::InvalidModel, "non-finite entries");
    }
    if (!is_symmetric(Q_) || !is_symmetric(R_)) {
        fail(ErrorCode::InvalidModel, "Q and R must be symmetric");
    }
    if (Q_.size() && linalg::lambda_min_sym(Q_) < -1e-12 * std::max(1.0, Q_.norm())) {
        fail(ErrorCode::InvalidModel, "Q is not positive semidefinite");
    }
    if (linalg::lambda_min_sym(R_) <= 0.0) {
        fail(ErrorCode::InvalidModel, "R is not positive definite");
    }

    Eigen::EigenSolver<Matrix> es(A_, false);
    const ComplexMatrix Ac = A_.cast<cd>();
    const Matrix sqrtQ = Q_.size() ? linalg::psd_factor(Q_, 1e-12) : Matrix(0, 0);
    const ComplexMatrix FQh = (F_ * (sqrtQ.size() ? sqrtQ : Matrix::Zero(F_.cols(), 0))).cast<cd>();
    for (Eigen::Index i = 0; i < n; ++i) {
        const cd lam = es.eigenvalues()(i);
        const double mod = std::abs(lam);
        const ComplexMatrix shifted = Ac - lam * ComplexMatrix::Identity(n, n);
        if (mod >= 1.0 - checks_.unit_circle_tol) {
            ComplexMatrix pbh(n + C_.rows(), n);
            pbh << shifted, C_.cast<cd>();
            if (complex_rank(pbh) < n) {
                std::ostringstream os;
                os << "(C, A) not detectable: mode " << lam << " is unobservable";
                fail(ErrorCode::InvalidModel, os.str());
            }
        }
        if (std::abs(1.0 - mod) < checks_.unit_circle_tol) {
            ComplexMatrix pbh(n, n + FQh.cols());
            pbh << shifted, FQh;
            if (complex_rank(pbh) < n) {
                std::ostringstream os;
                os << "mode " << lam << " on the unit circle is not excited by the process noise";
                fail(ErrorCode::InvalidModel, os.str());
            }
        }
    }
}

std::string FaultConfig::describe() const {
    std::ostringstream os;
    if (!sensors.empty()) {
        os << "sensor:";
        for (std::size_t i = 0; i < sensors.size(); ++i) os << (i ? "," : "") << sensors[i] + 1;
    }
    if (!actuators.empty()) {
        if (!sensors.empty()) os << " ";
        os << "actuator:";
        for (std::size_t i = 0; i < actuators.size(); ++i) os << (i ? "," : "") << actuators[i] + 1;
    }
    return os.str();
}

Matrix block_or_zero(const std::vector<Matrix>& seq, int i) {
    if (seq.empty()) fail(ErrorCode::ShapeMismatch, "empty block sequence");
    if (i >= 0 && i < static_cast<int>(seq.size())) return seq[static_cast<std::size_t>(i)];
    return Matrix::Zero(seq.front().rows(), seq.front().cols());
}

namespace {

bool riccati_iterate(const StateSpaceModel& m, Matrix P, double tol, int max_iter,
                     PredictorModel& out) {
    const Matrix& A = m.A();
    const Matrix& C = m.C();
    const Matrix W = linalg::symmetrize(m.F() * m.Q() * m.F().transpose());
    for (int it = 0; it < max_iter; ++it) {
        const Matrix S = C * P * C.transpose() + m.R();
        const Matrix APCt = A * P * C.transpose();
        const Matrix next = linalg::symmetrize(
            A * P * A.transpose() - APCt * S.ldlt().solve(APCt.transpose()) + W);
        if (!next.allFinite()) return false;
        const double step = (next - P).norm();
        P = next;
        if (step <= tol * P.norm()) {
            const Matrix Se = linalg::symmetrize(C * P * C.transpose() + m.R());
            out.P = P;
            out.K = (A * P * C.transpose()) * Se.inverse();
            out.Sigma_e = Se;
            out.Phi = A - out.K * C;
            out.C = C;
            out.D = m.D();
            out.Btilde = m.B() - out.K * m.D();
            return linalg::spectral_radius(out.Phi) < 1.0 - 1e-9;
        }
    }
    return false;
}

}  // namespace

PredictorModel steady_state_predictor(const StateSpaceModel& model, double tol, int max_iter) {
    PredictorModel out;
    const Matrix W = model.F() * model.Q() * model.F().transpose();
    if (riccati_iterate(model, W, tol, max_iter, out)) return out;
    const Matrix P1 = W + Matrix::Identity(model.n(), model.n());
    if (riccati_iterate(model, P1, tol, max_iter, out)) return out;
    fail(ErrorCode::NonConvergentRiccati,
         "filtering Riccati iteration did not reach a stabilizing solution");
}

FaultMatrices fault_matrices(const StateSpaceModel& model, const PredictorModel& predictor,
                             const FaultConfig& cfg) {
    if (cfg.n_f() == 0) fail(ErrorCode::InvalidArgument, "fault configuration is empty");
    const int n = model.n();
    const int ny = model.ny();
    const int nu = model.nu();
    std::set<int> seen_s(cfg.sensors.begin(), cfg.sensors.end());
    std::set<int> seen_a(cfg.actuators.begin(), cfg.actuators.end());
    if (seen_s.size() != cfg.sensors.size() || seen_a.size() != cfg.actuators.size()) {
        fail(ErrorCode::InvalidArgument, "duplicate fault channel");
    }
    FaultMatrices fm{Matrix::Zero(n, cfg.n_f()), Matrix::Zero(ny, cfg.n_f()),
                     Matrix::Zero(n, cfg.n_f())};
    int col = 0;
    for (int j : cfg.sensors) {
        if (j < 0 || j >= ny) {
            fail(ErrorCode::IndexOutOfRange, "sensor index " + std::to_string(j + 1) + " not in 1.." +
                                                 std::to_string(ny));
        }
        fm.G(j, col) = 1.0;
        fm.Etilde.col(col) = -predictor.K.col(j);
        ++col;
    }
    for (int l : cfg.actuators) {
        if (l < 0 || l >= nu) {
            fail(ErrorCode::IndexOutOfRange, "actuator index " + std::to_string(l + 1) +
                                                 " not in 1.." + std::to_string(nu));
        }
        fm.E.col(col) = model.B().col(l);
        fm.G.col(col) = model.D().col(l);
        fm.Etilde.col(col) = predictor.Btilde.col(l);
        ++col;
    }
    return fm;
}

MarkovSet markov_parameters(const PredictorModel& predictor, const FaultMatrices& fm, int count) {
    if (count < 1) fail(ErrorCode::InvalidArgument, "count must be >= 1");
    MarkovSet ms;
    ms.Sigma_e = predictor.Sigma_e;
    ms.Hu.push_back(predictor.D);
    ms.Hy.push_back(Matrix::Zero(predictor.ny(), predictor.ny()));
    ms.Hf.push_back(fm.G);
    Matrix CPhi = predictor.C;
    for (int i = 1; i <= count; ++i) {
        ms.Hu.push_back(CPhi * predictor.Btilde);
        ms.Hy.push_back(CPhi * predictor.K);
        ms.Hf.push_back(CPhi * fm.Etilde);
        CPhi = CPhi * predictor.Phi;
    }
    return ms;
}

int relative_degree(const MarkovSet& markov, int n_f) {
    double scale = 0.0;
    for (const auto& h : markov.Hf) scale = std::max(scale, h.norm());
    if (scale == 0.0) fail(ErrorCode::NoNonzeroMarkov, "fault Markov parameters are all zero");
    for (std::size_t i = 0; i < markov.Hf.size(); ++i) {
        const Matrix& h = markov.Hf[i];
        if (h.norm() <= scale * static_cast<double>(std::max(h.rows(), h.cols())) * linalg::kRankTol) {
            continue;
        }
        if (linalg::numerical_rank(h) < n_f) {
            fail(ErrorCode::RankDeficientFaultChannel,
                 "H_" + std::to_string(i) + "^f has rank below n_f = " + std::to_string(n_f));
        }
        return static_cast<int>(i);
    }
    fail(ErrorCode::NoNonzeroMarkov, "fault Markov parameters are all zero");
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Unbiased: return "Unbiased";
        case Verdict::AsymptoticallyUnbiased: return "AsymptoticallyUnbiased";
        case Verdict::Biased: return "Biased";
    }
    return "Unknown";
}

namespace {

Matrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix g(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = nd(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ() * Matrix::Identity(rows, cols);
}

std::vector<cd> projected_eigenvalues(const Matrix& A0, const Matrix& B0, const Matrix& Pr) {
    const Matrix As = Pr.transpose() * A0;
    const Matrix Bs = Pr.transpose() * B0;
    Eigen::GeneralizedEigenSolver<Matrix> ges(As, Bs, false);
    std::vector<cd> out;
    const auto& alphas = ges.alphas();
    const auto& betas = ges.betas();
    const double scale = std::max(As.norm(), 1.0);
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        const double b = betas(i);
        if (std::abs(b) <= 1e-12 * std::max(std::abs(alphas(i)), scale * 1e-3)) continue;
        const cd lam = alphas(i) / b;
        if (std::abs(lam) > 1e8) continue;
        out.push_back(lam);
    }
    return out;
}

struct PencilProbe {
    Eigen::VectorXd singular;
    ComplexMatrix V;
    double threshold;
};

PencilProbe probe(const Matrix& A0, const Matrix& B0, cd lam) {
    const ComplexMatrix P = A0.cast<cd>() - lam * B0.cast<cd>();
    Eigen::JacobiSVD<ComplexMatrix> svd(P, Eigen::ComputeFullV);
    PencilProbe pr;
    pr.singular = svd.singularValues();
    pr.V = svd.matrixV();
    const double top = pr.singular.size() ? pr.singular(0) : 0.0;
    pr.threshold = static_cast<double>(std::max(P.rows(), P.cols())) * top * linalg::kRankTol;
    return pr;
}

}  // namespace

UnbiasednessReport analyze_fault_subsystem(const FaultSubsystem& sys, std::uint64_t seed) {
    const int n = static_cast<int>(sys.Phi.rows());
    const int ny = static_cast<int>(sys.C.rows());
    const int nf = static_cast<int>(sys.Etilde.cols());
    if (sys.Etilde.rows() != n || sys.C.cols() != n || sys.G.rows() != ny || sys.G.cols() != nf) {
        fail(ErrorCode::ShapeMismatch, "fault subsystem dimensions inconsistent");
    }

    MarkovSet ms;
    {
        PredictorModel pm;
        pm.Phi = sys.Phi;
        pm.C = sys.C;
        pm.Btilde = Matrix::Zero(n, 0);
        pm.K = Matrix::Zero(n, ny);
        pm.D = Matrix::Zero(ny, 0);
        pm.Sigma_e = Matrix::Identity(ny, ny);
        FaultMatrices fm{Matrix::Zero(n, nf), sys.G, sys.Etilde};
        ms = markov_parameters(pm, fm, std::max(1, n));
    }
    UnbiasednessReport rep;
    rep.tau = relative_degree(ms, nf);
    const int tau = rep.tau;

    // Observability index of (C, Phi).
    {
        Matrix obs(0, n);
        Matrix CPhi = sys.C;
        const int full = [&] {
            Matrix o(ny * n, n);
            Matrix cp = sys.C;
            for (int i = 0; i < n; ++i) {
                o.middleRows(i * ny, ny) = cp;
                cp = cp * sys.Phi;
            }
            return linalg::numerical_rank(o);
        }();
        for (int i = 1; i <= n; ++i) {
            Matrix grown(obs.rows() + ny, n);
            grown << obs, CPhi;
            obs = grown;
            CPhi = CPhi * sys.Phi;
            if (linalg::numerical_rank(obs) == full) {
                rep.observability_index = i;
                break;
            }
        }
    }

    const int rows = n + (tau + 1) * ny;
    const int cols = n + nf;
    Matrix A0 = Matrix::Zero(rows, cols);
    Matrix B0 = Matrix::Zero(rows, cols);
    A0.topLeftCorner(n, n) = sys.Phi;
    A0.topRightCorner(n, nf) = sys.Etilde;
    B0.topLeftCorner(n, n) = Matrix::Identity(n, n);
    Matrix CPhi = sys.C;
    for (int i = 0; i <= tau; ++i) {
        A0.block(n + i * ny, 0, ny, n) = CPhi;
        A0.block(n + i * ny, n, ny, nf) = ms.Hf[static_cast<std::size_t>(i)];
        CPhi = CPhi * sys.Phi;
    }
    if (rows < cols) {
        fail(ErrorCode::RankDeficientFaultChannel, "pencil has fewer rows than columns");
    }

    // Normal rank test at a generic point.
    const double radius = 1.0 + sys.Phi.norm();
    {
        const PencilProbe generic = probe(A0, B0, cd(0.371 * radius, 0.613 * radius));
        if (generic.singular(cols - 1) <= generic.threshold) {
            fail(ErrorCode::RankDeficientFaultChannel, "pencil does not have full normal column rank");
        }
    }

    std::mt19937_64 rng(seed);
    const Matrix P1 = random_orthonormal(rows, cols, rng);
    const Matrix P2 = random_orthonormal(rows, cols, rng);
    const std::vector<cd> c1 = projected_eigenvalues(A0, B0, P1);
    const std::vector<cd> c2 = projected_eigenvalues(A0, B0, P2);

    std::vector<cd> confirmed;
    for (const cd& lam : c1) {
        const bool in_both = std::any_of(c2.begin(), c2.end(), [&](const cd& mu) {
            return std::abs(mu - lam) <= 1e-6 * (1.0 + std::abs(lam));
        });
        const PencilProbe pr = probe(A0, B0, lam);
        const double smin = pr.singular(cols - 1);
        const bool rank_drop = smin <= pr.threshold;
        if (rank_drop != in_both && smin <= 1e4 * pr.threshold && smin > pr.threshold * 1e-2) {
            std::ostringstream os;
            os << "candidate zero " << lam << " has smallest singular value " << smin
               << " near the rank threshold " << pr.threshold;
            fail(ErrorCode::NumericalRankAmbiguity, os.str());
        }
        if (!rank_drop) continue;
        const bool dup = std::any_of(confirmed.begin(), confirmed.end(), [&](const cd& mu) {
            return std::abs(mu - lam) <= 1e-6 * (1.0 + std::abs(lam));
        });
        if (!dup) confirmed.push_back(lam);
    }

    for (const cd& lam : confirmed) {
        const PencilProbe pr = probe(A0, B0, lam);
        std::vector<Eigen::Index> null_cols;
        for (Eigen::Index i = 0; i < cols; ++i) {
            if (pr.singular(i) <= pr.threshold) null_cols.push_back(i);
        }
        ComplexMatrix Nf(nf, static_cast<Eigen::Index>(null_cols.size()));
        for (std::size_t c = 0; c < null_cols.size(); ++c) {
            Nf.col(static_cast<Eigen::Index>(c)) = pr.V.col(null_cols[c]).tail(nf);
        }
        Eigen::JacobiSVD<ComplexMatrix> fsvd(Nf);
        const auto& fs = fsvd.singularValues();
        int fault_rank = 0;
        for (Eigen::Index i = 0; i < fs.size(); ++i) {
            if (fs(i) > 1e-5) {
                ++fault_rank;
            } else if (fs(i) > 1e-8) {
                std::ostringstream os;
                os << "fault component " << fs(i) << " of the null vector at " << lam
                   << " is neither clearly zero nor nonzero";
                fail(ErrorCode::NumericalRankAmbiguity, os.str());
            }
        }
        if (fault_rank > 0) rep.transmission_zeros.push_back(lam);
        if (fault_rank < static_cast<int>(null_cols.size())) rep.unobservable_modes.push_back(lam);
    }

    auto by_modulus = [](const cd& a, const cd& b) {
        if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
        return a.imag() < b.imag();
    };
    std::sort(rep.transmission_zeros.begin(), rep.transmission_zeros.end(), by_modulus);
    std::sort(rep.unobservable_modes.begin(), rep.unobservable_modes.end(), by_modulus);

    if (rep.transmission_zeros.empty()) {
        rep.verdict = Verdict::Unbiased;
    } else if (std::all_of(rep.transmission_zeros.begin(), rep.transmission_zeros.end(),
                           [](const cd& z) { return std::abs(z) < 1.0; })) {
        rep.verdict = Verdict::AsymptoticallyUnbiased;
    } else {
        rep.verdict = Verdict::Biased;
    }
    return rep;
}

UnbiasednessReport unbiasedness_check(const PredictorModel& predictor, const FaultMatrices& fm) {
    return analyze_fault_subsystem(FaultSubsystem{predictor.Phi, fm.Etilde, predictor.C, fm.G});
}

std::optional<std::string> horizon_warning(const UnbiasednessReport& report, int L) {
    const int need = report.observability_index + report.tau;
    if (L >= need) return std::nullopt;
    return "horizon L = " + std::to_string(L) + " is below observability index + relative degree = " +
           std::to_string(need);
}

}  // namespace rhfe

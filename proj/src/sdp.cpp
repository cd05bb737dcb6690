#include "rhfe/sdp.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace rhfe::sdp {

const char* to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "Optimal";
        case Status::NearOptimal: return "NearOptimal";
        case Status::Infeasible: return "Infeasible";
        case Status::Unbounded: return "Unbounded";
        case Status::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

int ConicProgram::add_vars(int count) {
    const int first = n_vars;
    n_vars += count;
    c.conservativeResize(n_vars);
    c.tail(count).setZero();
    if (linear.G.rows()) linear.G.conservativeResize(Eigen::NoChange, n_vars);
    if (linear.G.rows()) linear.G.rightCols(count).setZero();
    for (auto& q : soc) {
        q.G.conservativeResize(Eigen::NoChange, n_vars);
        q.G.rightCols(count).setZero();
    }
    return first;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Element of the product cone (linear, second-order, PSD blocks).
struct ConeVec {
    Vector l;
    std::vector<Vector> q;
    std::vector<Matrix> s;
};

ConeVec zeros_like(const ConeVec& v) {
    ConeVec z;
    z.l = Vector::Zero(v.l.size());
    for (const auto& q : v.q) z.q.push_back(Vector::Zero(q.size()));
    for (const auto& s : v.s) z.s.push_back(Matrix::Zero(s.rows(), s.cols()));
    return z;
}

double dot(const ConeVec& a, const ConeVec& b) {
    double d = a.l.dot(b.l);
    for (std::size_t i = 0; i < a.q.size(); ++i) d += a.q[i].dot(b.q[i]);
    for (std::size_t i = 0; i < a.s.size(); ++i) d += a.s[i].cwiseProduct(b.s[i]).sum();
    return d;
}

double norm(const ConeVec& a) { return std::sqrt(std::max(dot(a, a), 0.0)); }

void axpy(double alpha, const ConeVec& x, ConeVec& y) {
    y.l += alpha * x.l;
    for (std::size_t i = 0; i < x.q.size(); ++i) y.q[i] += alpha * x.q[i];
    for (std::size_t i = 0; i < x.s.size(); ++i) y.s[i] += alpha * x.s[i];
}

ConeVec scaled(double alpha, const ConeVec& x) {
    ConeVec y = zeros_like(x);
    axpy(alpha, x, y);
    return y;
}

// Per-block cached term factors. Terms sharing the same a vector are grouped:
// a_t = Au.col(group[t]), b_t = B.col(t).
struct PsdData {
    Matrix Au, B;
    std::vector<int> var;
    std::vector<int> group;
};

// sum_t x_t (a_t b_t^T + b_t a_t^T) for factors Au, B.
Matrix lowrank_sum(const Matrix& Au, const Matrix& B, const PsdData& d, const Vector& x) {
    Matrix Xs = Matrix::Zero(B.cols(), Au.cols());
    for (std::size_t t = 0; t < d.var.size(); ++t)
        Xs(static_cast<Eigen::Index>(t), d.group[t]) = x(d.var[t]);
    const Matrix M = Au * (B * Xs).transpose();
    return M + M.transpose();
}

// out[var_t] += scale * a_t^T Z b_t.
void lowrank_adjoint(const Matrix& Au, const Matrix& B, const PsdData& d, const Matrix& Z, double scale,
                     Vector& out) {
    const Matrix Q = Au.transpose() * Z;
    for (std::size_t t = 0; t < d.var.size(); ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        out(d.var[t]) += scale * Q.row(d.group[t]).dot(B.col(ti));
    }
}

class Problem {
public:
    explicit Problem(const ConicProgram& p) : prog(p) {
        n = p.n_vars;
        for (const auto& blk : p.psd) {
            PsdData d;
            const int T = static_cast<int>(blk.terms.size());
            d.B.resize(blk.dim(), T);
            std::vector<Vector> uniq;
            for (int t = 0; t < T; ++t) {
                const auto& term = blk.terms[static_cast<std::size_t>(t)];
                d.B.col(t) = term.b;
                d.var.push_back(term.var);
                int g = -1;
                for (std::size_t k = 0; k < uniq.size() && g < 0; ++k)
                    if (uniq[k] == term.a) g = static_cast<int>(k);
                if (g < 0) {
                    g = static_cast<int>(uniq.size());
                    uniq.push_back(term.a);
                }
                d.group.push_back(g);
            }
            d.Au.resize(blk.dim(), static_cast<Eigen::Index>(uniq.size()));
            for (std::size_t k = 0; k < uniq.size(); ++k) d.Au.col(static_cast<Eigen::Index>(k)) = uniq[k];
            psd.push_back(std::move(d));
        }
        h.l = p.linear.h;
        for (const auto& q : p.soc) h.q.push_back(q.h);
        for (const auto& s : p.psd) h.s.push_back(s.C);
        degree = static_cast<int>(h.l.size()) + static_cast<int>(h.q.size());
        for (const auto& s : h.s) degree += static_cast<int>(s.rows());
    }

    ConeVec G(const Vector& x) const {
        ConeVec out;
        out.l = prog.linear.G.rows() ? Vector(prog.linear.G * x) : Vector(0);
        for (const auto& q : prog.soc) out.q.push_back(q.G * x);
        for (const auto& d : psd) {
            out.s.push_back(-lowrank_sum(d.Au, d.B, d, x));
        }
        return out;
    }

    Vector GT(const ConeVec& z) const {
        Vector out = Vector::Zero(n);
        if (prog.linear.G.rows()) out += prog.linear.G.transpose() * z.l;
        for (std::size_t i = 0; i < prog.soc.size(); ++i) out += prog.soc[i].G.transpose() * z.q[i];
        for (std::size_t j = 0; j < psd.size(); ++j) {
            lowrank_adjoint(psd[j].Au, psd[j].B, psd[j], z.s[j], -2.0, out);
        }
        return out;
    }

    ConeVec identity() const {
        ConeVec e = zeros_like(h);
        e.l.setOnes();
        for (auto& q : e.q) q(0) = 1.0;
        for (auto& s : e.s) s.setIdentity();
        return e;
    }

    const ConicProgram& prog;
    int n = 0;
    int degree = 0;
    std::vector<PsdData> psd;
    ConeVec h;
};

// ---- cone primitives --------------------------------------------------------

double soc_jnorm2(const Vector& x) { return x(0) * x(0) - x.tail(x.size() - 1).squaredNorm(); }

// Largest step alpha with x + alpha d inside the cone (x strictly inside).
double max_step(const ConeVec& x, const ConeVec& d) {
    double alpha = kInf;
    for (Eigen::Index i = 0; i < x.l.size(); ++i) {
        if (d.l(i) < 0) alpha = std::min(alpha, -x.l(i) / d.l(i));
    }
    for (std::size_t k = 0; k < x.q.size(); ++k) {
        const Vector& u = x.q[k];
        const Vector& v = d.q[k];
        const Eigen::Index m = u.size() - 1;
        const double a = v(0) * v(0) - v.tail(m).squaredNorm();
        const double b = 2.0 * (u(0) * v(0) - u.tail(m).dot(v.tail(m)));
        const double c = soc_jnorm2(u);
        double root = kInf;
        if (std::abs(a) < 1e-300) {
            if (b < 0) root = -c / b;
        } else {
            const double disc = b * b - 4 * a * c;
            if (disc >= 0) {
                const double sq = std::sqrt(disc);
                const double q = -0.5 * (b + (b >= 0 ? sq : -sq));
                double r1 = q / a, r2 = (q != 0) ? c / q : kInf;
                if (r1 > r2) std::swap(r1, r2);
                if (r1 > 0) root = r1;
                else if (r2 > 0) root = r2;
            }
        }
        // leading entry must stay positive as well
        if (v(0) < 0) root = std::min(root, -u(0) / v(0));
        alpha = std::min(alpha, root);
    }
    for (std::size_t k = 0; k < x.s.size(); ++k) {
        // x.s is diagonal in the scaled space
        const Vector lam = x.s[k].diagonal();
        const Vector isq = lam.cwiseSqrt().cwiseInverse();
        const Matrix Mm = -(isq.asDiagonal() * d.s[k] * isq.asDiagonal());
        const double top = linalg::lambda_max_sym(Mm);
        if (top > 0) alpha = std::min(alpha, 1.0 / top);
    }
    return alpha;
}

// Jordan product u o v.
ConeVec jprod(const ConeVec& u, const ConeVec& v) {
    ConeVec out = zeros_like(u);
    out.l = u.l.cwiseProduct(v.l);
    for (std::size_t k = 0; k < u.q.size(); ++k) {
        const Eigen::Index m = u.q[k].size() - 1;
        out.q[k](0) = u.q[k].dot(v.q[k]);
        out.q[k].tail(m) = u.q[k](0) * v.q[k].tail(m) + v.q[k](0) * u.q[k].tail(m);
    }
    for (std::size_t k = 0; k < u.s.size(); ++k) {
        out.s[k] = 0.5 * (u.s[k] * v.s[k] + v.s[k] * u.s[k]);
    }
    return out;
}

// u o v when the PSD parts of both are diagonal.
ConeVec jprod_diag(const ConeVec& u, const ConeVec& v) {
    ConeVec out = zeros_like(u);
    out.l = u.l.cwiseProduct(v.l);
    for (std::size_t k = 0; k < u.q.size(); ++k) {
        const Eigen::Index m = u.q[k].size() - 1;
        out.q[k](0) = u.q[k].dot(v.q[k]);
        out.q[k].tail(m) = u.q[k](0) * v.q[k].tail(m) + v.q[k](0) * u.q[k].tail(m);
    }
    for (std::size_t k = 0; k < u.s.size(); ++k)
        out.s[k].diagonal() = u.s[k].diagonal().cwiseProduct(v.s[k].diagonal());
    return out;
}

// Solve lambda o x = d for x, lambda the scaled point (PSD part diagonal).
ConeVec jdiv(const ConeVec& lam, const ConeVec& d) {
    ConeVec x = zeros_like(d);
    x.l = d.l.cwiseQuotient(lam.l);
    for (std::size_t k = 0; k < d.q.size(); ++k) {
        const Vector& L = lam.q[k];
        const Vector& D = d.q[k];
        const Eigen::Index m = L.size() - 1;
        const double x0 = (L(0) * D(0) - L.tail(m).dot(D.tail(m))) / soc_jnorm2(L);
        x.q[k](0) = x0;
        x.q[k].tail(m) = (D.tail(m) - x0 * L.tail(m)) / L(0);
    }
    for (std::size_t k = 0; k < d.s.size(); ++k) {
        const Vector l = lam.s[k].diagonal();
        const Eigen::Index m = l.size();
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) x.s[k](i, j) = 2.0 * d.s[k](i, j) / (l(i) + l(j));
    }
    return x;
}

// ---- Nesterov-Todd scaling: W s = W^{-T} z = lambda -------------------------

struct Scaling {
    Vector lw;                      // W = diag(lw)
    std::vector<Matrix> qW, qWinv;  // explicit symmetric SOC scalings
    std::vector<Matrix> R, Rinv;    // W(u) = Rinv u Rinv^T, W^{-T}(u) = R^T u R
    ConeVec lambda;
};

bool compute_scaling(const ConeVec& s, const ConeVec& z, Scaling& sc) {
    sc.lambda = zeros_like(s);
    if ((s.l.array() <= 0).any() || (z.l.array() <= 0).any()) return false;
    sc.lw = (z.l.array() / s.l.array()).sqrt();
    sc.lambda.l = (s.l.array() * z.l.array()).sqrt();
    sc.qW.clear();
    sc.qWinv.clear();
    for (std::size_t k = 0; k < s.q.size(); ++k) {
        const Vector& sv = s.q[k];
        const Vector& zv = z.q[k];
        const double sn = soc_jnorm2(sv), zn = soc_jnorm2(zv);
        if (sn <= 0 || zn <= 0 || sv(0) <= 0 || zv(0) <= 0) return false;
        const Eigen::Index m = sv.size() - 1;
        const Vector sb = sv / std::sqrt(sn);
        const Vector zb = zv / std::sqrt(zn);
        const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
        Vector w(sv.size());
        w(0) = (zb(0) + sb(0)) / (2 * gamma);
        w.tail(m) = (zb.tail(m) - sb.tail(m)) / (2 * gamma);
        const double beta = std::sqrt(std::sqrt(zn / sn));
        Matrix H(sv.size(), sv.size());
        H(0, 0) = w(0);
        H.block(0, 1, 1, m) = w.tail(m).transpose();
        H.block(1, 0, m, 1) = w.tail(m);
        H.block(1, 1, m, m) = Matrix::Identity(m, m) + w.tail(m) * w.tail(m).transpose() / (1.0 + w(0));
        Matrix Hi = H;
        Hi.block(0, 1, 1, m) *= -1.0;
        Hi.block(1, 0, m, 1) *= -1.0;
        sc.qW.push_back(beta * H);
        sc.qWinv.push_back(Hi / beta);
        sc.lambda.q[k] = beta * (H * sv);
    }
    sc.R.clear();
    sc.Rinv.clear();
    for (std::size_t k = 0; k < s.s.size(); ++k) {
        const Eigen::LLT<Matrix> ls(s.s[k]), lz(z.s[k]);
        if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
        const Matrix Ls = ls.matrixL(), Lz = lz.matrixL();
        Eigen::BDCSVD<Matrix> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector lam = svd.singularValues();
        if (lam.minCoeff() <= 0) return false;
        const Matrix& Vs = svd.matrixV();
        const Vector isq = lam.cwiseSqrt().cwiseInverse();
        const Matrix R = Ls * Vs * isq.asDiagonal();
        // R^{-1} = Lambda^{1/2} V^T Ls^{-1}
        const Matrix LsInvT = Ls.triangularView<Eigen::Lower>().solve(
            Matrix::Identity(Ls.rows(), Ls.cols()));
        const Matrix Rinv = lam.cwiseSqrt().asDiagonal() * Vs.transpose() * LsInvT;
        sc.R.push_back(R);
        sc.Rinv.push_back(Rinv);
        sc.lambda.s[k] = lam.asDiagonal();
    }
    return true;
}

// W s (scaled primal)
ConeVec apply_W(const Scaling& sc, const ConeVec& u) {
    ConeVec out = zeros_like(u);
    out.l = u.l.cwiseProduct(sc.lw);
    for (std::size_t k = 0; k < u.q.size(); ++k) out.q[k] = sc.qW[k] * u.q[k];
    for (std::size_t k = 0; k < u.s.size(); ++k) out.s[k] = sc.Rinv[k] * u.s[k] * sc.Rinv[k].transpose();
    return out;
}

// W^T u
ConeVec apply_WT(const Scaling& sc, const ConeVec& u) {
    ConeVec out = zeros_like(u);
    out.l = u.l.cwiseProduct(sc.lw);
    for (std::size_t k = 0; k < u.q.size(); ++k) out.q[k] = sc.qW[k] * u.q[k];
    for (std::size_t k = 0; k < u.s.size(); ++k) out.s[k] = sc.Rinv[k].transpose() * u.s[k] * sc.Rinv[k];
    return out;
}

// ---- KKT system --------------------------------------------------------------
// With Gs = W G and u = W^{-T} dz the Newton system reads
//   Gs^T u = bx,  Gs dx - u = bs   =>   (Gs^T Gs) dx = bx + Gs^T bs,  u = Gs dx - bs.

class KktSolver {
public:
    KktSolver(const Problem& p, const Scaling& sc) : p_(p), sc_(sc) {
        const int n = p.n;
        Matrix F = Matrix::Zero(n, n);
        const Matrix& Gl = p.prog.linear.G;
        if (Gl.rows()) {
            const Matrix WG = sc.lw.asDiagonal() * Gl;
            F += WG.transpose() * WG;
        }
        for (std::size_t k = 0; k < p.prog.soc.size(); ++k) {
            const Matrix WG = sc.qW[k] * p.prog.soc[k].G;
            F += WG.transpose() * WG;
        }
        for (std::size_t j = 0; j < p.psd.size(); ++j) {
            const auto& d = p.psd[j];
            Ah_.push_back(sc.Rinv[j] * d.Au);
            Bh_.push_back(sc.Rinv[j] * d.B);
            const Matrix& Ah = Ah_.back();
            const Matrix& Bh = Bh_.back();
            const Matrix Guu = Ah.transpose() * Ah;
            const Matrix Gbb = Bh.transpose() * Bh;
            const Matrix Gub = Ah.transpose() * Bh;
            const auto T = static_cast<Eigen::Index>(d.var.size());
            Matrix Ft(T, T);
            for (Eigen::Index s = 0; s < T; ++s) {
                const int gs = d.group[static_cast<std::size_t>(s)];
                for (Eigen::Index t = 0; t < T; ++t) {
                    const int gt = d.group[static_cast<std::size_t>(t)];
                    Ft(s, t) = 2.0 * (Guu(gs, gt) * Gbb(s, t) + Gub(gs, t) * Gub(gt, s));
                }
            }
            for (Eigen::Index s = 0; s < T; ++s)
                for (Eigen::Index t = 0; t < T; ++t)
                    F(d.var[static_cast<std::size_t>(s)], d.var[static_cast<std::size_t>(t)]) += Ft(s, t);
        }
        F_ = linalg::symmetrize(F);
        const double reg = 1e-15 * std::max(1.0, F_.diagonal().cwiseAbs().maxCoeff());
        Matrix Freg = F_;
        Freg.diagonal().array() += reg;
        llt_.compute(Freg);
        ok_ = llt_.info() == Eigen::Success;
        if (!ok_) {
            ldlt_.compute(Freg);
            ok_ = ldlt_.info() == Eigen::Success;
            use_ldlt_ = true;
        }
    }

    bool ok() const { return ok_; }

    // bs is already scaled (W bz); returns dx and u = W^{-T} dz.
    void solve(const Vector& bx, const ConeVec& bs, Vector& dx, ConeVec& u) const {
        reduced(bx, bs, dx, u);
        for (int it = 0; it < 3; ++it) {
            const Vector r1 = bx - GsT(u);
            ConeVec r2 = bs;
            axpy(-1.0, Gs(dx), r2);
            axpy(1.0, u, r2);
            Vector ex;
            ConeVec eu;
            reduced(r1, r2, ex, eu);
            dx += ex;
            axpy(1.0, eu, u);
        }
    }

private:
    ConeVec Gs(const Vector& x) const {
        const ConicProgram& prog = p_.prog;
        ConeVec out;
        out.l = prog.linear.G.rows() ? Vector(sc_.lw.cwiseProduct(prog.linear.G * x)) : Vector(0);
        for (std::size_t k = 0; k < prog.soc.size(); ++k) out.q.push_back(sc_.qW[k] * (prog.soc[k].G * x));
        for (std::size_t j = 0; j < p_.psd.size(); ++j) {
            out.s.push_back(-lowrank_sum(Ah_[j], Bh_[j], p_.psd[j], x));
        }
        return out;
    }

    Vector GsT(const ConeVec& u) const {
        const ConicProgram& prog = p_.prog;
        Vector out = Vector::Zero(p_.n);
        if (prog.linear.G.rows()) out += prog.linear.G.transpose() * sc_.lw.cwiseProduct(u.l);
        for (std::size_t k = 0; k < prog.soc.size(); ++k)
            out += prog.soc[k].G.transpose() * (sc_.qW[k] * u.q[k]);
        for (std::size_t j = 0; j < p_.psd.size(); ++j) {
            lowrank_adjoint(Ah_[j], Bh_[j], p_.psd[j], u.s[j], -2.0, out);
        }
        return out;
    }

    void reduced(const Vector& bx, const ConeVec& bs, Vector& dx, ConeVec& u) const {
        dx = back(bx + GsT(bs));
        u = Gs(dx);
        axpy(-1.0, bs, u);
    }

    Vector back(const Vector& r) const { return use_ldlt_ ? Vector(ldlt_.solve(r)) : Vector(llt_.solve(r)); }

    const Problem& p_;
    const Scaling& sc_;
    Matrix F_;
    std::vector<Matrix> Ah_, Bh_;
    Eigen::LLT<Matrix> llt_;
    Eigen::LDLT<Matrix> ldlt_;
    bool ok_ = false;
    bool use_ldlt_ = false;
};

// Push v into the interior: v + (1 + t) e when the most negative "eigenvalue" is -t >= 0.
void shift_into_cone(ConeVec& v) {
    double worst = -kInf;
    for (Eigen::Index i = 0; i < v.l.size(); ++i) worst = std::max(worst, -v.l(i));
    for (const auto& q : v.q) worst = std::max(worst, q.tail(q.size() - 1).norm() - q(0));
    for (const auto& s : v.s) worst = std::max(worst, -linalg::lambda_min_sym(s));
    if (worst >= -1e-8 * std::max(1.0, norm(v))) {
        const double t = 1.0 + std::max(worst, 0.0);
        v.l.array() += t;
        for (auto& q : v.q) q(0) += t;
        for (auto& s : v.s) s.diagonal().array() += t;
    }
}

}  // namespace

Solution solve(const ConicProgram& prog, const SolverOptions& opts) {
    Problem P(prog);
    const int n = P.n;
    if (prog.c.size() != n) fail(ErrorCode::ShapeMismatch, "objective length != n_vars");
    for (const auto& q : prog.soc) {
        if (q.G.cols() != n || q.G.rows() != q.h.size() || q.h.size() < 1)
            fail(ErrorCode::ShapeMismatch, "SOC block shape mismatch");
    }
    if (prog.linear.G.rows() != prog.linear.h.size() ||
        (prog.linear.G.rows() && prog.linear.G.cols() != n))
        fail(ErrorCode::ShapeMismatch, "linear block shape mismatch");
    for (const auto& b : prog.psd) {
        if (b.C.rows() != b.C.cols()) fail(ErrorCode::ShapeMismatch, "PSD constant not square");
        for (const auto& t : b.terms)
            if (t.var < 0 || t.var >= n || t.a.size() != b.dim() || t.b.size() != b.dim())
                fail(ErrorCode::ShapeMismatch, "PSD term shape mismatch");
    }

    Solution sol;
    const Vector& c = prog.c;
    const ConeVec& h = P.h;
    const double resx0 = std::max(1.0, c.norm());
    const double resz0 = std::max(1.0, norm(h));

    // Initial point from the identity-scaled KKT system.
    Vector x;
    ConeVec s, z;
    {
        Scaling id;
        id.lw = Vector::Ones(h.l.size());
        for (const auto& q : h.q) {
            id.qW.push_back(Matrix::Identity(q.size(), q.size()));
            id.qWinv.push_back(Matrix::Identity(q.size(), q.size()));
        }
        for (const auto& sm : h.s) {
            id.R.push_back(Matrix::Identity(sm.rows(), sm.rows()));
            id.Rinv.push_back(Matrix::Identity(sm.rows(), sm.rows()));
        }
        KktSolver kkt(P, id);
        if (!kkt.ok()) {
            sol.diagnostics = "initial KKT system singular (G lacks full column rank)";
            return sol;
        }
        ConeVec zz;
        kkt.solve(Vector::Zero(n), h, x, zz);
        s = scaled(-1.0, zz);
        shift_into_cone(s);
        Vector xx;
        kkt.solve(-c, zeros_like(h), xx, z);
        shift_into_cone(z);
    }
    double tau = 1.0, kappa = 1.0;
    const ConeVec e = P.identity();
    const double deg = static_cast<double>(P.degree);

    std::ostringstream diag;
    Solution best;
    double best_merit = kInf;
    for (int iter = 0; iter <= opts.max_iter; ++iter) {
        sol.iterations = iter;
        const Vector GTz = P.GT(z);
        const Vector rx = GTz + c * tau;
        ConeVec rz = P.G(x);
        axpy(1.0, s, rz);
        axpy(-tau, h, rz);
        const double cx = c.dot(x), hz = dot(h, z);
        const double rt = kappa + cx + hz;
        const double sz = dot(s, z);
        const double mu = (sz + tau * kappa) / (deg + 1.0);

        const double pcost = cx / tau, dcost = -hz / tau;
        const double gap = sz / (tau * tau);
        const double pres = norm(rz) / tau / resz0;
        const double dres = rx.norm() / tau / resx0;
        double relgap = kInf;
        if (pcost < 0) relgap = gap / -pcost;
        else if (dcost > 0) relgap = gap / dcost;
        sol.primal_obj = pcost;
        sol.dual_obj = dcost;
        sol.gap = gap;
        sol.pres = pres;
        sol.dres = dres;
        sol.x = x / tau;
        const double merit = std::max({pres, dres, std::min(gap, relgap)});
        if (merit < best_merit) {
            best_merit = merit;
            best = sol;
        }
        if (opts.verbose) {
            std::cerr << "it " << iter << " pcost " << pcost << " dcost " << dcost << " gap " << gap
                      << " pres " << pres << " dres " << dres << " k/t " << kappa / tau << "\n";
        }
        if (pres <= opts.feastol && dres <= opts.feastol &&
            (gap <= opts.abstol || relgap <= opts.reltol)) {
            sol.status = Status::Optimal;
            return sol;
        }
        // Certificates.
        if (hz < 0) {
            const double pinf = GTz.norm() / (-hz) / resx0;
            if (pinf <= opts.feastol) {
                sol.status = Status::Infeasible;
                sol.diagnostics = "primal infeasibility certificate, residual " + std::to_string(pinf);
                return sol;
            }
        }
        if (cx < 0) {
            ConeVec r = P.G(x);
            axpy(1.0, s, r);
            const double dinf = norm(r) / (-cx) / resz0;
            if (dinf <= opts.feastol) {
                sol.status = Status::Unbounded;
                sol.diagnostics = "dual infeasibility certificate, residual " + std::to_string(dinf);
                return sol;
            }
        }
        if (iter == opts.max_iter) break;

        Scaling sc;
        if (!compute_scaling(s, z, sc)) {
            diag << "scaling failed at iteration " << iter << "; ";
            break;
        }
        KktSolver kkt(P, sc);
        if (!kkt.ok()) {
            diag << "KKT factorization failed at iteration " << iter << "; ";
            break;
        }
        // h^T W^T u = (W h)^T u, so the unscaled z iterates are never needed here
        const ConeVec Wh = apply_W(sc, h);
        const ConeVec Wrz = apply_W(sc, rz);
        Vector x1;
        ConeVec u1;
        kkt.solve(-c, Wh, x1, u1);
        const double denom_base = c.dot(x1) + dot(Wh, u1);

        const ConeVec& lam = sc.lambda;
        const ConeVec lamlam = jprod_diag(lam, lam);
        ConeVec dsa_s, dza_s;
        double dtau_a = 0.0, dkap_a = 0.0;
        double sigma = 0.0;
        Vector dx;
        ConeVec dz, ds_s, dz_s;
        double dtau = 0.0, dkap = 0.0;
        bool step_ok = true;
        for (int pass = 0; pass < 2; ++pass) {
            ConeVec rhs_s = scaled(-1.0, lamlam);
            double rhs_k = -tau * kappa;
            if (pass == 1) {
                axpy(-1.0, jprod(dsa_s, dza_s), rhs_s);
                axpy(sigma * mu, e, rhs_s);
                rhs_k += -dtau_a * dkap_a + sigma * mu;
            }
            const double lin = pass == 0 ? 1.0 : 1.0 - sigma;
            const ConeVec v = jdiv(lam, rhs_s);
            const Vector bx = -lin * rx;
            ConeVec bs = scaled(-lin, Wrz);
            axpy(-1.0, v, bs);
            const double bt = -lin * rt;
            Vector x0;
            ConeVec u0;
            kkt.solve(bx, bs, x0, u0);
            const double denom = denom_base - kappa / tau;
            if (denom == 0.0 || !std::isfinite(denom)) {
                step_ok = false;
                break;
            }
            dtau = (bt - rhs_k / tau - c.dot(x0) - dot(Wh, u0)) / denom;
            dx = x0 + dtau * x1;
            dz_s = u0;
            axpy(dtau, u1, dz_s);
            dkap = (rhs_k - kappa * dtau) / tau;
            ds_s = v;
            axpy(-1.0, dz_s, ds_s);

            double amax = std::min(max_step(lam, ds_s), max_step(lam, dz_s));
            if (dtau < 0) amax = std::min(amax, -tau / dtau);
            if (dkap < 0) amax = std::min(amax, -kappa / dkap);
            if (pass == 0) {
                const double aa = std::min(1.0, amax);
                sigma = std::pow(1.0 - aa, 3);
                dsa_s = ds_s;
                dza_s = dz_s;
                dtau_a = dtau;
                dkap_a = dkap;
            } else {
                const double alpha = std::min(1.0, 0.99 * amax);
                if (!(alpha > 1e-14)) {
                    step_ok = false;
                    break;
                }
                if (opts.verbose) std::cerr << "   step " << alpha << " sigma " << sigma << "\n";
                dz = apply_WT(sc, dz_s);
                x += alpha * dx;
                // primal direction from the linearized residual equation keeps rz exact
                ConeVec ds = P.G(dx);
                axpy(lin, rz, ds);
                axpy(-dtau, h, ds);
                axpy(-alpha, ds, s);
                axpy(alpha, dz, z);
                tau += alpha * dtau;
                kappa += alpha * dkap;
            }
        }
        if (!step_ok) {
            diag << "step length collapsed at iteration " << iter << "; ";
            break;
        }
        for (auto& sm : s.s) sm = linalg::symmetrize(sm);
        for (auto& zm : z.s) zm = linalg::symmetrize(zm);
    }

    if (best_merit < kInf) {
        const int iters = sol.iterations;
        sol = best;
        sol.iterations = iters;
    }
    if (sol.pres <= 1e-6 && sol.dres <= 1e-6 &&
        (sol.gap <= 1e-6 || sol.gap <= 1e-5 * std::max(std::abs(sol.primal_obj), 1e-300))) {
        sol.status = Status::NearOptimal;
    } else {
        sol.status = Status::NumericalFailure;
    }
    diag << "pres " << sol.pres << " dres " << sol.dres << " gap " << sol.gap;
    sol.diagnostics = diag.str();
    return sol;
}

Solution solve_or_throw(const ConicProgram& prog, const SolverOptions& opts) {
    Solution s = solve(prog, opts);
    switch (s.status) {
        case Status::Optimal:
        case Status::NearOptimal: return s;
        case Status::Infeasible: fail(ErrorCode::Infeasible, s.diagnostics);
        case Status::Unbounded: fail(ErrorCode::Unbounded, s.diagnostics);
        case Status::NumericalFailure: fail(ErrorCode::NumericalFailure, s.diagnostics);
    }
    fail(ErrorCode::NumericalFailure, s.diagnostics);
}

GainLayout add_gain(ConicProgram& prog, int rows, int cols) {
    GainLayout g{rows, cols, prog.add_vars(rows * cols)};
    return g;
}

Matrix extract_gain(const Vector& x, const GainLayout& layout) {
    Matrix G(layout.rows, layout.cols);
    for (int i = 0; i < layout.rows; ++i)
        for (int j = 0; j < layout.cols; ++j) G(i, j) = x(layout.index(i, j));
    return G;
}

PsdBlock quad_constraint_to_psd(const GainLayout& layout, const Matrix& W, const Matrix& selector,
                                double gamma2, std::optional<int> gamma_var) {
    const int r = layout.rows;
    if (W.rows() != layout.cols + selector.cols() || (selector.cols() && selector.rows() != r)) {
        fail(ErrorCode::ShapeMismatch, "factor rows must equal gain columns plus selector columns");
    }
    const Eigen::Index k = W.cols();
    const Matrix Wtop = W.topRows(layout.cols);
    PsdBlock blk;
    blk.C = Matrix::Zero(r + k, r + k);
    blk.C.bottomRightCorner(k, k).setIdentity();
    if (!gamma_var) blk.C.topLeftCorner(r, r) = gamma2 * Matrix::Identity(r, r);
    if (selector.cols()) {
        const Matrix SW = selector * W.bottomRows(selector.cols());
        blk.C.topRightCorner(r, k) = SW;
        blk.C.bottomLeftCorner(k, r) = SW.transpose();
    }
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < layout.cols; ++j) {
            LowRankTerm t;
            t.var = layout.index(i, j);
            t.a = Vector::Unit(r + k, i);
            t.b = Vector::Zero(r + k);
            t.b.tail(k) = Wtop.row(j).transpose();
            blk.terms.push_back(std::move(t));
        }
    }
    if (gamma_var) {
        for (int i = 0; i < r; ++i) {
            LowRankTerm t;
            t.var = *gamma_var;
            t.a = Vector::Unit(r + k, i);
            t.b = 0.5 * Vector::Unit(r + k, i);
            blk.terms.push_back(std::move(t));
        }
    }
    return blk;
}

int add_trace_objective(ConicProgram& prog, const GainLayout& layout, const Matrix& Sigma_half) {
    if (Sigma_half.rows() != layout.cols) fail(ErrorCode::ShapeMismatch, "Sigma_half rows != gain cols");
    const int t0 = prog.add_vars(layout.rows);
    const Eigen::Index k = Sigma_half.cols();
    for (int i = 0; i < layout.rows; ++i) {
        // (t + 1, 2 Sigma_half^T g_i, t - 1) in the cone  <=>  ||g_i Sigma_half||^2 <= t
        SocBlock q;
        q.tag = "trace_row_" + std::to_string(i);
        q.G = Matrix::Zero(k + 2, prog.n_vars);
        q.h = Vector::Zero(k + 2);
        q.h(0) = 1.0;
        q.G(0, t0 + i) = -1.0;
        for (int j = 0; j < layout.cols; ++j) {
            q.G.block(1, layout.index(i, j), k, 1) = -2.0 * Sigma_half.row(j).transpose();
        }
        q.h(k + 1) = -1.0;
        q.G(k + 1, t0 + i) = -1.0;
        prog.soc.push_back(std::move(q));
        prog.c(t0 + i) = 1.0;
    }
    return t0;
}

double quad_form_lambda_max(const Matrix& G, const Matrix& selector, const Matrix& M) {
    Matrix X(G.rows(), G.cols() + selector.cols());
    X << G, selector;
    return linalg::lambda_max_sym(X * M * X.transpose());
}

double psd_block_min_eig(const PsdBlock& block, const Vector& x) {
    Matrix S = block.C;
    for (const auto& t : block.terms) S += x(t.var) * (t.a * t.b.transpose() + t.b * t.a.transpose());
    return linalg::lambda_min_sym(S);
}

std::string dump_json(const ConicProgram& prog) {
    using nlohmann::json;
    auto mat = [](const Matrix& m) {
        json rows = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            json r = json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
            rows.push_back(r);
        }
        return rows;
    };
    auto vec = [](const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); };
    json j;
    j["n_vars"] = prog.n_vars;
    j["c"] = vec(prog.c);
    j["linear"] = {{"G", mat(prog.linear.G)}, {"h", vec(prog.linear.h)}};
    j["soc"] = json::array();
    for (const auto& q : prog.soc) j["soc"].push_back({{"tag", q.tag}, {"G", mat(q.G)}, {"h", vec(q.h)}});
    j["psd"] = json::array();
    for (const auto& b : prog.psd) {
        json terms = json::array();
        for (const auto& t : b.terms) terms.push_back({{"var", t.var}, {"a", vec(t.a)}, {"b", vec(t.b)}});
        j["psd"].push_back({{"tag", b.tag}, {"C", mat(b.C)}, {"terms", terms}});
    }
    return j.dump(1);
}

}  // namespace rhfe::sdp

#include "isac/socp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace isac::socp {

const char* to_string(Status s)
{
    switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

void ConeProgram::validate() const
{
    auto bad = [](const std::string& what) { throw std::invalid_argument("ConeProgram: " + what); };
    if (num_vars < 1)
        bad("num_vars must be >= 1");
    if (objective.size() != num_vars || !objective.allFinite() || !std::isfinite(objective_constant))
        bad("objective has wrong size or non-finite entries");
    for (const auto& r : affine_ineqs)
        if (r.a.size() != num_vars || !r.a.allFinite() || !std::isfinite(r.b))
            bad("affine row has wrong size or non-finite entries");
    for (const auto& s : soc_constraints) {
        if (s.A.cols() != num_vars || s.c.size() != num_vars || s.A.rows() != s.b.size())
            bad("cone constraint dimensions are inconsistent");
        if (s.A.rows() < 1)
            bad("cone constraint needs at least one norm row");
        if (!s.A.allFinite() || !s.b.allFinite() || !s.c.allFinite() || !std::isfinite(s.d))
            bad("cone constraint has non-finite entries");
    }
}

double ConeProgram::max_violation(const RVector& x) const
{
    double v = 0.0;
    for (const auto& r : affine_ineqs)
        v = std::max(v, r.a.dot(x) - r.b);
    for (const auto& s : soc_constraints)
        v = std::max(v, (s.A * x + s.b).norm() - (s.c.dot(x) + s.d));
    return v;
}

SocConstraint lift_quadratic_bound(const RMatrix& M, const RVector& m, const RVector& t, double t0)
{
    if (M.rows() != m.size() || M.cols() != t.size())
        throw std::invalid_argument("lift_quadratic_bound: dimension mismatch");
    SocConstraint s;
    const Eigen::Index k = M.rows();
    s.A.resize(k + 1, M.cols());
    s.A.topRows(k) = 2.0 * M;
    s.A.row(k) = t.transpose();
    s.b.resize(k + 1);
    s.b.head(k) = 2.0 * m;
    s.b(k) = t0 - 1.0;
    s.c = t;
    s.d = t0 + 1.0;
    return s;
}

std::string dump(const ConeProgram& prog)
{
    std::ostringstream os;
    os.precision(17);
    auto vec = [&](const RVector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            os << (i ? " " : "") << v(i);
    };
    os << "vars " << prog.num_vars << "\n";
    os << "maximize " << prog.objective_constant << " | ";
    vec(prog.objective);
    os << "\n";
    for (const auto& r : prog.affine_ineqs) {
        os << "lin ";
        vec(r.a);
        os << " <= " << r.b << "\n";
    }
    for (const auto& s : prog.soc_constraints) {
        os << "soc " << s.A.rows() << " | A ";
        for (Eigen::Index i = 0; i < s.A.rows(); ++i) {
            vec(s.A.row(i).transpose());
            os << (i + 1 < s.A.rows() ? " ; " : "");
        }
        os << " | b ";
        vec(s.b);
        os << " | c ";
        vec(s.c);
        os << " | d " << s.d << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Interior-point machinery.
//
// Internal form:  minimize c^T x  s.t.  G x + s = h,  s in K,
// K = R_+^l x Q^{q_1} x ... . The dual is  maximize -h^T z  s.t.
// G^T z + c = 0, z in K.

namespace {

struct Cones {
    Eigen::Index lp = 0;
    std::vector<Eigen::Index> soc_start;
    std::vector<Eigen::Index> soc_dim;
    Eigen::Index total = 0;

    int degree() const { return static_cast<int>(lp + static_cast<Eigen::Index>(soc_dim.size())); }
};

// Identity element of K.
RVector cone_identity(const Cones& k)
{
    RVector e = RVector::Zero(k.total);
    e.head(k.lp).setOnes();
    for (Eigen::Index start : k.soc_start)
        e(start) = 1.0;
    return e;
}

// Smallest "eigenvalue" of u with respect to K.
double min_eig(const Cones& k, const RVector& u)
{
    double m = std::numeric_limits<double>::infinity();
    if (k.lp > 0)
        m = u.head(k.lp).minCoeff();
    for (std::size_t j = 0; j < k.soc_dim.size(); ++j) {
        const auto s = k.soc_start[j];
        const auto d = k.soc_dim[j];
        m = std::min(m, u(s) - u.segment(s + 1, d - 1).norm());
    }
    return m;
}

// Jordan product u o v.
RVector jordan(const Cones& k, const RVector& u, const RVector& v)
{
    RVector out(k.total);
    out.head(k.lp) = u.head(k.lp).cwiseProduct(v.head(k.lp));
    for (std::size_t j = 0; j < k.soc_dim.size(); ++j) {
        const auto s = k.soc_start[j];
        const auto n = k.soc_dim[j] - 1;
        out(s) = u.segment(s, n + 1).dot(v.segment(s, n + 1));
        out.segment(s + 1, n) = u(s) * v.segment(s + 1, n) + v(s) * u.segment(s + 1, n);
    }
    return out;
}

// Solves lambda o x = r for x.
RVector jordan_solve(const Cones& k, const RVector& lambda, const RVector& r)
{
    RVector x(k.total);
    x.head(k.lp) = r.head(k.lp).cwiseQuotient(lambda.head(k.lp));
    for (std::size_t j = 0; j < k.soc_dim.size(); ++j) {
        const auto s = k.soc_start[j];
        const auto n = k.soc_dim[j] - 1;
        const double l0 = lambda(s);
        const auto l1 = lambda.segment(s + 1, n);
        const double det = l0 * l0 - l1.squaredNorm();
        const double x0 = (l0 * r(s) - l1.dot(r.segment(s + 1, n))) / det;
        x(s) = x0;
        x.segment(s + 1, n) = (r.segment(s + 1, n) - x0 * l1) / l0;
    }
    return x;
}

// Nesterov-Todd scaling W (symmetric, block diagonal) with W z = W^{-1} s.
struct Scaling {
    RVector lp_d;                // LP block: W = diag(lp_d)
    std::vector<double> beta;    // SOC blocks: W = beta (2 v v^T - J)
    std::vector<RVector> v;
};

Scaling nt_scaling(const Cones& k, const RVector& s, const RVector& z)
{
    Scaling w;
    w.lp_d = (s.head(k.lp).cwiseQuotient(z.head(k.lp))).cwiseSqrt();
    for (std::size_t j = 0; j < k.soc_dim.size(); ++j) {
        const auto st = k.soc_start[j];
        const auto n = k.soc_dim[j] - 1;
        const double sa = std::sqrt(std::max(s(st) * s(st) - s.segment(st + 1, n).squaredNorm(), 1e-300));
        const double za = std::sqrt(std::max(z(st) * z(st) - z.segment(st + 1, n).squaredNorm(), 1e-300));
        RVector sb = s.segment(st, n + 1) / sa;
        RVector zb = z.segment(st, n + 1) / za;
        const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
        // w = (s_bar + J z_bar) / (2 gamma)
        RVector wv = sb;
        wv(0) += zb(0);
        wv.tail(n) -= zb.tail(n);
        wv /= 2.0 * gamma;
        wv(0) += 1.0;
        wv /= std::sqrt(2.0 * wv(0));
        w.beta.push_back(std::sqrt(sa / za));
        w.v.push_back(std::move(wv));
    }
    return w;
}

// y = W x (inverse = false) or W^{-1} x (inverse = true); x may be a matrix
// whose rows follow the cone layout.
RMatrix apply_scaling(const Cones& k, const Scaling& w, const RMatrix& x, bool inverse)
{
    RMatrix y(x.rows(), x.cols());
    if (k.lp > 0) {
        if (inverse)
            y.topRows(k.lp) = w.lp_d.cwiseInverse().asDiagonal() * x.topRows(k.lp);
        else
            y.topRows(k.lp) = w.lp_d.asDiagonal() * x.topRows(k.lp);
    }
    for (std::size_t j = 0; j < k.soc_dim.size(); ++j) {
        const auto st = k.soc_start[j];
        const auto d = k.soc_dim[j];
        const double beta = w.beta[j];
        RVector v = w.v[j];
        if (inverse)
            v.tail(d - 1) = -v.tail(d - 1); // J v
        auto blk = x.middleRows(st, d);
        // (2 v v^T - J) blk
        RMatrix out = 2.0 * v * (v.transpose() * blk);
        out.row(0) -= blk.row(0);
        out.bottomRows(d - 1) += blk.bottomRows(d - 1);
        y.middleRows(st, d) = inverse ? RMatrix(out / beta) : RMatrix(out * beta);
    }
    return y;
}

RVector apply_scaling(const Cones& k, const Scaling& w, const RVector& x, bool inverse)
{
    return apply_scaling(k, w, RMatrix(x), inverse).col(0);
}

// Largest step alpha with u + alpha d in K (infinity when unbounded).
double max_step(const Cones& k, const RVector& u, const RVector& d)
{
    double alpha = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < k.lp; ++i)
        if (d(i) < 0.0)
            alpha = std::min(alpha, -u(i) / d(i));
    for (std::size_t j = 0; j < k.soc_dim.size(); ++j) {
        const auto st = k.soc_start[j];
        const auto n = k.soc_dim[j] - 1;
        const double a = d(st) * d(st) - d.segment(st + 1, n).squaredNorm();
        const double b = u(st) * d(st) - u.segment(st + 1, n).dot(d.segment(st + 1, n));
        const double c = std::max(u(st) * u(st) - u.segment(st + 1, n).squaredNorm(), 0.0);
        const double disc = b * b - a * c;
        double root = std::numeric_limits<double>::infinity();
        if (a < 0.0) {
            const double sq = std::sqrt(std::max(disc, 0.0));
            root = (b > 0.0) ? (-b - sq) / a : c / (-b + sq);
        } else if (b < 0.0 && disc >= 0.0) {
            root = c / (-b + std::sqrt(disc));
        }
        alpha = std::min(alpha, std::max(root, 0.0));
    }
    return alpha;
}

// Factorized reduced KKT system  [0 G^T; G -W^2] [x; z] = [bx; bz].
class KktSolver {
public:
    KktSolver(const Cones& k, const Scaling& w, const RMatrix& G) : k_(k), w_(w)
    {
        gs_ = apply_scaling(k, w, G, true); // W^{-1} G
        RMatrix h = gs_.transpose() * gs_;
        const double reg = 1e-13 * std::max(h.diagonal().maxCoeff(), 1.0);
        h.diagonal().array() += reg;
        h_ = h;
        llt_.compute(h);
        if (llt_.info() != Eigen::Success)
            throw std::runtime_error("KKT factorization failed");
    }

    // Returns x and W z.
    void solve(const RVector& bx, const RVector& bz, RVector& x, RVector& wz) const
    {
        const RVector wbz = apply_scaling(k_, w_, bz, true); // W^{-1} bz
        const RVector rhs = bx + gs_.transpose() * wbz;
        x = llt_.solve(rhs);
        // One refinement step against the unregularized normal matrix.
        const RVector res = rhs - gs_.transpose() * (gs_ * x);
        x += llt_.solve(res);
        wz = gs_ * x - wbz;
    }

private:
    const Cones& k_;
    const Scaling& w_;
    RMatrix gs_;
    RMatrix h_;
    Eigen::LLT<RMatrix> llt_;
};

} // namespace

ConeSolution solve(const ConeProgram& prog, const Options& opt)
{
    prog.validate();
    const Eigen::Index n = prog.num_vars;

    // Assemble the internal form with per-block equilibration.
    Cones k;
    k.lp = static_cast<Eigen::Index>(prog.affine_ineqs.size());
    Eigen::Index m = k.lp;
    for (const auto& s : prog.soc_constraints) {
        k.soc_start.push_back(m);
        k.soc_dim.push_back(s.A.rows() + 1);
        m += s.A.rows() + 1;
    }
    k.total = m;

    RMatrix G(m, n);
    RVector h(m);
    RVector row_scale(m);
    for (Eigen::Index i = 0; i < k.lp; ++i) {
        const auto& r = prog.affine_ineqs[static_cast<std::size_t>(i)];
        const double nrm = r.a.norm();
        const double sc = nrm > 0.0 ? 1.0 / nrm : 1.0;
        G.row(i) = sc * r.a.transpose();
        h(i) = sc * r.b;
        row_scale(i) = sc;
    }
    for (std::size_t j = 0; j < prog.soc_constraints.size(); ++j) {
        const auto& s = prog.soc_constraints[j];
        const auto st = k.soc_start[j];
        const auto d = k.soc_dim[j];
        RMatrix blk(d, n);
        blk.row(0) = -s.c.transpose();
        blk.bottomRows(d - 1) = -s.A;
        RVector hb(d);
        hb(0) = s.d;
        hb.tail(d - 1) = s.b;
        const double nrm = blk.rowwise().norm().maxCoeff();
        const double sc = nrm > 0.0 ? 1.0 / nrm : 1.0;
        G.middleRows(st, d) = sc * blk;
        h.segment(st, d) = sc * hb;
        row_scale.segment(st, d).setConstant(sc);
    }
    const double cnorm = prog.objective.norm();
    const double cscale = cnorm > 0.0 ? cnorm : 1.0;
    const RVector c = -prog.objective / cscale;

    const double resx0 = std::max(1.0, c.norm());
    const double resz0 = std::max(1.0, h.norm());
    const int deg = k.degree();
    const RVector e = cone_identity(k);

    ConeSolution sol;
    auto finish = [&](const RVector& x_int, const RVector& z_int) {
        sol.x = x_int;
        sol.objective_value = prog.evaluate_objective(x_int);
        sol.dual_bound = cscale * h.dot(z_int) + prog.objective_constant;
    };

    // Initial point from the W = I system.
    RVector x, s, z;
    {
        Scaling ident;
        ident.lp_d = RVector::Ones(k.lp);
        for (std::size_t j = 0; j < k.soc_dim.size(); ++j) {
            RVector v = RVector::Zero(k.soc_dim[j]);
            v(0) = 1.0;
            ident.beta.push_back(1.0);
            ident.v.push_back(v);
        }
        KktSolver kkt(k, ident, G);
        RVector wz;
        kkt.solve(RVector::Zero(n), h, x, wz);
        s = -wz; // s = h - G x
        RVector xd;
        kkt.solve(-c, RVector::Zero(m), xd, z);
        const double nrms = std::max(s.norm(), 1.0);
        const double ts = -min_eig(k, s);
        if (ts >= -1e-8 * nrms)
            s += (1.0 + ts) * e;
        const double nrmz = std::max(z.norm(), 1.0);
        const double tz = -min_eig(k, z);
        if (tz >= -1e-8 * nrmz)
            z += (1.0 + tz) * e;
    }
    double tau = 1.0;
    double kappa = 1.0;

    for (int it = 0; it <= opt.max_iter; ++it) {
        sol.iterations = it;
        const RVector gtz = G.transpose() * z;
        const RVector gx = G * x;
        const RVector rx = gtz + c * tau;
        const RVector rz = gx + s - h * tau;
        const double cx = c.dot(x);
        const double hz = h.dot(z);
        const double rt = kappa + cx + hz;
        const double gap = s.dot(z);
        const double mu = (gap + tau * kappa) / (deg + 1);

        const double pcost = cx / tau;
        const double dcost = -hz / tau;
        const double pres = rz.norm() / tau / resz0;
        const double dres = rx.norm() / tau / resx0;
        const double abs_gap = gap / (tau * tau);
        sol.primal_residual = pres;
        sol.dual_residual = dres;
        sol.gap = abs_gap * cscale;

        const double gap_scale = std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
        if (pres <= opt.tol && dres <= opt.tol && abs_gap <= opt.tol * gap_scale) {
            sol.status = Status::optimal;
            finish(x / tau, z / tau);
            return sol;
        }
        if (hz < 0.0) {
            const double pinf = gtz.norm() / resx0 / (-hz);
            if (pinf <= opt.tol) {
                sol.status = Status::infeasible;
                sol.x = RVector::Zero(n);
                sol.certificate = row_scale.asDiagonal() * z;
                sol.certificate /= -h.cwiseQuotient(row_scale).dot(sol.certificate);
                return sol;
            }
        }
        if (cx < 0.0) {
            const double dinf = (gx + s).norm() / resz0 / (-cx);
            if (dinf <= opt.tol) {
                sol.status = Status::unbounded;
                sol.x = x / std::max(tau, 1e-300);
                sol.objective_value = std::numeric_limits<double>::infinity();
                return sol;
            }
        }
        if (it == opt.max_iter)
            break;

        Scaling w;
        RVector lambda;
        std::optional<KktSolver> kkt;
        try {
            w = nt_scaling(k, s, z);
            lambda = apply_scaling(k, w, z, false);
            kkt.emplace(k, w, G);
        } catch (const std::runtime_error&) {
            break;
        }

        RVector x1, wz1;
        kkt->solve(-c, h, x1, wz1);
        const RVector z1 = apply_scaling(k, w, wz1, true);
        const double denom = c.dot(x1) + h.dot(z1) - kappa / tau;

        const RVector lam_sq = jordan(k, lambda, lambda);

        struct Direction {
            RVector dx, dz, ds, ds_scaled, dz_scaled;
            double dtau = 0.0, dkappa = 0.0;
        };

        auto direction = [&](double sigma, const RVector& rc, double rkappa) {
            Direction d;
            const RVector lrc = jordan_solve(k, lambda, rc); // lambda \ rc
            const RVector w_lrc = apply_scaling(k, w, lrc, false);
            RVector dx0, wdz0;
            kkt->solve(-(1.0 - sigma) * rx, -(1.0 - sigma) * rz - w_lrc, dx0, wdz0);
            const RVector dz0 = apply_scaling(k, w, wdz0, true);
            d.dtau = (-(1.0 - sigma) * rt - rkappa / tau - c.dot(dx0) - h.dot(dz0)) / denom;
            d.dx = dx0 + d.dtau * x1;
            d.dz_scaled = wdz0 + d.dtau * wz1; // W dz
            d.dz = dz0 + d.dtau * z1;
            d.ds_scaled = lrc - d.dz_scaled; // W^{-1} ds
            d.ds = apply_scaling(k, w, d.ds_scaled, false);
            d.dkappa = (rkappa - kappa * d.dtau) / tau;
            return d;
        };

        auto step_length = [&](const Direction& d) {
            double a = std::min(max_step(k, lambda, d.ds_scaled), max_step(k, lambda, d.dz_scaled));
            if (d.dtau < 0.0)
                a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0.0)
                a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        // Predictor.
        const Direction aff = direction(0.0, -lam_sq, -tau * kappa);
        const double alpha_aff = std::min(1.0, step_length(aff));
        const double sigma = std::pow(1.0 - alpha_aff, 3);

        // Corrector.
        RVector rc = -lam_sq + sigma * mu * e - jordan(k, aff.ds_scaled, aff.dz_scaled);
        const double rkappa = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
        const Direction dir = direction(sigma, rc, rkappa);
        const double alpha = std::min(1.0, 0.99 * step_length(dir));
        if (!(alpha > 0.0) || !dir.dx.allFinite())
            break;

        x += alpha * dir.dx;
        s += alpha * dir.ds;
        z += alpha * dir.dz;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;

        // Keep iterates strictly interior despite rounding.
        if (min_eig(k, s) <= 0.0 || min_eig(k, z) <= 0.0 || tau <= 0.0 || kappa <= 0.0)
            break;
    }

    sol.status = Status::iteration_limit;
    finish(x / tau, z / tau);
    return sol;
}

} // namespace isac::socp

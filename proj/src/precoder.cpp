#include "isac/precoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace isac {

const char* to_string(CccpFlag f)
{
    switch (f) {
    case CccpFlag::none:
        return "none";
    case CccpFlag::infeasible_init:
        return "infeasible_init";
    case CccpFlag::subproblem_infeasible:
        return "subproblem_infeasible";
    case CccpFlag::solver_limit:
        return "solver_limit";
    }
    return "unknown";
}

bool comm_feasible(const Scenario& sc, const CommChannelSet& ch, const PrecoderSet& w,
                   const ReceiveBeamformers& u, double rel_tol)
{
    return max_comm_violation(sc, ch, w, u) <= rel_tol;
}

double max_comm_violation(const Scenario& sc, const CommChannelSet& ch, const PrecoderSet& w,
                          const ReceiveBeamformers& u)
{
    if (!(sc.gamma > 0.0))
        return 0.0;
    double worst = 0.0;
    for (int i = 0; i < ch.n_ue(); ++i)
        for (int k = 0; k < ch.n_tx(); ++k) {
            const double g = comm_sinr(ch, w, u.u[static_cast<std::size_t>(i)], i, k, sc.sigma_i2);
            worst = std::max(worst, (sc.gamma - g) / sc.gamma);
        }
    return worst;
}

PrecoderSet project_power(PrecoderSet w, double p_t)
{
    for (auto& m : w.w) {
        const double pw = m.squaredNorm();
        if (pw > p_t)
            m *= std::sqrt(p_t / pw);
    }
    return w;
}

PrecoderSet combine_solutions(const PrecoderSet& w1, const PrecoderSet& w2, double p_t)
{
    return project_power(w1 + w2, p_t);
}

double relative_change(const PrecoderSet& now, const PrecoderSet& before)
{
    const double n = now.frobenius_norm();
    if (!(n > 0.0))
        return std::numeric_limits<double>::infinity();
    return (now - before).frobenius_norm() / n;
}

double relative_change(const CVector& now, const CVector& before)
{
    const double n = now.norm();
    if (!(n > 0.0))
        return std::numeric_limits<double>::infinity();
    return (now - before).norm() / n;
}

CVector mmse_update(const CommChannelSet& ch, const PrecoderSet& w, double sigma_i2, int i)
{
    if (!(sigma_i2 > 0.0))
        throw std::invalid_argument("mmse_update: noise variance must be positive");
    if (ch.n_tx() != w.n_tx())
        throw std::invalid_argument("mmse_update: channel/precoder AP count mismatch");
    const int n_ue = ch.n_ue();
    const Eigen::Index m_ue = ch.at(i, 0).rows();
    CVector u = CVector::Zero(m_ue);
    for (int k = 0; k < ch.n_tx(); ++k) {
        const CMatrix& h = ch.at(i, k);
        const CMatrix& wk = w.w[static_cast<std::size_t>(k)];
        if (h.cols() != wk.rows() || wk.cols() != n_ue + 1)
            throw std::invalid_argument("mmse_update: dimension mismatch");
        // Interference from the other UEs' data columns; the sensing column is
        // not part of the covariance.
        CMatrix cov = sigma_i2 * CMatrix::Identity(m_ue, m_ue);
        for (int l = 0; l < n_ue; ++l) {
            if (l == i)
                continue;
            const CVector hw = h * wk.col(l);
            cov.noalias() += hw * hw.adjoint();
        }
        u += cov.llt().solve(h * wk.col(i));
    }
    return u;
}

// ---------------------------------------------------------------------------

RVector ApProgram::pack(const CMatrix& w_k) const
{
    if (w_k.rows() != m_ap || w_k.cols() != columns)
        throw std::invalid_argument("ApProgram::pack: dimension mismatch");
    RVector x = RVector::Zero(program.num_vars);
    for (int c = 0; c < columns; ++c)
        for (int t = 0; t < m_ap; ++t) {
            x(2 * m_ap * c + t) = w_k(t, c).real() / w_scale;
            x(2 * m_ap * c + m_ap + t) = w_k(t, c).imag() / w_scale;
        }
    return x;
}

CMatrix ApProgram::unpack(const RVector& x) const
{
    if (x.size() != program.num_vars)
        throw std::invalid_argument("ApProgram::unpack: dimension mismatch");
    CMatrix w(m_ap, columns);
    for (int c = 0; c < columns; ++c)
        for (int t = 0; t < m_ap; ++t)
            w(t, c) = w_scale * cplx(x(2 * m_ap * c + t), x(2 * m_ap * c + m_ap + t));
    return w;
}

namespace {

void check_inputs(const Scenario& sc, const CommChannelSet& ch, const SensingKernel& kern,
                  const PrecoderSet& w_prev, const ReceiveBeamformers& u, int k)
{
    const int n_tx = sc.cfg.n_tx;
    const int n_ue = sc.cfg.n_ue;
    if (k < 0 || k >= n_tx)
        throw std::out_of_range("subproblem: AP index out of range");
    if (ch.n_tx() != n_tx || ch.n_ue() != n_ue || w_prev.n_tx() != n_tx ||
        static_cast<int>(u.u.size()) != n_ue || kern.coupling.rows() != n_tx ||
        static_cast<int>(kern.a_tx.size()) != n_tx)
        throw std::invalid_argument("subproblem: dimension mismatch");
    for (int j = 0; j < n_tx; ++j)
        if (w_prev.w[static_cast<std::size_t>(j)].rows() != sc.cfg.m_ap ||
            w_prev.w[static_cast<std::size_t>(j)].cols() != n_ue + 1)
            throw std::invalid_argument("subproblem: precoder dimension mismatch");
    for (int i = 0; i < n_ue; ++i)
        if (u.u[static_cast<std::size_t>(i)].size() != ch.at(i, k).rows() || ch.at(i, k).cols() != sc.cfg.m_ap)
            throw std::invalid_argument("subproblem: receive filter / channel dimension mismatch");
}

// Scaled effective channel row of UE i at AP k: r w_hat = u^H H w / sqrt(kappa).
struct UeRow {
    Eigen::RowVectorXcd r;
    double kappa = 1.0;
    double noise = 0.0; // sigma^2 ||u||^2 / kappa
    cplx c0;            // r w_hat_prev,i
};

UeRow ue_row(const Scenario& sc, const CommChannelSet& ch, const PrecoderSet& w_prev, const ReceiveBeamformers& u,
             int i, int k)
{
    const CVector& ui = u.u[static_cast<std::size_t>(i)];
    const Eigen::RowVectorXcd g = ui.adjoint() * ch.at(i, k);
    const double noise = sc.sigma_i2 * ui.squaredNorm();
    const double desired = std::norm((g * w_prev.w[static_cast<std::size_t>(k)].col(i))(0));
    UeRow row;
    // Slacks are measured against the larger of the anchor's desired power
    // and the noise floor, which keeps tau_hat of order one at the anchor.
    row.kappa = std::max(desired, noise);
    if (!(row.kappa > 0.0))
        throw std::invalid_argument("subproblem: degenerate UE channel");
    row.r = g * std::sqrt(sc.p_t / row.kappa);
    row.noise = noise / row.kappa;
    const CVector wp = w_prev.w[static_cast<std::size_t>(k)].col(i) / std::sqrt(sc.p_t);
    row.c0 = (row.r * wp)(0);
    return row;
}

// Writes the real coefficients of Re(coef * w_c) into `a` (scaled columns).
void add_real_part(RVector& a, const ApProgram& prog, int c, const Eigen::RowVectorXcd& coef)
{
    const int m = prog.m_ap;
    for (int t = 0; t < m; ++t) {
        a(2 * m * c + t) += coef(t).real();
        a(2 * m * c + m + t) -= coef(t).imag();
    }
}

void add_imag_part(RVector& a, const ApProgram& prog, int c, const Eigen::RowVectorXcd& coef)
{
    const int m = prog.m_ap;
    for (int t = 0; t < m; ++t) {
        a(2 * m * c + t) += coef(t).imag();
        a(2 * m * c + m + t) += coef(t).real();
    }
}

ApProgram constraint_skeleton(const Scenario& sc, const CommChannelSet& ch, const PrecoderSet& w_prev,
                              const ReceiveBeamformers& u, int k)
{
    const int n_ue = sc.cfg.n_ue;
    const int m = sc.cfg.m_ap;
    const int cols = n_ue + 1;
    const int nw = 2 * m * cols;
    ApProgram prog;
    prog.ap = k;
    prog.m_ap = m;
    prog.columns = cols;
    prog.w_scale = std::sqrt(sc.p_t);
    prog.program = socp::ConeProgram(nw + 2 * n_ue);
    prog.slack_scale = RVector(n_ue);
    const int n = prog.program.num_vars;

    for (int i = 0; i < n_ue; ++i) {
        const UeRow row = ue_row(sc, ch, w_prev, u, i, k);
        prog.slack_scale(i) = row.kappa;

        // Linearized numerator: tau_hat <= 2 Re(conj(c0) r w_i) - |c0|^2.
        RVector a = RVector::Zero(n);
        add_real_part(a, prog, i, -2.0 * std::conj(row.c0) * row.r);
        a(prog.tau_index(i)) = 1.0;
        prog.program.add_affine(std::move(a), -std::norm(row.c0));

        // Interference plus noise: sum_{l != i} |r w_l|^2 + noise <= mu_hat.
        RMatrix M = RMatrix::Zero(2 * n_ue + 1, n);
        RVector mv = RVector::Zero(2 * n_ue + 1);
        int rix = 0;
        for (int l = 0; l < cols; ++l) {
            if (l == i)
                continue;
            RVector re = RVector::Zero(n), im = RVector::Zero(n);
            add_real_part(re, prog, l, row.r);
            add_imag_part(im, prog, l, row.r);
            M.row(rix++) = re.transpose();
            M.row(rix++) = im.transpose();
        }
        mv(rix) = std::sqrt(row.noise);
        RVector t = RVector::Zero(n);
        t(prog.mu_index(i)) = 1.0;
        prog.program.add_soc(socp::lift_quadratic_bound(M, mv, t, 0.0));

        // Gamma mu_hat - tau_hat <= 0.
        RVector d = RVector::Zero(n);
        d(prog.mu_index(i)) = sc.gamma;
        d(prog.tau_index(i)) = -1.0;
        prog.program.add_affine(std::move(d), 0.0);
    }

    // Per-AP power: ||w_hat|| <= 1.
    socp::SocConstraint pw;
    pw.A = RMatrix::Zero(nw, n);
    pw.A.leftCols(nw).setIdentity();
    pw.b = RVector::Zero(nw);
    pw.c = RVector::Zero(n);
    pw.d = 1.0;
    prog.program.add_soc(std::move(pw));
    return prog;
}

} // namespace

ApProgram build_p1(const Scenario& sc, const CommChannelSet& ch, const SensingKernel& kern,
                   const PrecoderSet& w_prev, const ReceiveBeamformers& u, int k)
{
    check_inputs(sc, ch, kern, w_prev, u, k);
    ApProgram prog = constraint_skeleton(sc, ch, w_prev, u, k);
    const auto ks = static_cast<std::size_t>(k);
    const CVector& a = kern.a_tx[ks];
    const Eigen::RowVectorXcd p = a.transpose() * w_prev.w[ks];
    const double scale = kern.zeta * sc.cfg.block_len * kern.coupling(k, k);
    // scale * (2 Re tr(Wp^H A W) - tr(Wp^H A Wp)), with A = a^* a^T.
    for (int c = 0; c < prog.columns; ++c)
        add_real_part(prog.program.objective, prog, c,
                      (2.0 * scale * prog.w_scale * std::conj(p(c))) * a.transpose());
    prog.program.objective_constant = -scale * p.squaredNorm();
    return prog;
}

ApProgram build_p2(const Scenario& sc, const CommChannelSet& ch, const SensingKernel& kern,
                   const PrecoderSet& w_prev, const ReceiveBeamformers& u, int k)
{
    check_inputs(sc, ch, kern, w_prev, u, k);
    ApProgram prog = constraint_skeleton(sc, ch, w_prev, u, k);
    const auto ks = static_cast<std::size_t>(k);
    const CVector& a = kern.a_tx[ks];
    // Re sum_{j != k} coupling(k, j) tr(W_k^H a_k^* a_j^T W_j^prev)
    //   = Re sum_c (a_k^T w_c) conj(q_c),  q = sum_{j != k} coupling(k, j) a_j^T W_j^prev.
    Eigen::RowVectorXcd q = Eigen::RowVectorXcd::Zero(prog.columns);
    for (int j = 0; j < sc.cfg.n_tx; ++j) {
        if (j == k || kern.coupling(k, j) == 0.0)
            continue;
        const auto js = static_cast<std::size_t>(j);
        q += kern.coupling(k, j) * (kern.a_tx[js].transpose() * w_prev.w[js]);
    }
    const double scale = kern.zeta * sc.cfg.block_len;
    for (int c = 0; c < prog.columns; ++c)
        add_real_part(prog.program.objective, prog, c, (scale * prog.w_scale * std::conj(q(c))) * a.transpose());
    return prog;
}

RVector feasible_point(const ApProgram& prog, const Scenario& sc, const CommChannelSet& ch,
                       const PrecoderSet& w_prev, const ReceiveBeamformers& u, const CMatrix& w_k)
{
    RVector x = prog.pack(w_k);
    const int n_ue = prog.columns - 1;
    for (int i = 0; i < n_ue; ++i) {
        const UeRow row = ue_row(sc, ch, w_prev, u, i, prog.ap);
        const Eigen::RowVectorXcd rw = row.r * (w_k / prog.w_scale);
        const double tau = 2.0 * (std::conj(row.c0) * rw(i)).real() - std::norm(row.c0);
        const double mu = rw.squaredNorm() - std::norm(rw(i)) + row.noise;
        x(prog.tau_index(i)) = tau;
        x(prog.mu_index(i)) = mu;
    }
    return x;
}

// ---------------------------------------------------------------------------

InitResult init_precoders(const Scenario& sc, const CommChannelSet& ch, Rng& rng, int max_attempts)
{
    const int n_tx = sc.cfg.n_tx;
    const int n_ue = sc.cfg.n_ue;
    const int m = sc.cfg.m_ap;
    InitResult res;
    for (int i = 0; i < n_ue; ++i) {
        CVector u = complex_normal(rng, sc.cfg.m_ue, 1);
        res.u.u.push_back(u / u.norm());
    }

    auto draw = [&](bool repair, double ue_share) {
        PrecoderSet w;
        for (int k = 0; k < n_tx; ++k) {
            CMatrix wk = complex_normal(rng, m, n_ue + 1);
            if (repair) {
                // Effective channels g_i = H^H u_i; each column is moved into
                // the orthogonal complement of the UEs it must not reach.
                CMatrix g(m, n_ue);
                for (int i = 0; i < n_ue; ++i)
                    g.col(i) = ch.at(i, k).adjoint() * res.u.u[static_cast<std::size_t>(i)];
                for (int c = 0; c <= n_ue; ++c) {
                    CMatrix basis(m, 0);
                    for (int i = 0; i < n_ue; ++i)
                        if (i != c) {
                            basis.conservativeResize(m, basis.cols() + 1);
                            basis.col(basis.cols() - 1) = g.col(i);
                        }
                    if (basis.cols() == 0 || basis.cols() >= m)
                        continue;
                    const Eigen::HouseholderQR<CMatrix> qr(basis);
                    const CMatrix qthin = qr.householderQ() * CMatrix::Identity(m, basis.cols());
                    const CVector col = wk.col(c);
                    wk.col(c) = col - qthin * (qthin.adjoint() * col);
                }
                const double ue_pw = wk.leftCols(n_ue).squaredNorm();
                const double s_pw = wk.col(n_ue).squaredNorm();
                if (ue_pw > 0.0)
                    wk.leftCols(n_ue) *= std::sqrt(ue_share * sc.p_t / ue_pw);
                if (s_pw > 0.0)
                    wk.col(n_ue) *= std::sqrt((1.0 - ue_share) * sc.p_t / s_pw);
            }
            const double pw = wk.squaredNorm();
            wk *= std::sqrt(sc.p_t / pw);
            w.w.push_back(std::move(wk));
        }
        return w;
    };

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const bool repair = attempt > 0;
        // UE share grows from an even split towards the whole budget.
        const double base = static_cast<double>(n_ue) / (n_ue + 1);
        const double share = repair ? base + (1.0 - base) * (attempt - 1) / std::max(1, max_attempts - 1) : base;
        res.w = draw(repair, share);
        res.attempts = attempt + 1;
        if (comm_feasible(sc, ch, res.w, res.u)) {
            res.feasible = true;
            return res;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------

namespace {

struct Candidate {
    const char* name;
    PrecoderSet w;
};

} // namespace

CccpState run_algorithm1_from(const Scenario& sc, const CommChannelSet& ch, const SensingKernel& kern,
                              PrecoderSet w0, ReceiveBeamformers u0)
{
    const int n_tx = sc.cfg.n_tx;
    const int n_ue = sc.cfg.n_ue;
    const int block = sc.cfg.block_len;
    // Accepted iterates must satisfy the SINR constraints a little tighter
    // than the reporting tolerance.
    const double accept_tol = 1e-5;
    const socp::Options sopt{sc.cfg.solver_tol, sc.cfg.solver_max_iter};

    CccpState st;
    st.w = std::move(w0);
    st.u = std::move(u0);
    st.tau = RMatrix::Zero(n_ue, n_tx);
    st.mu = RMatrix::Zero(n_ue, n_tx);
    st.gamma_t_history.push_back(expected_sensing_sinr(kern, st.w, block));

    for (int it = 1; it <= sc.cfg.i_max; ++it) {
        CccpTraceEntry tr;
        tr.iteration = it;
        PrecoderSet w1 = st.w, w2 = st.w;
        RMatrix tau = st.tau, mu = st.mu;
        std::string status = "optimal";
        for (int k = 0; k < n_tx && st.ok(); ++k) {
            for (int which = 0; which < 2; ++which) {
                const ApProgram prog = which == 0 ? build_p1(sc, ch, kern, st.w, st.u, k)
                                                  : build_p2(sc, ch, kern, st.w, st.u, k);
                const socp::ConeSolution sol = socp::solve(prog.program, sopt);
                if (sol.status != socp::Status::optimal) {
                    status = socp::to_string(sol.status);
                    st.flag = sol.status == socp::Status::iteration_limit ? CccpFlag::solver_limit
                                                                           : CccpFlag::subproblem_infeasible;
                    break;
                }
                (which == 0 ? w1 : w2).w[static_cast<std::size_t>(k)] = prog.unpack(sol.x);
                if (which == 0)
                    for (int i = 0; i < n_ue; ++i) {
                        tau(i, k) = prog.slack_scale(i) * sol.x(prog.tau_index(i));
                        mu(i, k) = prog.slack_scale(i) * sol.x(prog.mu_index(i));
                    }
            }
        }
        tr.solver_status = status;
        if (!st.ok()) {
            tr.accepted = "previous";
            tr.gamma_t = st.gamma_t_history.back();
            tr.max_violation = max_comm_violation(sc, ch, st.w, st.u);
            st.trace.push_back(tr);
            break;
        }
        st.tau = tau;
        st.mu = mu;
        w1 = project_power(std::move(w1), sc.p_t);
        w2 = project_power(std::move(w2), sc.p_t);

        // Sum of the two solutions; if it breaks the SINR constraints, the
        // better feasible subproblem solution is used instead.
        std::vector<Candidate> cands;
        cands.push_back({"sum", combine_solutions(w1, w2, sc.p_t)});
        const Candidate* chosen = nullptr;
        if (comm_feasible(sc, ch, cands.front().w, st.u, accept_tol)) {
            chosen = &cands.front();
        } else {
            cands.push_back({"p1", w1});
            cands.push_back({"p2", w2});
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 1; c < cands.size(); ++c) {
                if (!comm_feasible(sc, ch, cands[c].w, st.u, accept_tol))
                    continue;
                const double g = expected_sensing_sinr(kern, cands[c].w, block);
                if (g > best) {
                    best = g;
                    chosen = &cands[c];
                }
            }
        }

        const PrecoderSet w_prev = st.w;
        if (chosen) {
            st.w = chosen->w;
            tr.accepted = chosen->name;
        } else {
            tr.accepted = "previous";
        }

        // Receive filters: MMSE direction, unit norm, kept only if the UE's
        // constraints still hold with the new filter.
        double du = 0.0;
        for (int i = 0; i < n_ue; ++i) {
            CVector un = mmse_update(ch, st.w, sc.sigma_i2, i);
            const double nn = un.norm();
            if (!(nn > 0.0) || !std::isfinite(nn))
                continue;
            un /= nn;
            bool ok = true;
            for (int k = 0; k < n_tx && ok; ++k)
                ok = comm_sinr(ch, st.w, un, i, k, sc.sigma_i2) >= sc.gamma * (1.0 - accept_tol);
            if (!ok)
                continue;
            du = std::max(du, relative_change(un, st.u.u[static_cast<std::size_t>(i)]));
            st.u.u[static_cast<std::size_t>(i)] = std::move(un);
        }

        st.p = it;
        st.gamma_t_history.push_back(expected_sensing_sinr(kern, st.w, block));
        tr.gamma_t = st.gamma_t_history.back();
        tr.max_violation = max_comm_violation(sc, ch, st.w, st.u);
        tr.rel_change_w = relative_change(st.w, w_prev);
        tr.rel_change_u = du;
        st.trace.push_back(tr);
        if (tr.rel_change_w <= sc.cfg.eps_cccp && du <= sc.cfg.eps_cccp)
            break;
    }
    return st;
}

CccpState run_algorithm1(const Scenario& sc, const CommChannelSet& ch, const SensingGeometry& geom, Rng& rng)
{
    const SensingKernel kern = make_sensing_kernel(sc, geom);
    InitResult init = init_precoders(sc, ch, rng);
    if (!init.feasible) {
        CccpState st;
        st.w = std::move(init.w);
        st.u = std::move(init.u);
        st.tau = RMatrix::Zero(sc.cfg.n_ue, sc.cfg.n_tx);
        st.mu = RMatrix::Zero(sc.cfg.n_ue, sc.cfg.n_tx);
        st.gamma_t_history.push_back(expected_sensing_sinr(kern, st.w, sc.cfg.block_len));
        st.flag = CccpFlag::infeasible_init;
        return st;
    }
    return run_algorithm1_from(sc, ch, kern, std::move(init.w), std::move(init.u));
}

void write_trace(const CccpState& st, std::ostream& os)
{
    os << "# iteration gamma_t max_violation solver_status accepted rel_change_w rel_change_u\n";
    os << 0 << ' ' << st.gamma_t_history.front() << " 0 init init 0 0\n";
    for (const auto& t : st.trace)
        os << t.iteration << ' ' << t.gamma_t << ' ' << t.max_violation << ' ' << t.solver_status << ' '
           << t.accepted << ' ' << t.rel_change_w << ' ' << t.rel_change_u << '\n';
    if (!st.ok())
        os << "# flag " << to_string(st.flag) << '\n';
}

} // namespace isac

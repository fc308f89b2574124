#include "isac/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace isac {

ChannelEstimate ls_channel_estimate(const CMatrix& y_pilot, const CMatrix& x_pilot, double sigma_err2)
{
    if (y_pilot.cols() != x_pilot.cols())
        throw std::invalid_argument("ls_channel_estimate: pilot/observation length mismatch");
    if (x_pilot.cols() < x_pilot.rows())
        throw std::invalid_argument("ls_channel_estimate: pilot block shorter than the number of antennas");
    if (!(sigma_err2 > 0.0))
        throw std::invalid_argument("ls_channel_estimate: error variance must be positive");
    const CMatrix gram = x_pilot * x_pilot.adjoint();
    const Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12)
        throw std::invalid_argument("ls_channel_estimate: singular pilot Gram matrix");
    ChannelEstimate est;
    // (x x^H)^-1 is Hermitian: H_hat^H = (x x^H)^-1 x y^H.
    est.h_hat = llt.solve(x_pilot * y_pilot.adjoint()).adjoint();
    est.sigma_err2 = sigma_err2;
    return est;
}

CMatrix orthogonal_pilots(int m_ap, int n, double power)
{
    if (m_ap <= 0 || n < m_ap)
        throw std::invalid_argument("orthogonal_pilots: need n >= m_ap > 0");
    CMatrix x(m_ap, n);
    const double amp = std::sqrt(power);
    for (int t = 0; t < m_ap; ++t)
        for (int c = 0; c < n; ++c)
            x(t, c) = std::polar(amp, -2.0 * kPi * static_cast<double>(t) * c / n);
    return x;
}

InterferenceObservation interference_observation(const CommChannelSet& ch, const PrecoderSet& wset,
                                                 const SymbolBlock& s, int adversary, int k, double sigma_i2,
                                                 Rng& noise_rng, const ChannelEstimate* own_estimate)
{
    const int n_ue = ch.n_ue();
    if (adversary < 0 || adversary >= n_ue || k < 0 || k >= ch.n_tx() || wset.n_tx() != ch.n_tx())
        throw std::out_of_range("interference_observation: index out of range");
    const CMatrix& w = wset.w[static_cast<std::size_t>(k)];
    const CMatrix& h = ch.at(adversary, k);
    if (w.cols() != s.streams() || w.cols() != n_ue + 1 || h.cols() != w.rows())
        throw std::invalid_argument("interference_observation: dimension mismatch");
    if (own_estimate && (own_estimate->h_hat.rows() != h.rows() || own_estimate->h_hat.cols() != h.cols()))
        throw std::invalid_argument("interference_observation: estimate dimension mismatch");

    InterferenceObservation obs;
    obs.x_true = CMatrix::Zero(w.rows(), s.length());
    for (int l = 0; l <= n_ue; ++l) {
        if (l == adversary)
            continue;
        obs.x_true.noalias() += w.col(l) * s.s.row(l);
    }
    obs.y = h * obs.x_true;
    if (own_estimate) {
        const CMatrix own = w.col(adversary) * s.s.row(adversary);
        obs.y.noalias() += (h - own_estimate->h_hat) * own;
    }
    obs.y += complex_normal(noise_rng, obs.y.rows(), obs.y.cols(), sigma_i2);
    return obs;
}

CMatrix zf_init(const ChannelEstimate& est, const CMatrix& y)
{
    const CMatrix& h = est.h_hat;
    if (y.rows() != h.rows())
        throw std::invalid_argument("zf_init: dimension mismatch");
    const bool tall = h.rows() >= h.cols();
    const CMatrix gram = tall ? CMatrix(h.adjoint() * h) : CMatrix(h * h.adjoint());
    const Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() == Eigen::Success && llt.rcond() >= 1e-13)
        return tall ? CMatrix(llt.solve(h.adjoint() * y)) : CMatrix(h.adjoint() * llt.solve(y));

    // Ridge solution V diag(s / (s^2 + load)) U^H y, through the SVD so the
    // result stays in the row space of H.
    const double load = 1e-9 * std::max(gram.trace().real() / gram.rows(), std::numeric_limits<double>::min());
    const Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector& sv = svd.singularValues();
    // Singular values at rounding level are structural zeros.
    const double tiny = static_cast<double>(std::max(h.rows(), h.cols())) * std::numeric_limits<double>::epsilon() *
                        (sv.size() ? sv(0) : 0.0);
    const RVector gain = (sv.array() > tiny).select(sv.array() / (sv.array().square() + load), 0.0);
    return svd.matrixV() * (gain.cast<cplx>().asDiagonal() * (svd.matrixU().adjoint() * y));
}

// ---------------------------------------------------------------------------

namespace {

// Omega = U diag(om) U^H. Everything downstream works in this basis: forming
// Omega explicitly mixes eigenvalues that differ by many orders of magnitude
// and rounding from the large ones swamps the small ones.
void set_basis(EmState& st, const CMatrix& u, const RVector& om)
{
    if (!(om.minCoeff() > 0.0) || !om.allFinite())
        throw std::runtime_error("EM: row covariance is not positive definite");
    const auto m = static_cast<double>(u.rows());
    st.omega_basis = u;
    st.omega_eigs = om;
    st.omega_h = u * om.cast<cplx>().asDiagonal() * u.adjoint();
    st.omega_h = 0.5 * (st.omega_h + st.omega_h.adjoint()).eval();
    // Any square root S with S^H S = M_AP Omega; QR turns it triangular.
    const CMatrix root = (om * m).cwiseSqrt().cast<cplx>().asDiagonal() * u.adjoint();
    const Eigen::HouseholderQR<CMatrix> qr(root);
    st.v_h = qr.matrixQR().triangularView<Eigen::Upper>();
}

// sum_i w_i ||(U^H X)_i||^2
double weighted_energy(const EmState& st, const CMatrix& x, double scale)
{
    const CMatrix z = st.omega_basis.adjoint() * x;
    return scale * (st.omega_eigs.asDiagonal() * z.rowwise().squaredNorm()).sum();
}

} // namespace

void set_row_covariance(EmState& st, const CMatrix& omega)
{
    const Eigen::SelfAdjointEigenSolver<CMatrix> eig(omega);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("EM: eigendecomposition failed");
    set_basis(st, eig.eigenvectors(), eig.eigenvalues());
    st.range_dim = static_cast<int>(omega.rows());
}

void update_row_covariance(EmState& st, double sigma_err2, double sigma_a2)
{
    const Eigen::Index m = st.x_hat.rows();
    const Eigen::SelfAdjointEigenSolver<CMatrix> eig(st.x_hat * st.x_hat.adjoint());
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("EM: eigendecomposition failed");
    // Eigenvalues at rounding level are exact zeros of X X^H; with a small
    // noise variance they would otherwise read as strong data directions.
    const RVector& raw = eig.eigenvalues();
    const double floor = static_cast<double>(m) * std::numeric_limits<double>::epsilon() * raw.cwiseAbs().maxCoeff();
    RVector om(m);
    int kept = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double lam = raw(i) > floor ? raw(i) : 0.0;
        kept += lam > 0.0;
        om(i) = 1.0 / (1.0 / sigma_err2 + lam * st.e_u / sigma_a2);
    }
    set_basis(st, eig.eigenvectors(), om);
    st.range_dim = kept;
}

EmState em_init(const ChannelEstimate& est, const CMatrix& y, const EmOptions& opt)
{
    if (!(opt.sigma_a2 > 0.0) || !(opt.dof > 0.0))
        throw std::invalid_argument("EM: noise variance and degrees of freedom must be positive");
    if (!(est.sigma_err2 > 0.0))
        throw std::invalid_argument("EM: channel error variance must be positive");
    EmState st;
    st.v = opt.dof;
    st.e_h = est.h_hat;
    st.x_hat = zf_init(est, y);
    st.e_u = 1.0;
    update_row_covariance(st, est.sigma_err2, opt.sigma_a2);
    return st;
}

EmState em_e_step(EmState st, const ChannelEstimate& est, const CMatrix& y, const EmOptions& opt)
{
    const double n_bar = static_cast<double>(y.cols());
    const auto m = static_cast<double>(st.x_hat.rows());
    const double resid = (y - st.e_h * st.x_hat).squaredNorm();
    st.c_stat = (resid + weighted_energy(st, st.x_hat, m)) / opt.sigma_a2;
    if (!std::isfinite(st.c_stat))
        throw std::runtime_error("EM: non-finite residual statistic");
    st.c_stat = std::max(st.c_stat, 0.0);
    st.e_u = (st.v + 2.0 * n_bar) / (st.v + st.c_stat);
    update_row_covariance(st, est.sigma_err2, opt.sigma_a2);

    // E[H]^H = Omega (H_hat^H / sigma_err2 + X Y^H E[u] / sigma_a2), in the
    // eigenbasis; the data term has no support on the truncated directions.
    const CMatrix& u = st.omega_basis;
    CMatrix zx = u.adjoint() * st.x_hat;
    zx.topRows(zx.rows() - st.range_dim).setZero();
    CMatrix t = u.adjoint() * est.h_hat.adjoint() / est.sigma_err2 + zx * y.adjoint() * (st.e_u / opt.sigma_a2);
    t = st.omega_eigs.cast<cplx>().asDiagonal() * t;
    st.e_h = (u * t).adjoint();
    return st;
}

CMatrix em_m_step(const EmState& st, const CMatrix& y)
{
    const Eigen::Index mu = st.e_h.rows();
    const Eigen::Index m = st.e_h.cols();
    if (y.rows() != mu || st.omega_basis.rows() != m || st.omega_eigs.size() != m)
        throw std::invalid_argument("em_m_step: dimension mismatch");
    // ||V_H X|| = ||D U^H X|| with D = sqrt(M_AP diag(om)); solve for Z = U^H X
    // by stacked least squares [E[H] U; D] Z = [Y; 0].
    CMatrix a(mu + m, m);
    a.topRows(mu) = st.e_h * st.omega_basis;
    a.bottomRows(m) = (st.omega_eigs * static_cast<double>(m)).cwiseSqrt().cast<cplx>().asDiagonal();
    CMatrix rhs = CMatrix::Zero(mu + m, y.cols());
    rhs.topRows(mu) = y;
    const Eigen::ColPivHouseholderQR<CMatrix> qr(a);
    return st.omega_basis * qr.solve(rhs);
}

double em_objective(const EmState& st, const CMatrix& y, const CMatrix& x)
{
    return (y - st.e_h * x).squaredNorm() + weighted_energy(st, x, static_cast<double>(x.rows()));
}

EmState run_em(const ChannelEstimate& est, const CMatrix& y, const EmOptions& opt)
{
    if (opt.max_iter < 1)
        throw std::invalid_argument("EM: iteration cap must be positive");
    EmState st = em_init(est, y, opt);
    for (int a = 1; a <= opt.max_iter; ++a) {
        st = em_e_step(std::move(st), est, y, opt);
        const CMatrix x_new = em_m_step(st, y);
        st.objective_before.push_back(em_objective(st, y, st.x_hat));
        st.objective_after.push_back(em_objective(st, y, x_new));
        const double xn = x_new.norm();
        const double step = (x_new - st.x_hat).norm();
        st.x_hat = x_new;
        st.iter = a;
        if (step <= opt.cov_tol * std::max(xn, std::numeric_limits<double>::min())) {
            st.converged = true;
            return st;
        }
    }
    st.hit_cap = true;
    return st;
}

// ---------------------------------------------------------------------------

std::vector<double> angle_grid(int z)
{
    if (z < 2)
        throw std::invalid_argument("angle_grid: need at least two angles");
    std::vector<double> g(static_cast<std::size_t>(z));
    for (int i = 0; i < z; ++i)
        g[static_cast<std::size_t>(i)] = -0.5 * kPi + kPi * (i + 1.0) / (z + 1.0);
    return g;
}

int BeampatternEstimate::peak_index() const
{
    if (b.size() == 0)
        throw std::logic_error("empty beampattern");
    Eigen::Index idx = 0;
    b.maxCoeff(&idx);
    return static_cast<int>(idx);
}

BeampatternEstimate estimate_beampattern(const CMatrix& x_hat, const std::vector<double>& theta_grid, int m_ap)
{
    if (x_hat.rows() != m_ap || x_hat.cols() == 0)
        throw std::invalid_argument("estimate_beampattern: dimension mismatch");
    BeampatternEstimate bp;
    bp.theta_grid = theta_grid;
    bp.b.resize(static_cast<Eigen::Index>(theta_grid.size()));
    const double inv_n = 1.0 / static_cast<double>(x_hat.cols());
    for (std::size_t z = 0; z < theta_grid.size(); ++z) {
        const CVector a = steering_vector(theta_grid[z], m_ap);
        // a^T R a^* = (1/N) sum_n |a^T x[n]|^2
        bp.b(static_cast<Eigen::Index>(z)) = (a.transpose() * x_hat).squaredNorm() * inv_n;
    }
    return bp;
}

std::vector<int> traverse_ray(const SearchGrid& grid, Point2 origin, double angle)
{
    const double h = grid.half_extent();
    const double lo[2] = {grid.origin.x - h, grid.origin.y - h};
    const double hi[2] = {grid.origin.x + h, grid.origin.y + h};
    const double o[2] = {origin.x, origin.y};
    const double d[2] = {std::cos(angle), std::sin(angle)};

    // Slab clipping of t >= 0 against the square.
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int ax = 0; ax < 2; ++ax) {
        if (std::abs(d[ax]) < 1e-15) {
            if (o[ax] < lo[ax] || o[ax] > hi[ax])
                return {};
            continue;
        }
        double ta = (lo[ax] - o[ax]) / d[ax];
        double tb = (hi[ax] - o[ax]) / d[ax];
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (!(t1 > t0))
        return {};

    // Parameters where the ray crosses grid lines inside the clipped span.
    std::vector<double> ts{t0, t1};
    const int n = grid.cells_per_side();
    for (int ax = 0; ax < 2; ++ax) {
        if (std::abs(d[ax]) < 1e-15)
            continue;
        for (int i = 1; i < n; ++i) {
            const double t = (lo[ax] + i * grid.cell_size - o[ax]) / d[ax];
            if (t > t0 && t < t1)
                ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());

    std::vector<int> cells;
    const double eps = 1e-9 * (t1 - t0);
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        if (ts[i + 1] - ts[i] <= eps)
            continue;
        const double tm = 0.5 * (ts[i] + ts[i + 1]);
        Point2 p{o[0] + tm * d[0], o[1] + tm * d[1]};
        // Keep midpoints of boundary-hugging segments inside the square.
        p.x = std::clamp(p.x, lo[0], hi[0]);
        p.y = std::clamp(p.y, lo[1], hi[1]);
        const auto c = cell_of(grid, p);
        if (c && (cells.empty() || cells.back() != *c))
            cells.push_back(*c);
    }
    return cells;
}

LocalizationResult vote_and_localize(const std::vector<DirectionLine>& lines, const SearchGrid& grid,
                                     Point2 target, Rng& rng)
{
    if (lines.empty())
        throw std::invalid_argument("vote_and_localize: no direction lines");
    LocalizationResult res;
    res.votes.assign(static_cast<std::size_t>(grid.cell_count()), 0);
    for (const auto& line : lines) {
        res.line_angles.push_back(line.angle);
        std::vector<int> cells = traverse_ray(grid, line.origin, line.angle);
        // A ray can re-enter a cell only through a corner touch; count each cell once.
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        res.cells_per_line.push_back(static_cast<int>(cells.size()));
        for (int c : cells)
            ++res.votes[static_cast<std::size_t>(c)];
    }
    const int best = *std::max_element(res.votes.begin(), res.votes.end());
    std::vector<int> tied;
    for (std::size_t c = 0; c < res.votes.size(); ++c)
        if (res.votes[c] == best)
            tied.push_back(static_cast<int>(c));
    res.tied_cells = static_cast<int>(tied.size());
    std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
    res.chosen_cell = tied[pick(rng)];
    const auto truth = cell_of(grid, target);
    res.correct = truth && *truth == res.chosen_cell;
    return res;
}

double detection_probability(const std::vector<bool>& correct)
{
    if (correct.empty())
        throw std::invalid_argument("detection_probability: no results");
    const auto hits = std::count(correct.begin(), correct.end(), true);
    return static_cast<double>(hits) / static_cast<double>(correct.size());
}

double detection_probability(const std::vector<LocalizationResult>& results)
{
    std::vector<bool> c;
    c.reserve(results.size());
    for (const auto& r : results)
        c.push_back(r.correct);
    return detection_probability(c);
}

// ---------------------------------------------------------------------------

AttackResult run_attack(const Scenario& sc, const SensingGeometry& geom, const CommChannelSet& ch,
                        const PrecoderSet& w, const SymbolBlock& s, std::uint64_t realization_seed)
{
    const int m = sc.cfg.m_ap;
    const int n = sc.cfg.block_len;
    const int a = sc.layout.adversary_index;
    const int known = sc.known_ap_count();
    const std::vector<double> grid = angle_grid(sc.cfg.angle_grid_size);
    Rng pilot_rng = make_stream(realization_seed, Stream::pilots);
    Rng noise_rng = make_stream(realization_seed, Stream::adversary_noise);
    Rng vote_rng = make_stream(realization_seed, Stream::votes);

    EmOptions opt;
    opt.dof = sc.cfg.em_dof;
    opt.cov_tol = sc.cfg.em_cov_tol;
    opt.max_iter = sc.cfg.em_max_iter;
    opt.sigma_a2 = sc.sigma_i2;

    // Pilot phase: each AP sends orthogonal pilots in its own resource, at
    // the per-antenna share of its power budget.
    const CMatrix pilots = orthogonal_pilots(m, n, sc.p_t / m);

    AttackResult out;
    std::vector<DirectionLine> lines;
    for (int k = 0; k < known; ++k) {
        const CMatrix& h = ch.at(a, k);
        const CMatrix y_pilot =
            h * pilots + complex_normal(pilot_rng, h.rows(), pilots.cols(), sc.sigma_i2);
        const ChannelEstimate est = ls_channel_estimate(y_pilot, pilots, sc.sigma_err2);
        const InterferenceObservation obs = interference_observation(ch, w, s, a, k, sc.sigma_i2, noise_rng, &est);
        const CMatrix x_zf = zf_init(est, obs.y);
        const EmState em = run_em(est, obs.y, opt);

        ApAttack ap;
        ap.ap = k;
        ap.em_iterations = em.iter;
        ap.em_capped = em.hit_cap;
        ap.err_em = (em.x_hat - obs.x_true).squaredNorm() / n;
        ap.err_zf = (x_zf - obs.x_true).squaredNorm() / n;
        const BeampatternEstimate bp = estimate_beampattern(em.x_hat, grid, m);
        ap.local_peak = bp.peak_angle();
        ap.global_angle = wrap_angle(geom.boresight_tx[static_cast<std::size_t>(k)] + ap.local_peak);
        ap.true_local = geom.phi_tx[static_cast<std::size_t>(k)];
        out.em_capped = out.em_capped || em.hit_cap;
        out.aps.push_back(ap);
        lines.push_back({sc.layout.tx_ap_pos[static_cast<std::size_t>(k)], ap.global_angle});
    }
    out.loc = vote_and_localize(lines, sc.grid, sc.layout.target_pos, vote_rng);
    return out;
}

LocalizationResult relocalize(const Scenario& sc, const AttackResult& attack, int known_aps, const SearchGrid& grid,
                              Rng& rng)
{
    if (known_aps < 1 || known_aps > static_cast<int>(attack.aps.size()))
        throw std::invalid_argument("relocalize: known AP count out of range");
    std::vector<DirectionLine> lines;
    for (int k = 0; k < known_aps; ++k) {
        const ApAttack& ap = attack.aps[static_cast<std::size_t>(k)];
        lines.push_back({sc.layout.tx_ap_pos[static_cast<std::size_t>(ap.ap)], ap.global_angle});
    }
    return vote_and_localize(lines, grid, sc.layout.target_pos, rng);
}

} // namespace isac

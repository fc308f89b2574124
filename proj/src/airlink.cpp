#include "isac/airlink.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace isac {

double PrecoderSet::frobenius_norm() const
{
    double acc = 0.0;
    for (const auto& m : w)
        acc += m.squaredNorm();
    return std::sqrt(acc);
}

namespace {

PrecoderSet combine(const PrecoderSet& a, const PrecoderSet& b, double sign)
{
    if (a.w.size() != b.w.size())
        throw std::invalid_argument("precoder sets differ in AP count");
    PrecoderSet out = a;
    for (std::size_t k = 0; k < a.w.size(); ++k) {
        if (a.w[k].rows() != b.w[k].rows() || a.w[k].cols() != b.w[k].cols())
            throw std::invalid_argument("precoder sets differ in shape");
        out.w[k] += sign * b.w[k];
    }
    return out;
}

} // namespace

PrecoderSet operator+(const PrecoderSet& a, const PrecoderSet& b) { return combine(a, b, 1.0); }
PrecoderSet operator-(const PrecoderSet& a, const PrecoderSet& b) { return combine(a, b, -1.0); }

SymbolBlock draw_symbols(const Scenario& sc, Rng& rng)
{
    const int n_ue = sc.cfg.n_ue;
    const int n = sc.cfg.block_len;
    SymbolBlock blk;
    blk.s.resize(n_ue + 1, n);
    std::bernoulli_distribution bit(0.5);
    const double h = 1.0 / std::sqrt(2.0);
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n_ue; ++i)
            blk.s(i, c) = cplx(bit(rng) ? h : -h, bit(rng) ? h : -h);
        blk.s(n_ue, c) = complex_normal(rng, 1.0);
    }
    return blk;
}

CMatrix transmit_signal(const PrecoderSet& wset, const SymbolBlock& s, int k)
{
    if (k < 0 || k >= wset.n_tx())
        throw std::out_of_range("transmit_signal: AP index out of range");
    const CMatrix& w = wset.w[static_cast<std::size_t>(k)];
    if (w.cols() != s.s.rows())
        throw std::invalid_argument("transmit_signal: precoder/symbol dimension mismatch");
    return w * s.s;
}

Reception ue_received(const CommChannelSet& ch, const PrecoderSet& wset, const SymbolBlock& s, int i,
                      double sigma_i2, Rng& noise_rng)
{
    if (ch.n_tx() != wset.n_tx())
        throw std::invalid_argument("ue_received: channel/precoder AP count mismatch");
    const CMatrix& h0 = ch.at(i, 0);
    Reception r;
    r.noiseless = CMatrix::Zero(h0.rows(), s.length());
    for (int k = 0; k < ch.n_tx(); ++k) {
        const CMatrix& h = ch.at(i, k);
        if (h.cols() != wset.w[k].rows())
            throw std::invalid_argument("ue_received: channel/precoder dimension mismatch");
        r.noiseless.noalias() += h * transmit_signal(wset, s, k);
    }
    r.noisy = r.noiseless + complex_normal(noise_rng, r.noiseless.rows(), r.noiseless.cols(), sigma_i2);
    return r;
}

double comm_sinr(const CMatrix& h_ik, const CMatrix& w_k, const CVector& u_i, int i, double sigma_i2)
{
    const double un = u_i.squaredNorm();
    if (!(un > 0.0))
        throw std::invalid_argument("comm_sinr: zero receive beamformer");
    if (h_ik.rows() != u_i.size() || h_ik.cols() != w_k.rows())
        throw std::invalid_argument("comm_sinr: dimension mismatch");
    // Row vector g = u^H H; entry c is the gain seen by precoder column c.
    const Eigen::RowVectorXcd gw = u_i.adjoint() * h_ik * w_k;
    const double desired = std::norm(gw(i));
    double leak = 0.0; // other UEs plus sensing column
    for (Eigen::Index c = 0; c < gw.size(); ++c)
        if (c != i)
            leak += std::norm(gw(c));
    return desired / (leak + sigma_i2 * un);
}

double comm_sinr(const CommChannelSet& ch, const PrecoderSet& wset, const CVector& u_i, int i, int k,
                 double sigma_i2)
{
    return comm_sinr(ch.at(i, k), wset.w[static_cast<std::size_t>(k)], u_i, i, sigma_i2);
}

double min_comm_sinr(const CommChannelSet& ch, const PrecoderSet& wset, const ReceiveBeamformers& u,
                     double sigma_i2)
{
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < ch.n_ue(); ++i)
        for (int k = 0; k < ch.n_tx(); ++k)
            lo = std::min(lo, comm_sinr(ch, wset, u.u[static_cast<std::size_t>(i)], i, k, sigma_i2));
    return lo;
}

Reception rx_ap_received(const Scenario& sc, const SensingGeometry& geom, const RcsDraw& rcs,
                         const std::vector<CMatrix>& xset, int r, Rng& noise_rng)
{
    const int m = sc.cfg.m_ap;
    if (static_cast<int>(xset.size()) != sc.cfg.n_tx)
        throw std::invalid_argument("rx_ap_received: expected one transmit signal per AP");
    const CVector a_r = steering_vector(geom.phi_rx[static_cast<std::size_t>(r)], m);
    const Eigen::Index n = xset.front().cols();
    Eigen::RowVectorXcd echo = Eigen::RowVectorXcd::Zero(n);
    for (int k = 0; k < sc.cfg.n_tx; ++k) {
        const CMatrix& x = xset[static_cast<std::size_t>(k)];
        if (x.rows() != m || x.cols() != n)
            throw std::invalid_argument("rx_ap_received: transmit signal dimension mismatch");
        const CVector a_k = steering_vector(geom.phi_tx[static_cast<std::size_t>(k)], m);
        echo += rcs.alpha(r, k) * std::sqrt(geom.beta(r, k)) * (a_k.transpose() * x);
    }
    Reception out;
    out.noiseless = a_r * echo;
    out.noisy = out.noiseless + complex_normal(noise_rng, m, n, sc.sigma_n2);
    return out;
}

SensingKernel make_sensing_kernel(const Scenario& sc, const SensingGeometry& geom)
{
    const int n_tx = sc.cfg.n_tx;
    const int m = sc.cfg.m_ap;
    SensingKernel kern;
    kern.coupling = RMatrix::Zero(n_tx, n_tx);
    for (int r = 0; r < sc.cfg.n_rx; ++r) {
        const CVector a_r = steering_vector(geom.phi_rx[static_cast<std::size_t>(r)], m);
        const double gain = a_r.squaredNorm(); // a^H(phi_r) a(phi_r)
        for (int k = 0; k < n_tx; ++k)
            for (int j = 0; j < n_tx; ++j)
                kern.coupling(k, j) +=
                    std::sqrt(geom.beta(r, k) * geom.beta(r, j)) * rcs_covariance(sc, r, j, k) * gain;
    }
    kern.zeta = 1.0 / ((sc.cfg.block_len - 1.0) * m * sc.cfg.n_rx * sc.sigma_n2);
    for (int k = 0; k < n_tx; ++k)
        kern.a_tx.push_back(steering_vector(geom.phi_tx[static_cast<std::size_t>(k)], m));
    return kern;
}

namespace {

// Rows p_k = a^T(phi_k) W_k, stacked into an N_Tx x (N_Ue+1) matrix.
CMatrix beam_projections(const SensingKernel& kern, const PrecoderSet& wset)
{
    const int n_tx = wset.n_tx();
    CMatrix p(n_tx, wset.w.front().cols());
    for (int k = 0; k < n_tx; ++k)
        p.row(k) = kern.a_tx[static_cast<std::size_t>(k)].transpose() * wset.w[static_cast<std::size_t>(k)];
    return p;
}

double real_checked(cplx v)
{
    if (std::abs(v.imag()) > 1e-9 * std::max(std::abs(v.real()), 1e-300) && std::abs(v.imag()) > 1e-300)
        throw std::logic_error("sensing SINR accumulated a non-negligible imaginary part");
    return v.real();
}

} // namespace

double sensing_sinr(const SensingKernel& kern, const PrecoderSet& wset, const SymbolBlock& s)
{
    const CMatrix p = beam_projections(kern, wset);
    if (p.cols() != s.s.rows())
        throw std::invalid_argument("sensing_sinr: precoder/symbol dimension mismatch");
    // q(k, n) = a_k^T W_k s[n]; the quadratic form is sum_n q_n^H C q_n.
    const CMatrix q = p * s.s;
    const cplx acc = (q.adjoint() * kern.coupling.cast<cplx>() * q).trace();
    return kern.zeta * real_checked(acc);
}

double sensing_sinr(const Scenario& sc, const SensingGeometry& geom, const PrecoderSet& wset,
                    const SymbolBlock& s)
{
    return sensing_sinr(make_sensing_kernel(sc, geom), wset, s);
}

double expected_sensing_sinr(const SensingKernel& kern, const PrecoderSet& wset, int block_len)
{
    const CMatrix p = beam_projections(kern, wset);
    // tr(sum_kj C_kj W_k^H A_kj W_j) = sum_kj C_kj p_j p_k^H
    const cplx acc = (p.conjugate() * p.transpose()).cwiseProduct(kern.coupling.cast<cplx>()).sum();
    return kern.zeta * block_len * real_checked(acc);
}

} // namespace isac

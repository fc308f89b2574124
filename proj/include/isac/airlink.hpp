#pragma once

// Symbols, transmit/receive signal synthesis and the two SINR metrics.

#include <vector>

#include "isac/channel.hpp"

namespace isac {

struct SymbolBlock {
    // (N_Ue + 1) x N. Rows 0..N_Ue-1 carry QPSK data, the last row is the
    // Gaussian sensing waveform.
    CMatrix s;

    int streams() const { return static_cast<int>(s.rows()); }
    int length() const { return static_cast<int>(s.cols()); }
};

struct PrecoderSet {
    // w[k]: M_AP x (N_Ue + 1); column i serves UE i, the last column is w_t.
    std::vector<CMatrix> w;

    int n_tx() const { return static_cast<int>(w.size()); }
    double power(int k) const { return w[static_cast<std::size_t>(k)].squaredNorm(); }
    double frobenius_norm() const;
};

PrecoderSet operator+(const PrecoderSet& a, const PrecoderSet& b);
PrecoderSet operator-(const PrecoderSet& a, const PrecoderSet& b);

struct ReceiveBeamformers {
    std::vector<CVector> u;
};

struct Reception {
    CMatrix noisy;
    CMatrix noiseless;
};

SymbolBlock draw_symbols(const Scenario& sc, Rng& rng);

/// x_k[n] = W_k s[n] for all n.
CMatrix transmit_signal(const PrecoderSet& wset, const SymbolBlock& s, int k);

/// sum_k H_{i,k} W_k s[n] + n_i[n], noise CN(0, sigma_i2 I).
Reception ue_received(const CommChannelSet& ch, const PrecoderSet& wset, const SymbolBlock& s, int i,
                      double sigma_i2, Rng& noise_rng);

/// Per-AP communication SINR of UE i.
double comm_sinr(const CMatrix& h_ik, const CMatrix& w_k, const CVector& u_i, int i, double sigma_i2);
double comm_sinr(const CommChannelSet& ch, const PrecoderSet& wset, const CVector& u_i, int i, int k,
                 double sigma_i2);

/// Smallest gamma_{i,k} over all UEs and transmit APs.
double min_comm_sinr(const CommChannelSet& ch, const PrecoderSet& wset, const ReceiveBeamformers& u,
                     double sigma_i2);

/// Echo at receive AP r: sum_k alpha_{r,k} sqrt(beta_{r,k}) a(phi_r) a^T(phi_k) x_k + noise.
Reception rx_ap_received(const Scenario& sc, const SensingGeometry& geom, const RcsDraw& rcs,
                         const std::vector<CMatrix>& xset, int r, Rng& noise_rng);

/// Coupling of transmit APs in the sensing SINR:
/// kernel(k, j) = sum_r sqrt(beta_rk beta_rj) a^H(phi_r) cov(alpha_rj, alpha_rk) a(phi_r),
/// scale = 1 / ((N - 1) M_AP N_Rx sigma_n^2).
struct SensingKernel {
    RMatrix coupling;
    double zeta = 0.0;
    std::vector<CVector> a_tx; // a(phi_k) per transmit AP
};

SensingKernel make_sensing_kernel(const Scenario& sc, const SensingGeometry& geom);

/// Sensing SINR on realized symbols (sum over the whole block).
double sensing_sinr(const SensingKernel& kern, const PrecoderSet& wset, const SymbolBlock& s);
double sensing_sinr(const Scenario& sc, const SensingGeometry& geom, const PrecoderSet& wset,
                    const SymbolBlock& s);

/// Same quantity with sum_n s^H M s replaced by its expectation N tr(M).
double expected_sensing_sinr(const SensingKernel& kern, const PrecoderSet& wset, int block_len);

} // namespace isac

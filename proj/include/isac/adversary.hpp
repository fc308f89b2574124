#pragma once

// The malicious UE: per-AP channel estimation from pilots, recovery of the
// interference signal (zero-forcing start, Student-t EM refinement),
// beampattern replicas, direction lines and grid voting.

#include <optional>
#include <string>
#include <vector>

#include "isac/airlink.hpp"

namespace isac {

struct ChannelEstimate {
    CMatrix h_hat; // M_Ue x M_AP
    double sigma_err2 = 0.0;
};

/// H_hat = y x^H (x x^H)^-1. Throws std::invalid_argument when the pilot
/// block is shorter than M_AP or its Gram matrix is singular.
ChannelEstimate ls_channel_estimate(const CMatrix& y_pilot, const CMatrix& x_pilot, double sigma_err2);

/// Orthogonal pilot block (M_AP x N, rows are DFT sequences) with per-antenna
/// power `power`: x x^H = N * power * I.
CMatrix orthogonal_pilots(int m_ap, int n, double power);

struct InterferenceObservation {
    CMatrix y;      // M_Ue x N, observation after removing the adversary's own stream
    CMatrix x_true; // M_AP x N, interference-plus-sensing transmit signal (evaluation only)
};

/// Interference seen by UE `adversary` from AP k. The adversary subtracts its
/// own stream with its channel estimate when one is given; the residual
/// (H - H_hat) w_a s_a stays in the observation.
InterferenceObservation interference_observation(const CommChannelSet& ch, const PrecoderSet& wset,
                                                 const SymbolBlock& s, int adversary, int k, double sigma_i2,
                                                 Rng& noise_rng, const ChannelEstimate* own_estimate = nullptr);

/// Minimum-norm least-squares recovery, column by column. Falls back to a
/// 1e-9 relative diagonal loading when the Gram matrix is singular.
CMatrix zf_init(const ChannelEstimate& est, const CMatrix& y);

struct EmOptions {
    double dof = 3.0;
    double cov_tol = 1e-5; // relative update norm ||dX|| / ||X||
    int max_iter = 200;
    double sigma_a2 = 1.0; // adversary receiver noise
};

struct EmState {
    CMatrix e_h;     // posterior mean of H, M_Ue x M_AP
    CMatrix omega_h; // posterior row covariance, M_AP x M_AP
    CMatrix v_h;     // upper-triangular factor, v_h^H v_h = M_AP omega_h
    // omega_h = omega_basis diag(omega_eigs) omega_basis^H; the trailing
    // range_dim basis vectors span the numerical range of X X^H.
    CMatrix omega_basis;
    RVector omega_eigs;
    int range_dim = 0;
    double e_u = 1.0;
    CMatrix x_hat; // M_AP x N (one column per sample)
    double v = 3.0;
    double c_stat = 0.0;
    int iter = 0;
    bool converged = false;
    bool hit_cap = false;
    // M-step objective before and after each update (same E[H], V_H).
    std::vector<double> objective_before;
    std::vector<double> objective_after;
};

/// Omega = (I / sigma_err2 + X X^H E[u] / sigma_a2)^-1 and its factor, from
/// an eigendecomposition of X X^H (stays positive definite when X X^H is
/// numerically rank deficient).
void update_row_covariance(EmState& st, double sigma_err2, double sigma_a2);

/// Installs a given Hermitian positive definite row covariance.
void set_row_covariance(EmState& st, const CMatrix& omega);

/// State before the first E-step: E[H] = H_hat, x_hat = ZF, E[u] = 1 and
/// the matching row covariance.
EmState em_init(const ChannelEstimate& est, const CMatrix& y, const EmOptions& opt);

/// C, then E[u] = (v + 2 N) / (v + C), then Omega_H, then E[H].
EmState em_e_step(EmState st, const ChannelEstimate& est, const CMatrix& y, const EmOptions& opt);

/// argmin_X ||Y - E[H] X||^2 + ||V_H X||^2.
CMatrix em_m_step(const EmState& st, const CMatrix& y);

/// ||Y - E[H] X||^2 + ||V_H X||^2.
double em_objective(const EmState& st, const CMatrix& y, const CMatrix& x);

EmState run_em(const ChannelEstimate& est, const CMatrix& y, const EmOptions& opt);

/// Z angles uniformly inside (-pi/2, pi/2): -pi/2 + pi (z + 1) / (Z + 1).
std::vector<double> angle_grid(int z);

struct BeampatternEstimate {
    std::vector<double> theta_grid;
    RVector b;

    int peak_index() const;
    double peak_angle() const { return theta_grid[static_cast<std::size_t>(peak_index())]; }
};

/// b[z] = a^T(theta_z) R a^*(theta_z) with R = (1/N) X X^H: the power the
/// array radiates towards theta_z.
BeampatternEstimate estimate_beampattern(const CMatrix& x_hat, const std::vector<double>& theta_grid, int m_ap);

struct DirectionLine {
    Point2 origin;
    double angle = 0.0; // global azimuth
};

/// Cells crossed by the ray from `origin` along `angle`, in order of
/// traversal. Empty when the ray misses the area.
std::vector<int> traverse_ray(const SearchGrid& grid, Point2 origin, double angle);

struct LocalizationResult {
    std::vector<double> line_angles;
    std::vector<int> cells_per_line;
    std::vector<int> votes; // one entry per cell
    int chosen_cell = -1;
    int tied_cells = 0;
    bool correct = false;
};

LocalizationResult vote_and_localize(const std::vector<DirectionLine>& lines, const SearchGrid& grid,
                                     Point2 target, Rng& rng);

/// Fraction of correct results. Throws on an empty list.
double detection_probability(const std::vector<LocalizationResult>& results);
double detection_probability(const std::vector<bool>& correct);

// ---------------------------------------------------------------------------
// Per-realization attack.

struct ApAttack {
    int ap = 0;
    double local_peak = 0.0;  // argmax angle in the AP array frame
    double global_angle = 0.0;
    double true_local = 0.0;  // actual target angle in the AP frame
    int em_iterations = 0;
    bool em_capped = false;
    double err_em = 0.0; // mean ||x_hat - x_true||^2 per sample
    double err_zf = 0.0;
};

struct AttackResult {
    std::vector<ApAttack> aps; // known APs only
    LocalizationResult loc;
    bool em_capped = false;
};

/// Runs the adversary against the first `known_ap_count()` transmit APs.
/// Streams: pilots (pilot-phase noise), adversary_noise (data phase),
/// votes (tie breaking).
AttackResult run_attack(const Scenario& sc, const SensingGeometry& geom, const CommChannelSet& ch,
                        const PrecoderSet& w, const SymbolBlock& s, std::uint64_t realization_seed);

/// Same recovery reused with a different grid or known-AP count.
LocalizationResult relocalize(const Scenario& sc, const AttackResult& attack, int known_aps, const SearchGrid& grid,
                              Rng& rng);

} // namespace isac

#pragma once

// Random propagation: Rayleigh communication channels, ULA steering,
// bistatic sensing path gains and Swerling-I target reflectivity.

#include <vector>

#include "isac/rng.hpp"
#include "isac/scenario.hpp"

namespace isac {

struct CommChannelSet {
    // h[i][k]: M_Ue x M_AP channel from transmit AP k to UE i.
    std::vector<std::vector<CMatrix>> h;
    // omega(i, k) = d_{i,k}^-pathloss_exp
    RMatrix omega;

    const CMatrix& at(int ue, int ap) const { return h[static_cast<std::size_t>(ue)][static_cast<std::size_t>(ap)]; }
    int n_ue() const { return static_cast<int>(h.size()); }
    int n_tx() const { return h.empty() ? 0 : static_cast<int>(h.front().size()); }
};

struct SensingGeometry {
    // Angles of the target as seen from each AP, in the AP's array frame.
    std::vector<double> phi_tx;
    std::vector<double> phi_rx;
    // Array boresight (global azimuth) of every AP; arrays face the origin.
    std::vector<double> boresight_tx;
    std::vector<double> boresight_rx;
    // beta(r, k): two-hop gain transmit AP k -> target -> receive AP r.
    RMatrix beta;
};

struct RcsDraw {
    CMatrix alpha; // N_Rx x N_Tx
    double sigma2 = 0.0;
    double rho = 0.0;
};

/// ULA response: element t is exp(j t pi sin(phi)).
CVector steering_vector(double phi, int m);

/// lambda^2 / ((4 pi)^3 d_tk^2 d_tr^2). Throws on non-positive distances.
double sensing_path_gain(double d_tk, double d_tr, double lambda_c);

/// Boresight azimuth of an array at `ap` (pointing at the search-area center).
double array_boresight(Point2 ap, Point2 center = {0.0, 0.0});

/// Angle of `target` in the local frame of an array at `ap`.
double local_angle(Point2 ap, Point2 target, Point2 center = {0.0, 0.0});

SensingGeometry make_sensing_geometry(const Scenario& sc);

CommChannelSet draw_comm_channels(const Scenario& sc, Rng& rng);

RcsDraw draw_rcs(const Scenario& sc, Rng& rng);

/// cov(alpha_{r,j}, alpha_{r,k}): sigma^2 on the diagonal, rho sigma^2 off it.
double rcs_covariance(const Scenario& sc, int r, int k, int j);

} // namespace isac

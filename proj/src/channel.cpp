#include "isac/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace isac {

CVector steering_vector(double phi, int m)
{
    if (m < 1)
        throw std::invalid_argument("steering_vector: m must be >= 1");
    CVector a(m);
    const double step = kPi * std::sin(phi);
    for (int t = 0; t < m; ++t)
        a(t) = std::polar(1.0, t * step);
    return a;
}

double sensing_path_gain(double d_tk, double d_tr, double lambda_c)
{
    if (!(d_tk > 0.0) || !(d_tr > 0.0))
        throw std::invalid_argument("sensing_path_gain: distances must be positive");
    const double four_pi = 4.0 * kPi;
    return lambda_c * lambda_c / (four_pi * four_pi * four_pi * d_tk * d_tk * d_tr * d_tr);
}

double array_boresight(Point2 ap, Point2 center)
{
    if (ap == center)
        return 0.0;
    return azimuth(ap, center);
}

double local_angle(Point2 ap, Point2 target, Point2 center)
{
    return wrap_angle(azimuth(ap, target) - array_boresight(ap, center));
}

SensingGeometry make_sensing_geometry(const Scenario& sc)
{
    const auto& l = sc.layout;
    const Point2 center = sc.grid.origin;
    SensingGeometry g;
    for (Point2 p : l.tx_ap_pos) {
        g.boresight_tx.push_back(array_boresight(p, center));
        g.phi_tx.push_back(local_angle(p, l.target_pos, center));
    }
    for (Point2 p : l.rx_ap_pos) {
        g.boresight_rx.push_back(array_boresight(p, center));
        g.phi_rx.push_back(local_angle(p, l.target_pos, center));
    }
    g.beta.resize(sc.cfg.n_rx, sc.cfg.n_tx);
    for (int r = 0; r < sc.cfg.n_rx; ++r)
        for (int k = 0; k < sc.cfg.n_tx; ++k)
            g.beta(r, k) = sensing_path_gain(distance(l.target_pos, l.tx_ap_pos[k]),
                                             distance(l.target_pos, l.rx_ap_pos[r]), sc.lambda_c);
    return g;
}

CommChannelSet draw_comm_channels(const Scenario& sc, Rng& rng)
{
    const auto& c = sc.cfg;
    CommChannelSet ch;
    ch.omega.resize(c.n_ue, c.n_tx);
    ch.h.assign(static_cast<std::size_t>(c.n_ue), std::vector<CMatrix>(static_cast<std::size_t>(c.n_tx)));
    for (int i = 0; i < c.n_ue; ++i) {
        for (int k = 0; k < c.n_tx; ++k) {
            const double d = distance(sc.layout.ue_pos[i], sc.layout.tx_ap_pos[k]);
            if (!(d > 0.0))
                throw std::invalid_argument("UE and transmit AP positions coincide");
            const double omega = std::pow(d, -c.pathloss_exp);
            ch.omega(i, k) = omega;
            ch.h[i][k] = std::sqrt(omega) * complex_normal(rng, c.m_ue, c.m_ap);
        }
    }
    return ch;
}

RcsDraw draw_rcs(const Scenario& sc, Rng& rng)
{
    const auto& c = sc.cfg;
    RcsDraw d;
    d.sigma2 = sc.sigma_rcs2;
    d.rho = c.rcs_correlation;
    d.alpha.resize(c.n_rx, c.n_tx);
    const double a = std::sqrt(d.rho);
    const double b = std::sqrt(1.0 - d.rho);
    for (int r = 0; r < c.n_rx; ++r) {
        const cplx common = complex_normal(rng, d.sigma2);
        for (int k = 0; k < c.n_tx; ++k)
            d.alpha(r, k) = a * common + b * complex_normal(rng, d.sigma2);
    }
    return d;
}

double rcs_covariance(const Scenario& sc, int r, int k, int j)
{
    const auto& c = sc.cfg;
    if (r < 0 || r >= c.n_rx || k < 0 || k >= c.n_tx || j < 0 || j >= c.n_tx)
        throw std::out_of_range("rcs_covariance: index out of range");
    return k == j ? sc.sigma_rcs2 : c.rcs_correlation * sc.sigma_rcs2;
}

} // namespace isac

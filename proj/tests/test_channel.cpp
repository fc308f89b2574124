#include "doctest.h"

#include <cmath>
#include <random>

#include "isac/channel.hpp"
#include "test_util.hpp"

using namespace isac;

namespace {

Scenario paper_scenario() { return validate_config(paper_config(), default_layout()); }

} // namespace

TEST_CASE("steering vectors" * doctest::test_suite("trivial"))
{
    const CVector a0 = steering_vector(0.0, 4);
    CHECK((a0 - CVector::Ones(4)).norm() == 0.0);
    const CVector a1 = steering_vector(kPi / 2, 2);
    CHECK(std::abs(a1(0) - cplx(1.0, 0.0)) < 1e-15);
    CHECK(std::abs(a1(1) - cplx(-1.0, 0.0)) < 1e-15);
    const CVector a2 = steering_vector(kPi / 6, 2);
    CHECK(std::abs(a2(1) - cplx(0.0, 1.0)) < 1e-15);
    CHECK_THROWS_AS(steering_vector(0.1, 0), std::invalid_argument);
}

TEST_CASE("steering vectors have unit-modulus entries" * doctest::test_suite("property"))
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    for (int i = 0; i < 200; ++i) {
        const int m = 1 + i % 70;
        const CVector a = steering_vector(ang(rng), m);
        CHECK((a.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
        CHECK(a.squaredNorm() == doctest::Approx(m).epsilon(1e-14));
        // a^T a^* = M
        CHECK(std::abs(cplx(a.transpose() * a.conjugate()) - cplx(m, 0.0)) < 1e-12 * m);
    }
}

TEST_CASE("sensing path gain" * doctest::test_suite("trivial"))
{
    const double g = sensing_path_gain(120.0, 80.0, 0.1578);
    CHECK(sensing_path_gain(240.0, 80.0, 0.1578) == doctest::Approx(g / 4).epsilon(1e-14));
    CHECK(sensing_path_gain(80.0, 120.0, 0.1578) == doctest::Approx(g).epsilon(1e-14));
    CHECK_THROWS_AS(sensing_path_gain(0.0, 1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(sensing_path_gain(1.0, -2.0, 0.1), std::invalid_argument);
}

TEST_CASE("sensing path gain direct evaluation" * doctest::test_suite("derived"))
{
    const double four_pi_cubed = std::pow(4.0 * kPi, 3);
    CHECK(sensing_path_gain(100.0, 100.0, 0.1578) ==
          doctest::Approx(0.1578 * 0.1578 / (four_pi_cubed * 1e8)).epsilon(1e-12));
}

TEST_CASE("sensing path gain decreases in both distances" * doctest::test_suite("property"))
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(1.0, 2000.0);
    for (int i = 0; i < 500; ++i) {
        const double a = d(rng), b = d(rng), grow = 1.0 + d(rng) / 1000.0;
        CHECK(sensing_path_gain(a * grow, b, 0.15) < sensing_path_gain(a, b, 0.15));
        CHECK(sensing_path_gain(a, b * grow, 0.15) < sensing_path_gain(a, b, 0.15));
        CHECK(sensing_path_gain(a, b, 0.15) > 0.0);
    }
}

TEST_CASE("sensing geometry for the published layout")
{
    const Scenario sc = paper_scenario();
    const SensingGeometry g = make_sensing_geometry(sc);
    REQUIRE(g.phi_tx.size() == 8);
    REQUIRE(g.phi_rx.size() == 4);
    for (double phi : g.phi_tx) {
        CHECK(phi > -kPi / 2);
        CHECK(phi < kPi / 2);
    }
    for (double phi : g.phi_rx) {
        CHECK(phi > -kPi / 2);
        CHECK(phi < kPi / 2);
    }
    // AP at (-500, 0) faces +x; the target is at atan2(75, 425) to its left.
    CHECK(g.boresight_tx[6] == doctest::Approx(0.0));
    CHECK(g.phi_tx[6] == doctest::Approx(std::atan2(75.0, 425.0)).epsilon(1e-14));
    for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 8; ++k) {
            const double d_tk = distance(sc.layout.target_pos, sc.layout.tx_ap_pos[k]);
            const double d_tr = distance(sc.layout.target_pos, sc.layout.rx_ap_pos[r]);
            CHECK(g.beta(r, k) == sensing_path_gain(d_tk, d_tr, sc.lambda_c));
        }
}

TEST_CASE("large-scale gain from distance" * doctest::test_suite("trivial"))
{
    SimulationConfig cfg = testutil::small_config(2, 1, 1, 2, 2);
    NetworkLayout lay = default_layout();
    lay.tx_ap_pos = {{1.0, 0.0}, {10.0, 0.0}};
    lay.rx_ap_pos = {{250.0, 250.0}};
    lay.ue_pos = {{0.0, 0.0}};
    const Scenario sc = validate_config(cfg, lay);
    Rng rng(3);
    const CommChannelSet ch = draw_comm_channels(sc, rng);
    CHECK(ch.omega(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ch.omega(0, 1) == doctest::Approx(1e-3).epsilon(1e-14));
    CHECK(ch.at(0, 0).rows() == 2);
    CHECK(ch.at(0, 0).cols() == 2);
}

TEST_CASE("normalized channel entries are unit-variance Gaussian" * doctest::test_suite("derived"))
{
    const Scenario sc = validate_config(testutil::small_config(8, 4, 4, 4, 2), default_layout());
    Rng rng(4);
    double acc = 0.0;
    cplx mean = 0.0;
    long count = 0;
    while (count < 10000) {
        const CommChannelSet ch = draw_comm_channels(sc, rng);
        for (int i = 0; i < sc.cfg.n_ue; ++i)
            for (int k = 0; k < sc.cfg.n_tx; ++k) {
                const CMatrix g = ch.at(i, k) / std::sqrt(ch.omega(i, k));
                acc += g.squaredNorm();
                mean += g.sum();
                count += g.size();
            }
    }
    CHECK(acc / count == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(mean) / count < 4.0 / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("RCS covariance" * doctest::test_suite("trivial"))
{
    SimulationConfig cfg = paper_config();
    cfg.rcs_correlation = 0.0;
    Scenario sc = validate_config(cfg, default_layout());
    CHECK(rcs_covariance(sc, 0, 2, 2) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(rcs_covariance(sc, 0, 2, 3) == 0.0);
    sc = paper_scenario();
    CHECK(rcs_covariance(sc, 1, 0, 5) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK_THROWS(rcs_covariance(sc, 4, 0, 0));
    CHECK_THROWS(rcs_covariance(sc, 0, 8, 0));

    Rng rng(5);
    const RcsDraw d = draw_rcs(sc, rng);
    for (int r = 0; r < 4; ++r)
        for (int k = 1; k < 8; ++k)
            CHECK(d.alpha(r, k) == d.alpha(r, 0));
}

TEST_CASE("RCS draws match their covariance" * doctest::test_suite("derived"))
{
    for (double rho : {0.0, 0.6}) {
        SimulationConfig cfg = paper_config();
        cfg.rcs_correlation = rho;
        const Scenario sc = validate_config(cfg, default_layout());
        Rng rng(6);
        const int n = 10000;
        double var = 0.0;
        cplx cross = 0.0, mean = 0.0;
        for (int t = 0; t < n; ++t) {
            const RcsDraw d = draw_rcs(sc, rng);
            var += std::norm(d.alpha(0, 0));
            cross += d.alpha(0, 0) * std::conj(d.alpha(0, 1));
            mean += d.alpha(1, 2);
        }
        const double sigma2 = sc.sigma_rcs2;
        CHECK(var / n == doctest::Approx(sigma2).epsilon(0.05));
        CHECK(std::abs(cross / double(n) - rho * sigma2) < 3.0 * sigma2 / 100.0);
        CHECK(std::abs(mean) / n < 4.0 * std::sqrt(sigma2 / n));
    }
}

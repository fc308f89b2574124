#include "doctest.h"

#include <cmath>

#include "isac/airlink.hpp"
#include "test_util.hpp"

using namespace isac;

namespace {

PrecoderSet random_precoders(Rng& rng, int n_tx, int m, int cols)
{
    PrecoderSet w;
    for (int k = 0; k < n_tx; ++k)
        w.w.push_back(complex_normal(rng, m, cols));
    return w;
}

} // namespace

TEST_CASE("QPSK symbols have unit modulus" * doctest::test_suite("trivial"))
{
    const Scenario sc = testutil::make_scenario(testutil::small_config(8, 4, 4, 16, 4));
    Rng rng(1);
    const SymbolBlock s = draw_symbols(sc, rng);
    REQUIRE(s.streams() == 5);
    REQUIRE(s.length() == sc.cfg.block_len);
    for (int i = 0; i < 4; ++i)
        for (int n = 0; n < s.length(); ++n) {
            CHECK(std::abs(s.s(i, n)) == doctest::Approx(1.0).epsilon(1e-15));
            CHECK(std::abs(std::abs(s.s(i, n).real()) - std::sqrt(0.5)) < 1e-15);
        }
}

TEST_CASE("symbol rows have unit power and the sensing row is independent" * doctest::test_suite("derived"))
{
    SimulationConfig cfg = testutil::small_config(8, 4, 4, 16, 4);
    cfg.block_len = 4096;
    const Scenario sc = testutil::make_scenario(cfg);
    Rng rng(2);
    const SymbolBlock s = draw_symbols(sc, rng);
    const double n = 4096.0;
    for (int r = 0; r < s.streams(); ++r)
        CHECK(s.s.row(r).squaredNorm() / n == doctest::Approx(1.0).epsilon(0.05));
    for (int i = 0; i < 4; ++i) {
        const cplx corr = s.s.row(i).dot(s.s.row(4)) / n;
        CHECK(std::abs(corr) < 4.0 / std::sqrt(n));
    }
}

TEST_CASE("transmit signal" * doctest::test_suite("trivial"))
{
    Rng rng(3);
    const SymbolBlock s{complex_normal(rng, 3, 6)};
    PrecoderSet w{{CMatrix::Zero(4, 3)}};
    CHECK(transmit_signal(w, s, 0).norm() == 0.0);

    w.w[0] = CMatrix::Identity(4, 3);
    SymbolBlock e1{CMatrix::Zero(3, 6)};
    e1.s.row(0).setOnes();
    const CMatrix x = transmit_signal(w, e1, 0);
    for (int n = 0; n < 6; ++n)
        CHECK((x.col(n) - w.w[0].col(0)).norm() == 0.0);
    CHECK_THROWS_AS(transmit_signal(w, SymbolBlock{CMatrix::Zero(2, 6)}, 0), std::invalid_argument);
    CHECK_THROWS_AS(transmit_signal(w, s, 1), std::out_of_range);
}

TEST_CASE("transmit signal matches a per-sample loop" * doctest::test_suite("derived"))
{
    Rng rng(4);
    const PrecoderSet w = random_precoders(rng, 2, 5, 4);
    const SymbolBlock s{complex_normal(rng, 4, 9)};
    const CMatrix x = transmit_signal(w, s, 1);
    for (int n = 0; n < 9; ++n)
        for (int t = 0; t < 5; ++t) {
            cplx acc = 0.0;
            for (int l = 0; l < 4; ++l)
                acc += w.w[1](t, l) * s.s(l, n);
            CHECK(std::abs(x(t, n) - acc) < 1e-12);
        }
}

TEST_CASE("UE reception" * doctest::test_suite("trivial"))
{
    Rng rng(5);
    CommChannelSet ch;
    ch.h = {{CMatrix::Identity(3, 3)}};
    ch.omega = RMatrix::Ones(1, 1);
    const PrecoderSet w{{CMatrix::Identity(3, 3)}};
    const SymbolBlock s{complex_normal(rng, 3, 8)};
    Rng noise(1);
    const Reception r = ue_received(ch, w, s, 0, 0.1, noise);
    CHECK((r.noiseless - s.s).norm() == 0.0);
    CHECK((r.noisy - r.noiseless).norm() > 0.0);
}

TEST_CASE("UE reception statistics and superposition" * doctest::test_suite("derived"))
{
    Rng rng(6);
    CommChannelSet ch;
    ch.h = {{CMatrix::Zero(2, 4), CMatrix::Zero(2, 4)}};
    ch.omega = RMatrix::Ones(1, 2);
    PrecoderSet w = random_precoders(rng, 2, 4, 2);
    const SymbolBlock s{complex_normal(rng, 2, 10000)};
    Rng noise(2);
    const Reception r = ue_received(ch, w, s, 0, 0.25, noise);
    CHECK(r.noiseless.norm() == 0.0);
    CHECK(r.noisy.squaredNorm() / r.noisy.size() == doctest::Approx(0.25).epsilon(0.05));

    ch.h = {{complex_normal(rng, 2, 4), complex_normal(rng, 2, 4)}};
    const SymbolBlock s2{complex_normal(rng, 2, 7)};
    const Reception r2 = ue_received(ch, w, s2, 0, 0.25, noise);
    const CMatrix oracle = ch.h[0][0] * w.w[0] * s2.s + ch.h[0][1] * w.w[1] * s2.s;
    CHECK((r2.noiseless - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("communication SINR" * doctest::test_suite("trivial"))
{
    const CMatrix h = CMatrix::Ones(1, 1);
    CMatrix w(1, 2);
    w << 1.0, 0.0;
    const CVector u = CVector::Ones(1);
    CHECK(comm_sinr(h, w, u, 0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    w(0, 1) = 1.0;
    CHECK(comm_sinr(h, w, u, 0, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(comm_sinr(h, w, cplx(3.0, -2.0) * u, 0, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(comm_sinr(h, w, CVector::Zero(1), 0, 1.0), std::invalid_argument);
}

TEST_CASE("communication SINR matches its definition" * doctest::test_suite("property"))
{
    Rng rng(7);
    for (int t = 0; t < 100; ++t) {
        const int mu = 1 + t % 4, m = 1 + t % 6, cols = 2 + t % 4;
        const CMatrix h = complex_normal(rng, mu, m);
        const CMatrix w = complex_normal(rng, m, cols);
        const CVector u = complex_normal(rng, mu, 1);
        const int i = t % (cols - 1);
        const double noise = 0.01 + 0.1 * (t % 5);
        double leak = 0.0;
        for (int l = 0; l < cols; ++l)
            if (l != i)
                leak += std::norm(cplx(u.adjoint() * h * w.col(l)));
        const double expect = std::norm(cplx(u.adjoint() * h * w.col(i))) / (leak + noise * u.squaredNorm());
        const double got = comm_sinr(h, w, u, i, noise);
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
        CHECK(comm_sinr(h, w, 7.5 * u, i, noise) == doctest::Approx(got).epsilon(1e-12));
    }
}

TEST_CASE("receive-AP echo" * doctest::test_suite("trivial"))
{
    SimulationConfig cfg = testutil::small_config(2, 2, 1, 4, 2);
    const Scenario sc = testutil::make_scenario(cfg);
    const SensingGeometry geom = make_sensing_geometry(sc);
    Rng rng(8);
    RcsDraw rcs = draw_rcs(sc, rng);
    const std::vector<CMatrix> x{complex_normal(rng, 4, 5), complex_normal(rng, 4, 5)};

    RcsDraw silent = rcs;
    silent.alpha.setZero();
    Rng noise(1);
    CHECK(rx_ap_received(sc, geom, silent, x, 0, noise).noiseless.norm() == 0.0);

    Rng n1(2), n2(3);
    const Reception a = rx_ap_received(sc, geom, rcs, x, 1, n1);
    const Reception b = rx_ap_received(sc, geom, rcs, {2.0 * x[0], 2.0 * x[1]}, 1, n2);
    CHECK((b.noiseless - 2.0 * a.noiseless).norm() < 1e-12 * a.noiseless.norm());
    CHECK_THROWS_AS(rx_ap_received(sc, geom, rcs, {x[0]}, 0, n1), std::invalid_argument);
}

TEST_CASE("matched transmit beam gives an M_AP echo gain" * doctest::test_suite("derived"))
{
    SimulationConfig cfg = testutil::small_config(1, 1, 1, 8, 2);
    const Scenario sc = testutil::make_scenario(cfg);
    const SensingGeometry geom = make_sensing_geometry(sc);
    Rng rng(9);
    const RcsDraw rcs = draw_rcs(sc, rng);
    const CMatrix x = steering_vector(geom.phi_tx[0], 8).conjugate();
    Rng noise(4);
    const Reception r = rx_ap_received(sc, geom, rcs, {x}, 0, noise);
    const CVector expect = 8.0 * rcs.alpha(0, 0) * std::sqrt(geom.beta(0, 0)) * steering_vector(geom.phi_rx[0], 8);
    CHECK((r.noiseless.col(0) - expect).norm() < 1e-12 * expect.norm());
}

TEST_CASE("sensing SINR" * doctest::test_suite("trivial"))
{
    const Scenario sc = testutil::make_scenario(testutil::small_config(4, 4, 2, 8, 2));
    const SensingGeometry geom = make_sensing_geometry(sc);
    Rng rng(10);
    const SymbolBlock s = draw_symbols(sc, rng);
    PrecoderSet w;
    for (int k = 0; k < 4; ++k)
        w.w.push_back(CMatrix::Zero(8, 3));
    CHECK(sensing_sinr(sc, geom, w, s) == 0.0);
    w = random_precoders(rng, 4, 8, 3);
    const double g = sensing_sinr(sc, geom, w, s);
    PrecoderSet w3 = w;
    for (auto& m : w3.w)
        m *= cplx(0.0, 3.0);
    CHECK(sensing_sinr(sc, geom, w3, s) == doctest::Approx(9.0 * g).epsilon(1e-12));
}

TEST_CASE("scalar sensing SINR by hand" * doctest::test_suite("derived"))
{
    SimulationConfig cfg = testutil::small_config(1, 1, 1, 1, 1);
    cfg.block_len = 16;
    const Scenario sc = testutil::make_scenario(cfg);
    const SensingGeometry geom = make_sensing_geometry(sc);
    Rng rng(11);
    const SymbolBlock s = draw_symbols(sc, rng);
    CMatrix wk(1, 2);
    wk << cplx(0.3, -0.7), cplx(1.1, 0.4);
    const PrecoderSet w{{wk}};
    double energy = 0.0;
    for (int n = 0; n < 16; ++n)
        energy += std::norm(wk(0, 0) * s.s(0, n) + wk(0, 1) * s.s(1, n));
    const double zeta = 1.0 / (15.0 * sc.sigma_n2);
    const double expect = zeta * geom.beta(0, 0) * sc.sigma_rcs2 * energy;
    CHECK(sensing_sinr(sc, geom, w, s) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("sensing SINR is a nonnegative quadratic form" * doctest::test_suite("property"))
{
    Rng rng(12);
    for (double rho : {0.0, 0.3, 1.0}) {
        SimulationConfig cfg = testutil::small_config(8, 4, 2, 6, 2);
        cfg.rcs_correlation = rho;
        const Scenario sc = testutil::make_scenario(cfg);
        const SensingGeometry geom = make_sensing_geometry(sc);
        const SensingKernel kern = make_sensing_kernel(sc, geom);
        CHECK((kern.coupling - kern.coupling.transpose()).norm() == 0.0);
        CHECK(Eigen::SelfAdjointEigenSolver<RMatrix>(kern.coupling).eigenvalues().minCoeff() >=
              -1e-12 * kern.coupling.norm());
        for (int t = 0; t < 10; ++t) {
            const PrecoderSet w = random_precoders(rng, 8, 6, 3);
            const SymbolBlock s = draw_symbols(sc, rng);
            CHECK(sensing_sinr(kern, w, s) >= 0.0);
            CHECK(expected_sensing_sinr(kern, w, sc.cfg.block_len) >= 0.0);
        }
    }
}

TEST_CASE("expected sensing SINR is the symbol average" * doctest::test_suite("derived"))
{
    SimulationConfig cfg = testutil::small_config(4, 2, 2, 4, 2);
    cfg.block_len = 32;
    const Scenario sc = testutil::make_scenario(cfg);
    const SensingKernel kern = make_sensing_kernel(sc, make_sensing_geometry(sc));
    Rng rng(13);
    const PrecoderSet w = random_precoders(rng, 4, 4, 3);
    double acc = 0.0;
    const int draws = 4000;
    for (int t = 0; t < draws; ++t)
        acc += sensing_sinr(kern, w, draw_symbols(sc, rng));
    CHECK(acc / draws == doctest::Approx(expected_sensing_sinr(kern, w, 32)).epsilon(0.03));
}

TEST_CASE("precoder set arithmetic")
{
    Rng rng(14);
    const PrecoderSet a = random_precoders(rng, 3, 2, 2);
    const PrecoderSet b = random_precoders(rng, 3, 2, 2);
    const PrecoderSet d = (a + b) - b;
    for (int k = 0; k < 3; ++k)
        CHECK((d.w[k] - a.w[k]).norm() < 1e-14);
    double sq = 0.0;
    for (int k = 0; k < 3; ++k)
        sq += a.power(k);
    CHECK(a.frobenius_norm() == doctest::Approx(std::sqrt(sq)));
    CHECK_THROWS_AS(a + random_precoders(rng, 2, 2, 2), std::invalid_argument);
}

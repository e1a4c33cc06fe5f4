// SPDX-License-Identifier: Apache-2.0
//
// trilat: device-free trilateration with two base stations and one passive IRS
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "trilat/channel.hpp"
#include "trilat/error.hpp"
#include "trilat/rng.hpp"

#include <cmath>
#include <numbers>

using namespace trilat;
using cd = std::complex<double>;

namespace {

Scenario scene(std::vector<Point2D> targets)
{
    return Scenario{{Point2D{-100.0, 0.0}, Point2D{100.0, 0.0}}, Point2D{0.0, 40.0}, std::move(targets)};
}

// Small numerology so brute-force oracles stay cheap: N = 64, L = 32.
SystemConfig small_config()
{
    SystemConfig c = SystemConfig::defaults();
    c.n_subcarriers = 64;
    c.subcarrier_spacing_hz = 400e6 / 64.0;
    c.n_taps = 32;
    c.n_irs_elements = 3;
    c.n_symbols = 3;
    c.subcarriers = make_allocation(64, AllocationMode::interleaved);
    return c;
}

long nonzero_count(const TapVector &v)
{
    long n = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        n += v(i) != cd{};
    return n;
}

} // namespace

TEST_CASE("single target at 30 m fills BS-target-BS tap 80 only")
{
    const SystemConfig c = SystemConfig::defaults();
    const Scenario s = scene({{-70.0, 0.0}});
    const TapBundle t = synth_taps(s, c, 3);
    REQUIRE(t.ata[0].size() == c.n_taps);
    CHECK(nonzero_count(t.ata[0]) == 1);
    CHECK(t.ata[0](79) != cd{});
    CHECK(std::abs(t.ata[0](79)) == doctest::Approx(c.gain_ref / (30.0 * 30.0)).epsilon(1e-12));
}

TEST_CASE("zero targets leave only the BS-IRS-BS taps")
{
    const SystemConfig c = SystemConfig::defaults();
    const TapBundle t = synth_taps(scene({}), c, 9);
    const Bin l_aia = delay_bin(std::sqrt(11600.0), PathKind::bs_irs_bs, c);
    for (std::size_t m = 0; m < 2; ++m)
    {
        CHECK(t.ata[m].isZero(0.0));
        REQUIRE(t.aia[m].size() == static_cast<std::size_t>(c.n_irs_elements));
        for (std::size_t i = 0; i < t.aia[m].size(); ++i)
        {
            CHECK(t.aita[m][i].isZero(0.0));
            CHECK(nonzero_count(t.aia[m][i]) == 1);
            CHECK(std::abs(t.aia[m][i](l_aia - 1)) ==
                  doctest::Approx(c.gain_ref / 11600.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("two targets in distinct bins carry the gain-model magnitudes")
{
    const SystemConfig c = SystemConfig::defaults();
    const Scenario s = scene({{-70.0, 0.0}, {20.0, 60.0}});
    const RangeTruth d = distances(s);
    const TrueBins b = true_bins(s, c);
    const TapBundle t = synth_taps(s, c, 21);
    for (std::size_t m = 0; m < 2; ++m)
    {
        CHECK(nonzero_count(t.ata[m]) == 2);
        for (std::size_t k = 0; k < 2; ++k)
        {
            const double at = d.d_at[m][k];
            CHECK(std::abs(t.ata[m](b.at[m][k] - 1)) == doctest::Approx(c.gain_ref / (at * at)).epsilon(1e-12));
            const double aita = c.gain_ref / (d.d_ai[m] * d.d_it[k] * at);
            for (std::size_t i = 0; i < 4; ++i)
                CHECK(std::abs(t.aita[m][i](b.aita[m][k] - 1)) == doctest::Approx(aita).epsilon(1e-12));
        }
    }
}

TEST_CASE("shared bins add coherently")
{
    const SystemConfig c = SystemConfig::defaults();
    const Scenario s = scene({{-70.0, 0.0}, {-70.0, 0.0}});
    const TapBundle t = synth_taps(s, c, 4);
    CHECK(nonzero_count(t.ata[0]) == 1);
    CHECK(std::abs(t.ata[0](79)) <= 2.0 * c.gain_ref / 900.0 + 1e-18);
}

TEST_CASE("path amplitude clamps short segments at 1 m")
{
    CHECK(path_amplitude(2.0, {0.25, 4.0}) == 0.5);
    CHECK(path_amplitude(2.0, {0.0}) == 2.0);
    CHECK(path_amplitude(1.0, {10.0, 10.0}) == 0.01);
}

TEST_CASE("synthesis is deterministic per seed")
{
    const SystemConfig c = SystemConfig::defaults();
    const Scenario s = scene({{-70.0, 0.0}, {20.0, 60.0}});
    const TapBundle a = synth_taps(s, c, 77), b = synth_taps(s, c, 77), other = synth_taps(s, c, 78);
    CHECK(a.ata[1] == b.ata[1]);
    CHECK(a.aita[0][5] == b.aita[0][5]);
    CHECK_FALSE(a.ata[1] == other.ata[1]);
}

TEST_CASE("synthesis propagates delay-spread errors")
{
    SystemConfig c = SystemConfig::defaults();
    c.n_taps = 100;
    CHECK_THROWS_AS(synth_taps(scene({{0.0, 40.0}}), c, 1), DelaySpreadError);
}

TEST_CASE("IRS profile: off in the first symbol, unit modulus after")
{
    const IrsProfile p = make_irs_profile(64, 7, 5);
    REQUIRE(p.phi.rows() == 64);
    REQUIRE(p.phi.cols() == 7);
    for (Eigen::Index i = 0; i < 64; ++i)
    {
        CHECK(p.phi(i, 0) == cd{});
        for (Eigen::Index q = 1; q < 7; ++q)
            CHECK(std::abs(p.phi(i, q)) == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(make_irs_profile(64, 7, 5).phi == p.phi);
}

TEST_CASE("compose_channel")
{
    const SystemConfig c = SystemConfig::defaults();
    const Scenario s = scene({{-70.0, 0.0}, {20.0, 60.0}});
    const TapBundle t = synth_taps(s, c, 8);
    const IrsProfile p = make_irs_profile(c.n_irs_elements, c.n_symbols, 2);

    SUBCASE("IRS-off symbol is the BS-target-BS channel")
    {
        for (int m = 0; m < 2; ++m)
            CHECK(compose_channel(t, p, m, 0) == t.ata[static_cast<std::size_t>(m)]);
    }

    SUBCASE("one element with unit coefficient sums the three channels")
    {
        TapBundle one = t;
        for (auto &v : one.aia)
            v.resize(1);
        for (auto &v : one.aita)
            v.resize(1);
        IrsProfile unit;
        unit.phi = Eigen::MatrixXcd::Ones(1, 2);
        unit.phi(0, 0) = 0.0;
        const TapVector h = compose_channel(one, unit, 1, 1);
        CHECK((h - (one.ata[1] + one.aia[1][0] + one.aita[1][0])).norm() == 0.0);
    }

    SUBCASE("linear in the IRS coefficients")
    {
        IrsProfile zero = p, scaled = p;
        zero.phi.setZero();
        const cd alpha{0.3, -1.7};
        scaled.phi *= alpha;
        for (int m = 0; m < 2; ++m)
            for (long q = 1; q < c.n_symbols; ++q)
            {
                const TapVector base = compose_channel(t, zero, m, q);
                const TapVector lhs = compose_channel(t, scaled, m, q) - base;
                const TapVector rhs = alpha * (compose_channel(t, p, m, q) - base);
                CHECK((lhs - rhs).norm() <= 1e-13 * rhs.norm());
            }
    }
}

TEST_CASE("OFDM time signal")
{
    const long N = 2048;
    SUBCASE("all ones is an impulse of energy N")
    {
        const Eigen::VectorXcd x = ofdm_time_signal(Eigen::VectorXcd::Ones(N), 1.0);
        CHECK(x.squaredNorm() == doctest::Approx(static_cast<double>(N)).epsilon(1e-12));
        CHECK(std::abs(x(0)) == doctest::Approx(std::sqrt(static_cast<double>(N))).epsilon(1e-12));
        CHECK(x.tail(N - 1).norm() <= 1e-9);
    }
    SUBCASE("zero in, zero out")
    {
        CHECK(ofdm_time_signal(Eigen::VectorXcd::Zero(N), 5.0).norm() == 0.0);
    }
    SUBCASE("Parseval under the unitary transform")
    {
        Rng rng(1);
        Eigen::VectorXcd s(N);
        for (long n = 0; n < N; ++n)
            s(n) = (n % 2 == 0) ? rng.complex_normal(1.0) : cd{};
        const double p = 3.5;
        CHECK(ofdm_time_signal(s, p).squaredNorm() == doctest::Approx(p * s.squaredNorm()).epsilon(1e-12));
    }
    SUBCASE("matches the direct inverse DFT")
    {
        const long n_small = 16;
        Rng rng(2);
        Eigen::VectorXcd s(n_small);
        for (long n = 0; n < n_small; ++n)
            s(n) = rng.complex_normal(1.0);
        const Eigen::VectorXcd x = ofdm_time_signal(s, 2.0);
        for (long t = 0; t < n_small; ++t)
        {
            cd acc{};
            for (long n = 0; n < n_small; ++n)
                acc += s(n) * std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(n * t) / n_small);
            acc *= std::sqrt(2.0) / std::sqrt(static_cast<double>(n_small));
            CHECK(std::abs(x(t) - acc) <= 1e-12);
        }
    }
}

TEST_CASE("delay steering matrix")
{
    SystemConfig c = small_config();
    const Eigen::MatrixXcd E = delay_steering(c, 1);
    REQUIRE(E.rows() == 32);
    REQUIRE(E.cols() == c.n_taps);
    for (Eigen::Index n = 0; n < E.rows(); ++n)
        for (Eigen::Index l = 0; l < E.cols(); ++l)
        {
            const double nn = static_cast<double>(c.subcarriers[1][static_cast<std::size_t>(n)] - 1);
            const cd expect = std::polar(1.0, -2.0 * std::numbers::pi * nn * static_cast<double>(l) / 64.0);
            CHECK(std::abs(E(n, l) - expect) <= 1e-12);
        }

    SUBCASE("interleaved half allocation keeps L <= N/2 columns orthogonal")
    {
        const Eigen::MatrixXcd G = E.adjoint() * E;
        CHECK((G - 32.0 * Eigen::MatrixXcd::Identity(32, 32)).norm() <= 1e-9);
    }
    SUBCASE("full allocation gives N times identity")
    {
        c.n_taps = 64;
        c.subcarriers[0].clear();
        for (long n = 1; n <= 64; ++n)
            c.subcarriers[0].push_back(n);
        const Eigen::MatrixXcd F = delay_steering(c, 0);
        const Eigen::MatrixXcd G = F.adjoint() * F;
        CHECK((G - 64.0 * Eigen::MatrixXcd::Identity(64, 64)).norm() <= 1e-9);
    }
}

TEST_CASE("simulate_rx")
{
    const SystemConfig c = small_config();
    const OfdmFrontEnd fe(c);

    SUBCASE("flat channel, no noise")
    {
        SystemConfig flat = c;
        flat.n_taps = 1;
        const OfdmFrontEnd ffe(flat);
        TapBundle t;
        for (std::size_t m = 0; m < 2; ++m)
        {
            t.ata[m] = TapVector::Ones(1);
            t.aia[m].assign(3, TapVector::Zero(1));
            t.aita[m].assign(3, TapVector::Zero(1));
        }
        const ReceivedSignal rx = simulate_rx(t, make_irs_profile(3, 3, 1), ffe, 5, 0.0);
        for (int m = 0; m < 2; ++m)
        {
            const double amp = std::sqrt(flat.subcarrier_power_mw(m));
            for (long q = 0; q < 3; ++q)
            {
                const auto &ybar = rx.ybar[static_cast<std::size_t>(m)][static_cast<std::size_t>(q)];
                REQUIRE(ybar.size() == 32);
                CHECK((ybar - Eigen::VectorXcd::Constant(32, amp)).norm() <= 1e-12 * amp);
                // y = sqrt(p) s when s is the transmitted symbol
                const auto &y = rx.y[static_cast<std::size_t>(m)][static_cast<std::size_t>(q)];
                const auto &s = rx.s[static_cast<std::size_t>(m)][static_cast<std::size_t>(q)];
                CHECK((y - amp * s).norm() <= 1e-12 * amp);
                for (Eigen::Index n = 0; n < s.size(); ++n)
                    CHECK(std::abs(s(n)) == doctest::Approx(1.0).epsilon(1e-14));
            }
        }
    }

    SUBCASE("single tap is one steering column")
    {
        const Bin l = 5;
        const cd h{0.3, 0.4};
        TapBundle t;
        for (std::size_t m = 0; m < 2; ++m)
        {
            t.ata[m] = TapVector::Zero(c.n_taps);
            t.ata[m](l - 1) = h;
            t.aia[m].assign(3, TapVector::Zero(c.n_taps));
            t.aita[m].assign(3, TapVector::Zero(c.n_taps));
        }
        const ReceivedSignal rx = simulate_rx(t, make_irs_profile(3, 3, 1), fe, 6, 0.0);
        for (int m = 0; m < 2; ++m)
        {
            const auto mi = static_cast<std::size_t>(m);
            const double amp = std::sqrt(c.subcarrier_power_mw(m));
            for (Eigen::Index n = 0; n < 32; ++n)
            {
                const double nn = static_cast<double>(c.subcarriers[mi][static_cast<std::size_t>(n)] - 1);
                const cd expect = amp * h * std::polar(1.0, -2.0 * std::numbers::pi * nn * (l - 1) / 64.0);
                CHECK(std::abs(rx.ybar[mi][0](n) - expect) <= 1e-12 * amp);
            }
        }
    }

    SUBCASE("IRS-off reception carries no IRS contribution")
    {
        const Scenario s = scene({{-70.0, 0.0}});
        SystemConfig big = SystemConfig::defaults();
        const OfdmFrontEnd bfe(big);
        TapBundle t = synth_taps(s, big, 1);
        const IrsProfile p = make_irs_profile(big.n_irs_elements, big.n_symbols, 2);
        const ReceivedSignal a = simulate_rx(t, p, bfe, 3, 0.0);
        for (auto &v : t.aia)
            for (auto &e : v)
                e *= 7.0;
        const ReceivedSignal b = simulate_rx(t, p, bfe, 3, 0.0);
        CHECK(a.y[0][0] == b.y[0][0]);
        CHECK_FALSE(a.y[0][1] == b.y[0][1]);
    }

    SUBCASE("normalized noise keeps its variance")
    {
        SystemConfig wide = SystemConfig::defaults();
        const OfdmFrontEnd wfe(wide);
        TapBundle t = synth_taps(scene({}), wide, 1);
        for (std::size_t m = 0; m < 2; ++m)
            for (auto &e : t.aia[m])
                e.setZero();
        const double var = 2.5;
        const ReceivedSignal rx = simulate_rx(t, make_irs_profile(wide.n_irs_elements, wide.n_symbols, 1), wfe, 9, var);
        double acc = 0.0;
        long count = 0;
        for (std::size_t m = 0; m < 2; ++m)
            for (const auto &v : rx.ybar[m])
            {
                acc += v.squaredNorm();
                count += v.size();
            }
        // 14336 samples: relative standard error about 0.8 %
        CHECK(acc / static_cast<double>(count) == doctest::Approx(var).epsilon(0.04));
        CHECK(rx.noise_var == var);
    }

    SUBCASE("deterministic per seed, fresh noise per seed")
    {
        const TapBundle t = synth_taps(scene({{-70.0, 0.0}}), SystemConfig::defaults(), 1);
        const OfdmFrontEnd dfe(SystemConfig::defaults());
        const IrsProfile p = make_irs_profile(64, 7, 1);
        const ReceivedSignal a = simulate_rx(t, p, dfe, 11), b = simulate_rx(t, p, dfe, 11), d = simulate_rx(t, p, dfe, 12);
        CHECK(a.y[1][3] == b.y[1][3]);
        CHECK_FALSE(a.y[1][3] == d.y[1][3]);
        CHECK(a.noise_var == doctest::Approx(SystemConfig::defaults().noise_var_mw()));
    }
}

TEST_CASE("front end validates its configuration")
{
    SystemConfig c = small_config();
    c.subcarriers[0].push_back(2);
    CHECK_THROWS_AS(OfdmFrontEnd{c}, ConfigError);
}

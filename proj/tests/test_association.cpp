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

#include "trilat/association.hpp"
#include "trilat/error.hpp"
#include "trilat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace trilat;

namespace {

Scenario scene(std::vector<Point2D> targets)
{
    return Scenario{{Point2D{-100.0, 0.0}, Point2D{100.0, 0.0}}, Point2D{0.0, 40.0}, std::move(targets)};
}

std::vector<int> iota(long n)
{
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

// Exact (unquantized) sorted sets for a scene.
RangeSets exact_sets(const Scenario &s)
{
    const RangeTruth d = distances(s);
    RangeSets r;
    for (std::size_t m = 0; m < 2; ++m)
    {
        r.d_at[m] = d.d_at[m];
        r.d_aita[m] = d.d_aita[m];
        std::sort(r.d_at[m].begin(), r.d_at[m].end());
        std::sort(r.d_aita[m].begin(), r.d_aita[m].end());
    }
    return r;
}

// Every quotiented association, lexicographic in (lambda[1], mu[0], mu[1]).
std::vector<Association> brute_force(long K)
{
    std::vector<Association> out;
    std::vector<int> l1 = iota(K);
    do
    {
        std::vector<int> m0 = iota(K);
        do
        {
            std::vector<int> m1 = iota(K);
            do
                out.push_back(Association{{iota(K), l1}, {m0, m1}});
            while (std::next_permutation(m1.begin(), m1.end()));
        } while (std::next_permutation(m0.begin(), m0.end()));
    } while (std::next_permutation(l1.begin(), l1.end()));
    return out;
}

TargetRanges exact_ranges(const Point2D &p, const Anchors &a)
{
    TargetRanges r;
    for (std::size_t m = 0; m < 2; ++m)
    {
        r.d_at[m] = distance(p, a.bs[m]);
        r.d_it[m] = distance(p, a.irs);
        r.var_at[m] = 0.375 * 0.375 / 12.0;
        r.var_it[m] = 0.375 * 0.375 / 12.0 + 0.75 * 0.75 / 12.0;
    }
    return r;
}

} // namespace

TEST_CASE("irs_range arithmetic")
{
    RangeSets r;
    for (std::size_t m = 0; m < 2; ++m)
    {
        r.d_at[m] = {29.8125};
        r.d_aita[m] = {258.375};
    }
    const std::array<double, 2> d_ai{std::sqrt(11600.0), std::sqrt(11600.0)};
    const Association a{{std::vector<int>{0}, std::vector<int>{0}}, {std::vector<int>{0}, std::vector<int>{0}}};
    // 258.375 - 29.8125 - 107.70329614...
    CHECK(irs_range(r, a, 0, 0, d_ai) == doctest::Approx(120.85920386).epsilon(1e-9));
    CHECK(irs_range(r, a, 0, 0, d_ai) == 258.375 - 29.8125 - std::sqrt(11600.0));
}

TEST_CASE("irs_range: symmetric fabrication")
{
    RangeSets r;
    r.d_at = {std::vector<double>{50.0}, std::vector<double>{60.0}};
    r.d_aita = {std::vector<double>{160.0}, std::vector<double>{190.0}};
    const Association a{{std::vector<int>{0}, std::vector<int>{0}}, {std::vector<int>{0}, std::vector<int>{0}}};
    CHECK(irs_range(r, a, 0, 0, {100.0, 120.0}) == 10.0);
    CHECK(irs_range(r, a, 1, 0, {100.0, 120.0}) == 10.0);
}

TEST_CASE("irs_range on quantized truth stays within the propagated half-widths")
{
    const SystemConfig c = SystemConfig::defaults();
    for (std::uint64_t seed = 1; seed <= 60; ++seed)
    {
        const Scenario s = sample_scenario(seed, 3, Placement{}, c);
        const TruthAssociation t = truth_association(s, c);
        const Anchors anchors = Anchors::from(s);
        const RangeTruth d = distances(s);
        for (int k = 0; k < 3; ++k)
        {
            const auto j = static_cast<std::size_t>(t.target_of_label[static_cast<std::size_t>(k)]);
            for (int m = 0; m < 2; ++m)
                CHECK(std::abs(irs_range(t.sets, t.association, m, k, anchors.d_ai) - d.d_it[j]) <= 0.5625 + 1e-12);
        }
    }
}

TEST_CASE("association counting and feasibility")
{
    CHECK(association_count(1) == 1);
    CHECK(association_count(2) == 8);
    CHECK(association_count(3) == 216);
    CHECK(association_count(5) == 1728000);
    const Association ok{{iota(3), std::vector<int>{2, 0, 1}}, {std::vector<int>{1, 2, 0}, iota(3)}};
    CHECK(is_permutation_feasible(ok, 3));
    Association bad = ok;
    bad.mu[1] = {0, 0, 1};
    CHECK_FALSE(is_permutation_feasible(bad, 3));
    bad = ok;
    bad.lambda[1] = {0, 1};
    CHECK_FALSE(is_permutation_feasible(bad, 3));
    bad = ok;
    bad.mu[0] = {0, 1, 3};
    CHECK_FALSE(is_permutation_feasible(bad, 3));
}

TEST_CASE("enumerate_feasible")
{
    const std::array<double, 2> d_ai{100.0, 120.0};

    SUBCASE("single target")
    {
        RangeSets r;
        r.d_at = {std::vector<double>{50.0}, std::vector<double>{60.0}};
        r.d_aita = {std::vector<double>{160.0}, std::vector<double>{190.5}};
        CHECK(enumerate_feasible(r, d_ai, {1.5}).size() == 1);
        CHECK_THROWS_AS(enumerate_feasible(r, d_ai, {0.1}), NoConsistentAssociationError);
    }

    SUBCASE("two targets with IRS ranges 10 and 40")
    {
        // target A: BS ranges 50 / 70, IRS range 10; target B: 65 / 55, IRS range 40
        RangeSets r;
        r.d_at = {std::vector<double>{50.0, 65.0}, std::vector<double>{55.0, 70.0}};
        r.d_aita = {std::vector<double>{160.0, 205.0}, std::vector<double>{200.0, 215.0}};
        const std::vector<double> tau{1.5, 1.5};
        const auto got = enumerate_feasible(r, d_ai, tau);

        std::vector<Association> expect;
        for (const auto &a : brute_force(2))
        {
            bool keep = true;
            for (int k = 0; k < 2; ++k)
                keep = keep && std::abs(irs_range(r, a, 0, k, d_ai) - irs_range(r, a, 1, k, d_ai)) <= 1.5;
            if (keep)
                expect.push_back(a);
        }
        CHECK(got == expect);
        const Association truth{{iota(2), std::vector<int>{1, 0}}, {iota(2), iota(2)}};
        CHECK(std::find(got.begin(), got.end(), truth) != got.end());
        for (const auto &a : got)
            for (int k = 0; k < 2; ++k)
                CHECK(std::abs(irs_range(r, a, 0, k, d_ai) - irs_range(r, a, 1, k, d_ai)) <= 1.5);
        // swapping mu at BS 2 moves label 0's IRS range from 10 to 215 - 70 - 120 = 25
        Association swapped = truth;
        std::swap(swapped.mu[1][0], swapped.mu[1][1]);
        CHECK(irs_range(r, swapped, 1, 0, d_ai) == 25.0);
        CHECK(std::abs(irs_range(r, swapped, 0, 0, d_ai) - irs_range(r, swapped, 1, 0, d_ai)) == 15.0);
        CHECK(std::find(got.begin(), got.end(), swapped) == got.end());
    }

    SUBCASE("unbounded tau keeps all (K!)^3 candidates in brute-force order")
    {
        const SystemConfig c = SystemConfig::defaults();
        const Scenario s = sample_scenario(3, 3, Placement{}, c);
        const RangeSets r = oracle_ranges(s, c);
        const auto all = enumerate_feasible(r, Anchors::from(s).d_ai, std::vector<double>(3, 1e9));
        CHECK(all.size() == 216);
        CHECK(all == brute_force(3));
    }

    SUBCASE("pruning equals the brute-force filter on sampled scenes")
    {
        const SystemConfig c = SystemConfig::defaults();
        for (std::uint64_t seed = 1; seed <= 20; ++seed)
        {
            const Scenario s = sample_scenario(seed, 3, Placement{}, c);
            const RangeSets r = oracle_ranges(s, c);
            const auto dai = Anchors::from(s).d_ai;
            const std::vector<double> tau(3, 1.5);
            std::vector<Association> expect;
            for (const auto &a : brute_force(3))
                if (satisfies_pruning(r, a, dai, tau))
                    expect.push_back(a);
            CHECK(enumerate_feasible(r, dai, tau) == expect);
            CHECK(expect.size() < 216);
        }
    }
}

TEST_CASE("noise model")
{
    const NoiseModel n = NoiseModel::quantization(3, SystemConfig::defaults());
    for (std::size_t m = 0; m < 2; ++m)
    {
        REQUIRE(n.var_at[m].size() == 3);
        CHECK(n.var_at[m][0] == doctest::Approx(0.375 * 0.375 / 12.0));
        CHECK(n.var_it[m][2] == doctest::Approx(0.375 * 0.375 / 12.0 + 0.75 * 0.75 / 12.0));
    }
}

TEST_CASE("localize_target with exact ranges")
{
    const Anchors a = Anchors::from(scene({{0.0, 0.0}}));
    SUBCASE("target at (10, 50)")
    {
        const TargetRanges r = exact_ranges({10.0, 50.0}, a);
        CHECK(r.d_at[0] == doctest::Approx(120.8305).epsilon(1e-6));
        CHECK(r.d_at[1] == doctest::Approx(102.9563).epsilon(1e-6));
        CHECK(r.d_it[0] == doctest::Approx(14.1421).epsilon(1e-5));
        const PositionFit f = localize_target(r, a);
        CHECK(distance(f.position, {10.0, 50.0}) <= 1e-6);
        CHECK(f.cost <= 1e-12);
    }
    SUBCASE("target on the IRS")
    {
        const PositionFit f = localize_target(exact_ranges({0.0, 40.0}, a), a);
        CHECK(distance(f.position, {0.0, 40.0}) <= 1e-6);
    }
    SUBCASE("the IRS term picks the half-plane")
    {
        const TargetRanges r = exact_ranges({10.0, 50.0}, a);
        CHECK(target_cost({10.0, -50.0}, r, a) > 100.0);
        const PositionFit mirror = gauss_newton({10.0, -50.0}, r, a);
        const PositionFit best = localize_target(r, a);
        CHECK(best.cost < mirror.cost);
        CHECK(best.position.y > 0.0);
        const auto starts = initial_guesses(r, a);
        CHECK(starts[0].y == doctest::Approx(50.0).epsilon(1e-9));
        CHECK(starts[1].y == doctest::Approx(-50.0).epsilon(1e-9));
        CHECK(starts[2] == a.irs);
    }
}

TEST_CASE("residuals and cost")
{
    const Anchors a = Anchors::from(scene({{0.0, 0.0}}));
    const TargetRanges r = exact_ranges({5.0, 30.0}, a);
    const Point2D p{6.0, 28.0};
    const Eigen::Vector4d res = residuals(p, r, a);
    CHECK(res(0) == doctest::Approx((r.d_at[0] - distance(p, a.bs[0])) / std::sqrt(r.var_at[0])));
    CHECK(res(3) == doctest::Approx((r.d_it[1] - distance(p, a.irs)) / std::sqrt(r.var_it[1])));
    CHECK(target_cost(p, r, a) == doctest::Approx(res.squaredNorm()));
}

TEST_CASE("property: Jacobian matches central differences")
{
    const Anchors a = Anchors::from(scene({{0.0, 0.0}}));
    Rng rng(31);
    for (int i = 0; i < 100; ++i)
    {
        const Point2D p{160.0 * rng.uniform() - 80.0, 120.0 * rng.uniform() - 20.0};
        const TargetRanges r = exact_ranges({60.0 * rng.uniform() - 30.0, 40.0 + 60.0 * rng.uniform() - 30.0}, a);
        const Eigen::Matrix<double, 4, 2> J = residual_jacobian(p, r, a);
        Eigen::Matrix<double, 4, 2> fd;
        const double h = 1e-5;
        fd.col(0) = (residuals({p.x + h, p.y}, r, a) - residuals({p.x - h, p.y}, r, a)) / (2.0 * h);
        fd.col(1) = (residuals({p.x, p.y + h}, r, a) - residuals({p.x, p.y - h}, r, a)) / (2.0 * h);
        CHECK((J - fd).norm() / J.norm() < 1e-5);
    }
}

TEST_CASE("property: accepted Gauss-Newton steps never raise the cost")
{
    const Anchors a = Anchors::from(scene({{0.0, 0.0}}));
    Rng rng(32);
    for (int i = 0; i < 50; ++i)
    {
        TargetRanges r = exact_ranges({60.0 * rng.uniform() - 30.0, 10.0 + 60.0 * rng.uniform()}, a);
        for (std::size_t m = 0; m < 2; ++m)
        {
            r.d_at[m] += 0.3 * (rng.uniform() - 0.5);
            r.d_it[m] += 0.6 * (rng.uniform() - 0.5);
        }
        std::vector<double> trace;
        gauss_newton({200.0 * rng.uniform() - 100.0, 100.0 * rng.uniform() - 50.0}, r, a, {}, &trace);
        REQUIRE(!trace.empty());
        for (std::size_t j = 1; j < trace.size(); ++j)
            CHECK(trace[j] <= trace[j - 1]);
    }
}

TEST_CASE("solve")
{
    const SystemConfig c = SystemConfig::defaults();

    SUBCASE("one target: both modes agree")
    {
        const Scenario s = scene({{12.0, 55.0}});
        const RangeSets r = oracle_ranges(s, c);
        const Anchors a = Anchors::from(s);
        const NoiseModel n = NoiseModel::quantization(1, c);
        const auto p = solve(r, a, n, {1.5}, SearchMode::pruned);
        const auto e = solve(r, a, n, {1.5}, SearchMode::exhaustive);
        CHECK(p.cost == e.cost);
        CHECK(p.positions == e.positions);
        CHECK(p.association == e.association);
        CHECK(distance(p.positions[0], {12.0, 55.0}) < 1.0);
    }

    SUBCASE("noise-free fabricated K = 3: pruned = exhaustive = truth")
    {
        for (std::uint64_t seed = 1; seed <= 10; ++seed)
        {
            const Scenario s = sample_scenario(seed, 3, Placement{}, c);
            const RangeSets r = exact_sets(s);
            const Anchors a = Anchors::from(s);
            const NoiseModel n = NoiseModel::quantization(3, c);
            const std::vector<double> tau(3, 1.5);
            const auto p = solve(r, a, n, tau, SearchMode::pruned);
            const auto e = solve(r, a, n, tau, SearchMode::exhaustive);
            CHECK(p.association == e.association);
            CHECK(std::abs(p.cost - e.cost) <= 1e-9);
            CHECK(e.candidates == 216);
            CHECK(p.candidates < 216);
            // truth: every estimate lands on a target
            for (const auto &t : s.targets)
            {
                double best = 1e300;
                for (const auto &q : p.positions)
                    best = std::min(best, distance(q, t));
                CHECK(best <= 1e-6);
            }
            CHECK(satisfies_pruning(r, p.association, a.d_ai, tau));
            CHECK(is_permutation_feasible(p.association, 3));
            double sum = 0.0;
            for (double v : p.per_target_cost)
                sum += v;
            CHECK(p.cost == doctest::Approx(sum));
        }
    }

    SUBCASE("quantized truth: equal objective values in both modes")
    {
        for (std::uint64_t seed = 11; seed <= 30; ++seed)
        {
            const Scenario s = sample_scenario(seed, 3, Placement{}, c);
            const TruthAssociation t = truth_association(s, c);
            const Anchors a = Anchors::from(s);
            const std::vector<double> tau(3, 1.5);
            REQUIRE(satisfies_pruning(t.sets, t.association, a.d_ai, tau));
            const NoiseModel n = NoiseModel::quantization(3, c);
            const auto p = solve(t.sets, a, n, tau, SearchMode::pruned);
            const auto e = solve(t.sets, a, n, tau, SearchMode::exhaustive);
            CHECK(std::abs(p.cost - e.cost) <= 1e-6);
            CHECK(p.candidates <= e.candidates);
        }
    }

    SUBCASE("empty pruned set")
    {
        RangeSets r;
        r.d_at = {std::vector<double>{50.0}, std::vector<double>{60.0}};
        r.d_aita = {std::vector<double>{160.0}, std::vector<double>{250.0}};
        const Anchors a = Anchors::from(scene({{0.0, 0.0}}));
        CHECK_THROWS_AS(solve(r, a, NoiseModel::quantization(1, c), {1.5}, SearchMode::pruned),
                        NoConsistentAssociationError);
    }
}

TEST_CASE("relabeling targets leaves the (position, cost) pairs unchanged")
{
    const SystemConfig c = SystemConfig::defaults();
    const Scenario s = sample_scenario(5, 3, Placement{}, c);
    const TruthAssociation t = truth_association(s, c);
    const Anchors a = Anchors::from(s);
    const NoiseModel n = NoiseModel::quantization(3, c);
    const Localization base = localize(t.association, t.sets, a, n);
    const std::vector<int> perm{2, 0, 1};
    Association moved;
    for (std::size_t m = 0; m < 2; ++m)
        for (int k : perm)
        {
            moved.lambda[m].push_back(t.association.lambda[m][static_cast<std::size_t>(k)]);
            moved.mu[m].push_back(t.association.mu[m][static_cast<std::size_t>(k)]);
        }
    const Localization other = localize(moved, t.sets, a, n);
    CHECK(other.cost == doctest::Approx(base.cost).epsilon(1e-12));
    for (std::size_t j = 0; j < 3; ++j)
    {
        const auto k = static_cast<std::size_t>(perm[j]);
        CHECK(other.positions[j] == base.positions[k]);
        CHECK(other.per_target_cost[j] == base.per_target_cost[k]);
    }
}

TEST_CASE("truth association maps labels back to targets")
{
    const SystemConfig c = SystemConfig::defaults();
    const Scenario s = sample_scenario(8, 4, Placement{}, c);
    const TruthAssociation t = truth_association(s, c);
    CHECK(t.association.lambda[0] == iota(4));
    CHECK(is_permutation_feasible(t.association, 4));
    const RangeTruth d = distances(s);
    for (std::size_t k = 0; k < 4; ++k)
    {
        const auto j = static_cast<std::size_t>(t.target_of_label[k]);
        CHECK(std::abs(t.sets.d_at[1][static_cast<std::size_t>(t.association.lambda[1][k])] - d.d_at[1][j]) <= 0.1875);
        CHECK(std::abs(t.sets.d_aita[0][static_cast<std::size_t>(t.association.mu[0][k])] - d.d_aita[0][j]) <= 0.375);
    }
    CHECK_THROWS_AS(truth_association(scene({{0.0, 10.0}, {0.0, 10.0}}), c), std::invalid_argument);
}

TEST_CASE("search mode names")
{
    CHECK(std::string(to_string(SearchMode::pruned)) == "pruned");
    CHECK(parse_search_mode("exhaustive") == SearchMode::exhaustive);
    CHECK_THROWS_AS(parse_search_mode("greedy"), std::invalid_argument);
}

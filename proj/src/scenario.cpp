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

#include "trilat/scenario.hpp"

#include "trilat/error.hpp"
#include "trilat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace trilat {

double distance(const Point2D &a, const Point2D &b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

static bool finite(const Point2D &p)
{
    return std::isfinite(p.x) && std::isfinite(p.y);
}

void validate(const Scenario &scenario)
{
    if (scenario.targets.empty())
        throw std::invalid_argument("scenario needs at least one target");
    if (!finite(scenario.bs[0]) || !finite(scenario.bs[1]) || !finite(scenario.irs))
        throw std::invalid_argument("anchor coordinates must be finite");
    for (const auto &t : scenario.targets)
        if (!finite(t))
            throw std::invalid_argument("target coordinates must be finite");
    if (scenario.bs[0] == scenario.bs[1])
        throw std::invalid_argument("the two BS positions must be distinct");
    if (scenario.irs == scenario.bs[0] || scenario.irs == scenario.bs[1])
        throw std::invalid_argument("IRS position must differ from both BS positions");
}

double dbm_to_mw(double dbm)
{
    return std::pow(10.0, dbm / 10.0);
}

double mw_to_dbm(double mw)
{
    return 10.0 * std::log10(mw);
}

double SystemConfig::subcarrier_power_mw(int m) const
{
    const auto count = subcarriers[static_cast<std::size_t>(m)].size();
    return count == 0 ? 0.0 : tx_power_mw[static_cast<std::size_t>(m)] / static_cast<double>(count);
}

std::array<std::vector<long>, 2> make_allocation(long n_subcarriers, AllocationMode mode)
{
    std::array<std::vector<long>, 2> out;
    for (long n = 1; n <= n_subcarriers; ++n)
    {
        const int owner = mode == AllocationMode::interleaved ? static_cast<int>((n - 1) % 2)
                                                              : (n <= n_subcarriers / 2 ? 0 : 1);
        out[static_cast<std::size_t>(owner)].push_back(n);
    }
    return out;
}

SystemConfig SystemConfig::defaults()
{
    SystemConfig c;
    c.tx_power_mw = {dbm_to_mw(39.0), dbm_to_mw(39.0)};
    c.noise_psd_mw_hz = dbm_to_mw(-174.0);
    c.subcarriers = make_allocation(c.n_subcarriers, AllocationMode::interleaved);
    c.gain_ref = calibrate_gain_ref(c, 25.0);
    return c;
}

void validate(const SystemConfig &c)
{
    if (c.n_subcarriers <= 0)
        throw ConfigError("ofdm.n_subcarriers must be positive");
    if (!(c.subcarrier_spacing_hz > 0.0) || !std::isfinite(c.bandwidth_hz()))
        throw ConfigError("bandwidth B = N * subcarrier_spacing must be positive");
    if (c.n_symbols < 2)
        throw ConfigError("ofdm.n_symbols must be >= 2 (one IRS-off symbol plus at least one IRS-on symbol)");
    if (c.n_taps < 1)
        throw ConfigError("ofdm.n_taps must be >= 1");
    if (c.n_irs_elements < 1)
        throw ConfigError("irs.n_elements must be >= 1");
    for (int m = 0; m < 2; ++m)
    {
        if (!(c.tx_power_mw[static_cast<std::size_t>(m)] >= 0.0))
            throw ConfigError("transmit power must be non-negative");
    }
    if (!(c.noise_psd_mw_hz >= 0.0))
        throw ConfigError("noise PSD must be non-negative");
    if (!(c.gain_ref > 0.0) || !std::isfinite(c.gain_ref))
        throw ConfigError("gain reference must be positive and finite");

    std::vector<int> owner(static_cast<std::size_t>(c.n_subcarriers), -1);
    for (int m = 0; m < 2; ++m)
    {
        const auto &set = c.subcarriers[static_cast<std::size_t>(m)];
        if (set.empty())
            throw ConfigError("allocation: BS " + std::to_string(m + 1) + " owns no sub-carriers");
        for (std::size_t i = 0; i < set.size(); ++i)
        {
            const long n = set[i];
            if (n < 1 || n > c.n_subcarriers)
                throw ConfigError("allocation: sub-carrier " + std::to_string(n) + " outside 1.." +
                                  std::to_string(c.n_subcarriers));
            if (i > 0 && set[i - 1] >= n)
                throw ConfigError("allocation: sub-carriers of BS " + std::to_string(m + 1) +
                                  " must be strictly ascending");
            auto &o = owner[static_cast<std::size_t>(n - 1)];
            if (o != -1 && o != m)
                throw ConfigError("allocation: sub-carrier sets of BS 1 and BS 2 overlap (N1 and N2 must be "
                                  "disjoint); sub-carrier " +
                                  std::to_string(n) + " is assigned to both");
            o = m;
        }
    }
    for (long n = 1; n <= c.n_subcarriers; ++n)
        if (owner[static_cast<std::size_t>(n - 1)] == -1)
            throw ConfigError("allocation: N1 and N2 must cover 1..N; sub-carrier " + std::to_string(n) +
                              " is unassigned");
}

double calibrate_gain_ref(const SystemConfig &c, double ref_snr_db, double ref_distance_m, double ref_power_dbm)
{
    const double p_ref = dbm_to_mw(ref_power_dbm) / (static_cast<double>(c.n_subcarriers) / 2.0);
    const double snr = std::pow(10.0, ref_snr_db / 10.0);
    const double amplitude = std::sqrt(snr * c.noise_var_mw() / p_ref);
    return amplitude * ref_distance_m * ref_distance_m;
}

double bin_width(PathKind kind, const SystemConfig &config)
{
    const double w = kSpeedOfLight / config.bandwidth_hz();
    return kind == PathKind::bs_irs_target_bs ? w : w / 2.0;
}

Bin delay_bin(double distance_m, PathKind kind, const SystemConfig &config)
{
    if (!(distance_m > 0.0) || !std::isfinite(distance_m))
        throw std::invalid_argument("delay_bin: distance must be positive and finite");
    const Bin l = std::max<Bin>(1, static_cast<Bin>(std::ceil(distance_m / bin_width(kind, config))));
    if (l > config.n_taps)
        throw DelaySpreadError(distance_m, l, config.n_taps);
    return l;
}

double bin_midpoint(Bin l, PathKind kind, const SystemConfig &config)
{
    const double w = bin_width(kind, config);
    return static_cast<double>(l - 1) * w + w / 2.0;
}

RangeTruth distances(const Scenario &s)
{
    RangeTruth r;
    const auto k_count = s.targets.size();
    r.d_it.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k)
        r.d_it[k] = distance(s.targets[k], s.irs);
    for (std::size_t m = 0; m < 2; ++m)
    {
        r.d_ai[m] = distance(s.bs[m], s.irs);
        r.d_at[m].resize(k_count);
        r.d_aita[m].resize(k_count);
        for (std::size_t k = 0; k < k_count; ++k)
        {
            r.d_at[m][k] = distance(s.targets[k], s.bs[m]);
            r.d_aita[m][k] = r.d_ai[m] + r.d_it[k] + r.d_at[m][k];
        }
    }
    return r;
}

TrueBins true_bins(const Scenario &scenario, const SystemConfig &config)
{
    const RangeTruth r = distances(scenario);
    TrueBins b;
    for (std::size_t m = 0; m < 2; ++m)
    {
        b.aia[m] = delay_bin(r.d_ai[m], PathKind::bs_irs_bs, config);
        for (std::size_t k = 0; k < scenario.targets.size(); ++k)
        {
            b.at[m].push_back(delay_bin(r.d_at[m][k], PathKind::bs_target_bs, config));
            b.aita[m].push_back(delay_bin(r.d_aita[m][k], PathKind::bs_irs_target_bs, config));
        }
    }
    return b;
}

static bool collides(const TrueBins &b, long gap)
{
    for (std::size_t m = 0; m < 2; ++m)
    {
        std::vector<Bin> all = b.at[m];
        all.insert(all.end(), b.aita[m].begin(), b.aita[m].end());
        std::sort(all.begin(), all.end());
        for (std::size_t i = 1; i < all.size(); ++i)
            if (all[i] - all[i - 1] < gap)
                return true;
    }
    return false;
}

Scenario sample_scenario(std::uint64_t seed, long n_targets, const Placement &placement, const SystemConfig &config)
{
    if (n_targets < 1)
        throw std::invalid_argument("sample_scenario: K must be >= 1");
    if (!(placement.radius_m > 0.0))
        throw std::invalid_argument("sample_scenario: radius must be positive");
    if (placement.min_bin_gap < 1)
        throw std::invalid_argument("sample_scenario: min_bin_gap must be >= 1");

    Rng rng(seed);
    Scenario s;
    s.bs = placement.bs;
    s.irs = placement.irs;
    s.targets.resize(static_cast<std::size_t>(n_targets));
    validate(Scenario{s.bs, s.irs, {s.irs}});

    for (long attempt = 0; attempt <= placement.max_retries; ++attempt)
    {
        for (auto &t : s.targets)
        {
            const double r = placement.radius_m * std::sqrt(rng.uniform());
            const double a = 2.0 * std::numbers::pi * rng.uniform();
            t = {placement.irs.x + r * std::cos(a), placement.irs.y + r * std::sin(a)};
        }
        if (!collides(true_bins(s, config), placement.min_bin_gap))
            return s;
    }
    throw CongestedSceneError("congested scene: no collision-free placement of " + std::to_string(n_targets) +
                              " targets after " + std::to_string(placement.max_retries) + " retries");
}

} // namespace trilat

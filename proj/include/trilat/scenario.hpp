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

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace trilat {

// m/s, rounded: bin widths at 400 MHz come out as exactly 0.375 m and 0.75 m
inline constexpr double kSpeedOfLight = 3.0e8;

// Delay bins are 1-based throughout: bin l covers path lengths [(l-1)w, l*w].
using Bin = long;

struct Point2D
{
    double x = 0.0; // m
    double y = 0.0; // m

    friend bool operator==(const Point2D &, const Point2D &) = default;
};

double distance(const Point2D &a, const Point2D &b);

struct Scenario
{
    std::array<Point2D, 2> bs;
    Point2D irs;
    std::vector<Point2D> targets;
};

// Throws std::invalid_argument on empty targets, non-finite coordinates or collocated anchors.
void validate(const Scenario &scenario);

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

enum class AllocationMode
{
    interleaved, // odd sub-carriers -> BS 1, even -> BS 2
    contiguous,  // lower half -> BS 1, upper half -> BS 2
};

struct SystemConfig
{
    long n_subcarriers = 2048;
    double subcarrier_spacing_hz = 195312.5;
    long n_symbols = 7;
    std::array<double, 2> tx_power_mw{}; // total per BS, spread evenly over its sub-carriers
    double noise_psd_mw_hz = 0.0;
    long n_irs_elements = 64;
    long n_taps = 512;
    double carrier_freq_hz = 28e9;
    // 1-based sub-carrier indices owned by each BS, ascending.
    std::array<std::vector<long>, 2> subcarriers;
    // Path amplitude at 1 m; see calibrate_gain_ref.
    double gain_ref = 1.0;

    double bandwidth_hz() const { return static_cast<double>(n_subcarriers) * subcarrier_spacing_hz; }
    double noise_var_mw() const { return noise_psd_mw_hz * subcarrier_spacing_hz; }
    // Power on each owned sub-carrier of BS m.
    double subcarrier_power_mw(int m) const;

    // Defaults: 400 MHz at N = 2048, Q = 7, 39 dBm per BS, -174 dBm/Hz, interleaved
    // allocation, gain reference calibrated to 25 dB per-tap SNR at 100 m.
    static SystemConfig defaults();
};

std::array<std::vector<long>, 2> make_allocation(long n_subcarriers, AllocationMode mode);

// Throws ConfigError naming the violated invariant.
void validate(const SystemConfig &config);

// Amplitude at 1 m such that a BS-target-BS path of length ref_distance_m gives
// per-sub-carrier SNR ref_snr_db when the BS radiates ref_power_dbm over N/2 sub-carriers.
double calibrate_gain_ref(const SystemConfig &config, double ref_snr_db, double ref_distance_m = 100.0,
                          double ref_power_dbm = 39.0);

enum class PathKind
{
    bs_target_bs,     // round trip, bin width c0 / (2B)
    bs_irs_bs,        // round trip, bin width c0 / (2B)
    bs_irs_target_bs, // composed one-way length, bin width c0 / B
};

double bin_width(PathKind kind, const SystemConfig &config);

// Smallest l with (l-1)w <= d <= l*w; exact multiples fall in the lower bin.
// Throws DelaySpreadError if l > L.
Bin delay_bin(double distance_m, PathKind kind, const SystemConfig &config);

double bin_midpoint(Bin l, PathKind kind, const SystemConfig &config);

struct RangeTruth
{
    std::array<std::vector<double>, 2> d_at;   // [m][k]
    std::array<double, 2> d_ai{};              // [m]
    std::vector<double> d_it;                  // [k]
    std::array<std::vector<double>, 2> d_aita; // [m][k] = d_ai + d_it + d_at
};

RangeTruth distances(const Scenario &scenario);

struct TrueBins
{
    std::array<std::vector<Bin>, 2> at;   // [m][k]
    std::array<Bin, 2> aia{};             // [m]
    std::array<std::vector<Bin>, 2> aita; // [m][k]
};

TrueBins true_bins(const Scenario &scenario, const SystemConfig &config);

struct Placement
{
    std::array<Point2D, 2> bs{Point2D{-100.0, 0.0}, Point2D{100.0, 0.0}};
    Point2D irs{0.0, 40.0};
    double radius_m = 50.0;
    // Minimum separation (in bins) between target paths of one BS, within and
    // across the BS-target-BS and BS-IRS-target-BS dimensions.
    long min_bin_gap = 1;
    long max_retries = 10000;
};

// K targets uniform over the disc around the IRS; redraws the whole scene until
// no two target paths collide under placement.min_bin_gap.
Scenario sample_scenario(std::uint64_t seed, long n_targets, const Placement &placement,
                         const SystemConfig &config);

} // namespace trilat

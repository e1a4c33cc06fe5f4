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

#include "trilat/scenario.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace trilat {

// Length-L baseband channel; entry l-1 holds tap l.
using TapVector = Eigen::VectorXcd;

struct TapBundle
{
    std::array<TapVector, 2> ata;               // BS -> targets -> BS
    std::array<std::vector<TapVector>, 2> aia;  // [m][i] BS -> IRS element i -> BS
    std::array<std::vector<TapVector>, 2> aita; // [m][i] BS -> IRS element i -> targets -> BS
};

// Reflection coefficients phi(i, q). Symbol 0 is the IRS-off symbol.
struct IrsProfile
{
    Eigen::MatrixXcd phi; // I x Q
};

// Complex gain A0 * exp(j theta) / prod(segments); segments are clamped at 1 m,
// the reference distance of A0.
double path_amplitude(double gain_ref, std::initializer_list<double> segments_m);

TapBundle synth_taps(const Scenario &scenario, const SystemConfig &config, std::uint64_t seed);

// phi(i, 0) = 0, unit-modulus uniform phases elsewhere.
IrsProfile make_irs_profile(long n_elements, long n_symbols, std::uint64_t seed);

// h_m^(q) = h^ATA_m + sum_i phi(i, q) (h^AIA_{m,i} + h^AITA_{m,i}); m and q are 0-based.
TapVector compose_channel(const TapBundle &taps, const IrsProfile &irs, int m, long q);

// Unitary inverse DFT of sqrt(p) * s.
Eigen::VectorXcd ofdm_time_signal(const Eigen::VectorXcd &symbols, double power_mw);

// |N_m| x L matrix with E(n, l) = exp(-j 2 pi (N_m(n) - 1)(l - 1) / N).
Eigen::MatrixXcd delay_steering(const SystemConfig &config, int m);

// Per-configuration constants shared by every trial: steering matrices of both BSs.
class OfdmFrontEnd
{
public:
    explicit OfdmFrontEnd(SystemConfig config);

    const SystemConfig &config() const noexcept { return config_; }
    const Eigen::MatrixXcd &steering(int m) const { return steering_[static_cast<std::size_t>(m)]; }

private:
    SystemConfig config_;
    std::array<Eigen::MatrixXcd, 2> steering_;
};

struct ReceivedSignal
{
    std::array<std::vector<Eigen::VectorXcd>, 2> y;    // [m][q], length |N_m|
    std::array<std::vector<Eigen::VectorXcd>, 2> s;    // transmitted symbols on N_m
    std::array<std::vector<Eigen::VectorXcd>, 2> ybar; // y ./ s
    double noise_var = 0.0;                            // mW per sub-carrier
};

// Unit-modulus QPSK symbols and CN(0, noise_var) noise. Passing noise_var < 0
// uses the configured thermal noise.
ReceivedSignal simulate_rx(const TapBundle &taps, const IrsProfile &irs, const OfdmFrontEnd &frontend,
                           std::uint64_t seed, double noise_var = -1.0);

} // namespace trilat

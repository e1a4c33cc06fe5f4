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

#include "trilat/channel.hpp"

#include "trilat/error.hpp"
#include "trilat/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace trilat {

double path_amplitude(double gain_ref, std::initializer_list<double> segments_m)
{
    double denom = 1.0;
    for (double d : segments_m)
        denom *= std::max(d, 1.0);
    return gain_ref / denom;
}

TapBundle synth_taps(const Scenario &scenario, const SystemConfig &config, std::uint64_t seed)
{
    validate(Scenario{scenario.bs, scenario.irs, {scenario.irs}});
    const auto L = config.n_taps;
    const auto I = static_cast<std::size_t>(config.n_irs_elements);
    const RangeTruth r = distances(scenario);
    const auto K = scenario.targets.size();

    Rng rng(seed);
    TapBundle taps;
    for (std::size_t m = 0; m < 2; ++m)
    {
        taps.ata[m] = TapVector::Zero(L);
        for (std::size_t k = 0; k < K; ++k)
        {
            const Bin l = delay_bin(r.d_at[m][k], PathKind::bs_target_bs, config);
            const double a = path_amplitude(config.gain_ref, {r.d_at[m][k], r.d_at[m][k]});
            taps.ata[m](l - 1) += a * rng.unit_phase();
        }
    }
    for (std::size_t m = 0; m < 2; ++m)
    {
        const Bin l = delay_bin(r.d_ai[m], PathKind::bs_irs_bs, config);
        const double a = path_amplitude(config.gain_ref, {r.d_ai[m], r.d_ai[m]});
        taps.aia[m].assign(I, TapVector::Zero(L));
        for (std::size_t i = 0; i < I; ++i)
            taps.aia[m][i](l - 1) = a * rng.unit_phase();
    }
    for (std::size_t m = 0; m < 2; ++m)
    {
        taps.aita[m].assign(I, TapVector::Zero(L));
        for (std::size_t k = 0; k < K; ++k)
        {
            const Bin l = delay_bin(r.d_aita[m][k], PathKind::bs_irs_target_bs, config);
            const double a = path_amplitude(config.gain_ref, {r.d_ai[m], r.d_it[k], r.d_at[m][k]});
            for (std::size_t i = 0; i < I; ++i)
                taps.aita[m][i](l - 1) += a * rng.unit_phase();
        }
    }
    return taps;
}

IrsProfile make_irs_profile(long n_elements, long n_symbols, std::uint64_t seed)
{
    if (n_elements < 1 || n_symbols < 1)
        throw std::invalid_argument("make_irs_profile: need at least one element and one symbol");
    Rng rng(seed);
    IrsProfile p;
    p.phi = Eigen::MatrixXcd::Zero(n_elements, n_symbols);
    for (long q = 1; q < n_symbols; ++q)
        for (long i = 0; i < n_elements; ++i)
            p.phi(i, q) = rng.unit_phase();
    return p;
}

TapVector compose_channel(const TapBundle &taps, const IrsProfile &irs, int m, long q)
{
    const auto mi = static_cast<std::size_t>(m);
    if (q < 0 || q >= irs.phi.cols())
        throw std::out_of_range("compose_channel: symbol index out of range");
    if (static_cast<Eigen::Index>(taps.aia[mi].size()) != irs.phi.rows())
        throw std::invalid_argument("compose_channel: IRS profile and taps disagree on element count");
    TapVector h = taps.ata[mi];
    for (std::size_t i = 0; i < taps.aia[mi].size(); ++i)
    {
        const auto phi = irs.phi(static_cast<Eigen::Index>(i), q);
        if (phi != 0.0)
            h += phi * (taps.aia[mi][i] + taps.aita[mi][i]);
    }
    return h;
}

Eigen::VectorXcd ofdm_time_signal(const Eigen::VectorXcd &symbols, double power_mw)
{
    const auto N = symbols.size();
    if (N == 0)
        return {};
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> in(symbols.data(), symbols.data() + N);
    std::vector<std::complex<double>> out;
    fft.inv(out, in); // includes the 1/N factor
    const double scale = std::sqrt(power_mw) * std::sqrt(static_cast<double>(N));
    Eigen::VectorXcd x(N);
    for (Eigen::Index n = 0; n < N; ++n)
        x(n) = scale * out[static_cast<std::size_t>(n)];
    return x;
}

Eigen::MatrixXcd delay_steering(const SystemConfig &config, int m)
{
    const auto &set = config.subcarriers[static_cast<std::size_t>(m)];
    const auto rows = static_cast<Eigen::Index>(set.size());
    const Eigen::Index L = config.n_taps;
    const long N = config.n_subcarriers;
    Eigen::MatrixXcd E(rows, L);
    for (Eigen::Index n = 0; n < rows; ++n)
    {
        const long sc = set[static_cast<std::size_t>(n)] - 1;
        for (Eigen::Index l = 0; l < L; ++l)
        {
            // reduce the phase index modulo N before scaling to keep the argument small
            const long k = (sc * static_cast<long>(l)) % N;
            E(n, l) = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(N));
        }
    }
    return E;
}

OfdmFrontEnd::OfdmFrontEnd(SystemConfig config) : config_(std::move(config))
{
    validate(config_);
    steering_[0] = delay_steering(config_, 0);
    steering_[1] = delay_steering(config_, 1);
}

ReceivedSignal simulate_rx(const TapBundle &taps, const IrsProfile &irs, const OfdmFrontEnd &frontend,
                           std::uint64_t seed, double noise_var)
{
    const SystemConfig &c = frontend.config();
    if (irs.phi.cols() != c.n_symbols)
        throw std::invalid_argument("simulate_rx: IRS profile must cover Q symbols");
    Rng rng(seed);
    ReceivedSignal rx;
    rx.noise_var = noise_var < 0.0 ? c.noise_var_mw() : noise_var;
    const std::complex<double> qpsk[4] = {std::polar(1.0, std::numbers::pi / 4), std::polar(1.0, 3 * std::numbers::pi / 4),
                                          std::polar(1.0, 5 * std::numbers::pi / 4),
                                          std::polar(1.0, 7 * std::numbers::pi / 4)};
    for (int m = 0; m < 2; ++m)
    {
        const auto mi = static_cast<std::size_t>(m);
        const Eigen::MatrixXcd &E = frontend.steering(m);
        const double amp = std::sqrt(c.subcarrier_power_mw(m));
        for (long q = 0; q < c.n_symbols; ++q)
        {
            const Eigen::VectorXcd freq = E * compose_channel(taps, irs, m, q);
            Eigen::VectorXcd s(freq.size()), y(freq.size()), ybar(freq.size());
            for (Eigen::Index n = 0; n < freq.size(); ++n)
            {
                s(n) = qpsk[rng.below(4)];
                const auto z = rx.noise_var > 0.0 ? rng.complex_normal(rx.noise_var) : std::complex<double>{};
                y(n) = amp * s(n) * freq(n) + z;
                ybar(n) = y(n) / s(n);
            }
            rx.s[mi].push_back(std::move(s));
            rx.y[mi].push_back(std::move(y));
            rx.ybar[mi].push_back(std::move(ybar));
        }
    }
    return rx;
}

} // namespace trilat

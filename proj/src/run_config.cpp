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

#include "trilat/run_config.hpp"

#include "trilat/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace trilat {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string &s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        out.push_back(trim(item));
    return out;
}

double to_double(const std::string &v)
{
    double x = 0.0;
    const auto *end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || ptr != end || !std::isfinite(x))
        throw ConfigError("expected a finite number, got '" + v + "'");
    return x;
}

long to_long(const std::string &v)
{
    long x = 0;
    const auto *end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("expected an integer, got '" + v + "'");
    return x;
}

std::uint64_t to_u64(const std::string &v)
{
    std::uint64_t x = 0;
    const auto *end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("expected an unsigned integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string &v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ConfigError("expected a boolean, got '" + v + "'");
}

std::optional<double> to_auto_double(const std::string &v)
{
    if (v == "auto")
        return std::nullopt;
    return to_double(v);
}

Point2D to_point(const std::string &v)
{
    const auto parts = split(v, ',');
    if (parts.size() != 2)
        throw ConfigError("expected 'x, y', got '" + v + "'");
    return {to_double(parts[0]), to_double(parts[1])};
}

// "1-1024, 2000" style lists of 1-based sub-carrier indices.
std::vector<long> to_index_set(const std::string &v)
{
    std::vector<long> out;
    for (const auto &part : split(v, ','))
    {
        if (part.empty())
            continue;
        const auto dash = part.find('-');
        if (dash == std::string::npos)
        {
            out.push_back(to_long(part));
            continue;
        }
        const long a = to_long(trim(part.substr(0, dash))), b = to_long(trim(part.substr(dash + 1)));
        if (b < a)
            throw ConfigError("descending range '" + part + "'");
        for (long n = a; n <= b; ++n)
            out.push_back(n);
    }
    return out;
}

std::string fmt(double v)
{
    // shortest text that round-trips
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string fmt_auto(const std::optional<double> &v)
{
    return v ? fmt(*v) : "auto";
}

std::string fmt_point(const Point2D &p)
{
    return fmt(p.x) + ", " + fmt(p.y);
}

std::string fmt_index_set(const std::vector<long> &set)
{
    std::string out;
    for (std::size_t i = 0; i < set.size();)
    {
        std::size_t j = i;
        while (j + 1 < set.size() && set[j + 1] == set[j] + 1)
            ++j;
        if (!out.empty())
            out += ", ";
        out += j == i ? std::to_string(set[i]) : std::to_string(set[i]) + "-" + std::to_string(set[j]);
        i = j + 1;
    }
    return out;
}

template <typename T, typename F>
std::string join(const std::vector<T> &v, F &&f)
{
    std::string out;
    for (const auto &x : v)
        out += (out.empty() ? "" : ", ") + f(x);
    return out;
}

struct Key
{
    const char *name;
    std::function<void(RunConfig &, const std::string &)> set;
    std::function<std::string(const RunConfig &)> get;
};

const std::vector<Key> &keys()
{
    using A = RunConfig::Allocation;
    static const std::vector<Key> table = {
        {"ofdm.n_subcarriers", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.system.n_subcarriers = to_long(v); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.system.n_subcarriers); }},
        {"ofdm.subcarrier_spacing_hz",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.system.subcarrier_spacing_hz = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.system.subcarrier_spacing_hz); }},
        {"ofdm.n_symbols", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.system.n_symbols = to_long(v); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.system.n_symbols); }},
        {"ofdm.n_taps", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.system.n_taps = to_long(v); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.system.n_taps); }},
        {"ofdm.carrier_freq_hz",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.system.carrier_freq_hz = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.system.carrier_freq_hz); }},
        {"ofdm.allocation",
         [](RunConfig &c, const std::string &v) {
             if (v == "interleaved")
                 c.allocation = A::interleaved;
             else if (v == "contiguous")
                 c.allocation = A::contiguous;
             else if (v == "explicit")
                 c.allocation = A::explicit_sets;
             else
                 throw ConfigError("expected interleaved|contiguous|explicit, got '" + v + "'");
         },
         [](const RunConfig &c) {
             return std::string(c.allocation == A::interleaved  ? "interleaved"
                                : c.allocation == A::contiguous ? "contiguous"
                                                                : "explicit");
         }},
        {"ofdm.subcarriers_bs1",
         [](RunConfig &c, const std::string &v) {
             c.allocation = A::explicit_sets;
             c.experiment.pipeline.system.subcarriers[0] = to_index_set(v);
         },
         [](const RunConfig &c) { return fmt_index_set(c.experiment.pipeline.system.subcarriers[0]); }},
        {"ofdm.subcarriers_bs2",
         [](RunConfig &c, const std::string &v) {
             c.allocation = A::explicit_sets;
             c.experiment.pipeline.system.subcarriers[1] = to_index_set(v);
         },
         [](const RunConfig &c) { return fmt_index_set(c.experiment.pipeline.system.subcarriers[1]); }},
        {"power.noise_psd_dbm_hz", [](RunConfig &c, const std::string &v) { c.noise_psd_dbm_hz = to_double(v); },
         [](const RunConfig &c) { return fmt(c.noise_psd_dbm_hz); }},
        {"gain.ref_snr_db", [](RunConfig &c, const std::string &v) { c.ref_snr_db = to_double(v); },
         [](const RunConfig &c) { return fmt(c.ref_snr_db); }},
        {"gain.ref_distance_m", [](RunConfig &c, const std::string &v) { c.ref_distance_m = to_double(v); },
         [](const RunConfig &c) { return fmt(c.ref_distance_m); }},
        {"gain.ref_power_dbm", [](RunConfig &c, const std::string &v) { c.ref_power_dbm = to_double(v); },
         [](const RunConfig &c) { return fmt(c.ref_power_dbm); }},
        {"irs.n_elements", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.system.n_irs_elements = to_long(v); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.system.n_irs_elements); }},
        {"scene.bs1", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.placement.bs[0] = to_point(v); },
         [](const RunConfig &c) { return fmt_point(c.experiment.pipeline.placement.bs[0]); }},
        {"scene.bs2", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.placement.bs[1] = to_point(v); },
         [](const RunConfig &c) { return fmt_point(c.experiment.pipeline.placement.bs[1]); }},
        {"scene.irs", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.placement.irs = to_point(v); },
         [](const RunConfig &c) { return fmt_point(c.experiment.pipeline.placement.irs); }},
        {"scene.radius_m", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.placement.radius_m = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.placement.radius_m); }},
        {"scene.min_bin_gap", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.placement.min_bin_gap = to_long(v); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.placement.min_bin_gap); }},
        {"scene.max_retries", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.placement.max_retries = to_long(v); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.placement.max_retries); }},
        {"lasso.rho", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.lasso.rho = to_auto_double(v); },
         [](const RunConfig &c) { return fmt_auto(c.experiment.pipeline.lasso.rho); }},
        {"lasso.rho_scale", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.lasso.rho_scale = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.lasso.rho_scale); }},
        {"lasso.delta", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.lasso.delta = to_auto_double(v); },
         [](const RunConfig &c) { return fmt_auto(c.experiment.pipeline.lasso.delta); }},
        {"lasso.delta_factor",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.lasso.delta_factor = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.lasso.delta_factor); }},
        {"lasso.max_iters",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.lasso.solver.max_iters = static_cast<int>(to_long(v)); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.lasso.solver.max_iters); }},
        {"lasso.tol", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.lasso.solver.tol = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.lasso.solver.tol); }},
        {"group.beta", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.group.beta = to_auto_double(v); },
         [](const RunConfig &c) { return fmt_auto(c.experiment.pipeline.group.beta); }},
        {"group.beta_scale", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.group.beta_scale = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.group.beta_scale); }},
        {"group.delta", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.group.delta = to_auto_double(v); },
         [](const RunConfig &c) { return fmt_auto(c.experiment.pipeline.group.delta); }},
        {"group.delta_factor",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.group.delta_factor = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.group.delta_factor); }},
        {"group.max_iters",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.group.solver.max_iters = static_cast<int>(to_long(v)); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.group.solver.max_iters); }},
        {"group.tol", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.group.solver.tol = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.group.solver.tol); }},
        {"assoc.tau_m", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.tau_m = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.tau_m); }},
        {"assoc.share_aia_bin", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.share_aia_bin = to_bool(v); },
         [](const RunConfig &c) { return std::string(c.experiment.pipeline.share_aia_bin ? "true" : "false"); }},
        {"assoc.var_at", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.var_at = to_auto_double(v); },
         [](const RunConfig &c) { return fmt_auto(c.experiment.pipeline.var_at); }},
        {"assoc.var_it", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.var_it = to_auto_double(v); },
         [](const RunConfig &c) { return fmt_auto(c.experiment.pipeline.var_it); }},
        {"assoc.error_radius_m",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.error_radius_m = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.error_radius_m); }},
        {"gn.max_iters",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.gauss_newton.max_iters = static_cast<int>(to_long(v)); },
         [](const RunConfig &c) { return std::to_string(c.experiment.pipeline.gauss_newton.max_iters); }},
        {"gn.step_tol_m", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.gauss_newton.step_tol_m = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.gauss_newton.step_tol_m); }},
        {"gn.initial_damping",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.gauss_newton.initial_damping = to_double(v); },
         [](const RunConfig &c) { return fmt(c.experiment.pipeline.gauss_newton.initial_damping); }},
        {"sweep.K",
         [](RunConfig &c, const std::string &v) {
             c.experiment.grid.n_targets.clear();
             for (const auto &p : split(v, ','))
                 c.experiment.grid.n_targets.push_back(to_long(p));
         },
         [](const RunConfig &c) { return join(c.experiment.grid.n_targets, [](long k) { return std::to_string(k); }); }},
        {"sweep.power_dbm",
         [](RunConfig &c, const std::string &v) {
             c.experiment.grid.power_dbm.clear();
             for (const auto &p : split(v, ','))
                 c.experiment.grid.power_dbm.push_back(to_double(p));
         },
         [](const RunConfig &c) { return join(c.experiment.grid.power_dbm, [](double p) { return fmt(p); }); }},
        {"sweep.modes",
         [](RunConfig &c, const std::string &v) {
             c.experiment.grid.modes.clear();
             for (const auto &p : split(v, ','))
             {
                 try
                 {
                     c.experiment.grid.modes.push_back(parse_search_mode(p));
                 }
                 catch (const std::invalid_argument &e)
                 {
                     throw ConfigError(e.what());
                 }
             }
         },
         [](const RunConfig &c) {
             return join(c.experiment.grid.modes, [](SearchMode m) { return std::string(to_string(m)); });
         }},
        {"sweep.n_trials", [](RunConfig &c, const std::string &v) { c.experiment.grid.n_trials = to_long(v); },
         [](const RunConfig &c) { return std::to_string(c.experiment.grid.n_trials); }},
        {"run.base_seed", [](RunConfig &c, const std::string &v) { c.experiment.base_seed = to_u64(v); },
         [](const RunConfig &c) { return std::to_string(c.experiment.base_seed); }},
        {"run.threads", [](RunConfig &c, const std::string &v) { c.experiment.threads = static_cast<unsigned>(to_long(v)); },
         [](const RunConfig &c) { return std::to_string(c.experiment.threads); }},
        {"run.oracle_supports",
         [](RunConfig &c, const std::string &v) { c.experiment.pipeline.oracle_supports = to_bool(v); },
         [](const RunConfig &c) { return std::string(c.experiment.pipeline.oracle_supports ? "true" : "false"); }},
        {"run.noiseless", [](RunConfig &c, const std::string &v) { c.experiment.pipeline.noiseless = to_bool(v); },
         [](const RunConfig &c) { return std::string(c.experiment.pipeline.noiseless ? "true" : "false"); }},
        {"output.dir", [](RunConfig &c, const std::string &v) { c.out_dir = v; },
         [](const RunConfig &c) { return c.out_dir.string(); }},
        {"output.record_timing", [](RunConfig &c, const std::string &v) { c.experiment.record_timing = to_bool(v); },
         [](const RunConfig &c) { return std::string(c.experiment.record_timing ? "true" : "false"); }},
        {"output.dump_channels", [](RunConfig &c, const std::string &v) { c.experiment.dump_channels = to_bool(v); },
         [](const RunConfig &c) { return std::string(c.experiment.dump_channels ? "true" : "false"); }},
    };
    return table;
}

void require(bool ok, const std::string &what)
{
    if (!ok)
        throw ConfigError(what);
}

} // namespace

RunConfig default_run_config()
{
    RunConfig c;
    finalize(c);
    return c;
}

void finalize(RunConfig &c)
{
    SystemConfig &s = c.experiment.pipeline.system;
    if (c.allocation != RunConfig::Allocation::explicit_sets)
    {
        require(s.n_subcarriers > 0, "ofdm.n_subcarriers must be positive");
        s.subcarriers = make_allocation(s.n_subcarriers, c.allocation == RunConfig::Allocation::interleaved
                                                             ? AllocationMode::interleaved
                                                             : AllocationMode::contiguous);
    }
    s.noise_psd_mw_hz = dbm_to_mw(c.noise_psd_dbm_hz);
    const auto &grid = c.experiment.grid;
    require(!grid.power_dbm.empty(), "sweep.power_dbm needs at least one value");
    s.tx_power_mw = {dbm_to_mw(grid.power_dbm.front()), dbm_to_mw(grid.power_dbm.front())};
    require(c.ref_distance_m > 0.0, "gain.ref_distance_m must be positive");
    if (s.n_subcarriers > 0 && s.subcarrier_spacing_hz > 0.0)
        s.gain_ref = calibrate_gain_ref(s, c.ref_snr_db, c.ref_distance_m, c.ref_power_dbm);
    validate(s);

    const auto &p = c.experiment.pipeline;
    require(p.placement.radius_m > 0.0, "scene.radius_m must be positive");
    require(p.placement.min_bin_gap >= 1, "scene.min_bin_gap must be >= 1");
    require(p.placement.max_retries >= 0, "scene.max_retries must be >= 0");
    require(!(p.placement.bs[0] == p.placement.bs[1]), "scene.bs1 and scene.bs2 must differ");
    require(!(p.placement.irs == p.placement.bs[0]) && !(p.placement.irs == p.placement.bs[1]),
            "scene.irs must differ from both BS positions");
    require(p.tau_m > 0.0, "assoc.tau_m must be positive");
    require(!p.var_at || *p.var_at > 0.0, "assoc.var_at must be positive");
    require(!p.var_it || *p.var_it > 0.0, "assoc.var_it must be positive");
    require(p.error_radius_m > 0.0, "assoc.error_radius_m must be positive");
    require(!p.lasso.rho || *p.lasso.rho >= 0.0, "lasso.rho must be >= 0");
    require(!p.group.beta || *p.group.beta >= 0.0, "group.beta must be >= 0");
    require(!p.lasso.delta || *p.lasso.delta > 0.0, "lasso.delta must be > 0");
    require(!p.group.delta || *p.group.delta > 0.0, "group.delta must be > 0");
    require(p.lasso.solver.max_iters > 0 && p.group.solver.max_iters > 0, "solver max_iters must be positive");
    require(p.gauss_newton.max_iters > 0, "gn.max_iters must be positive");
    require(!grid.n_targets.empty(), "sweep.K needs at least one value");
    for (long k : grid.n_targets)
        require(k >= 1 && k <= 8, "sweep.K values must be in 1..8");
    require(!grid.modes.empty(), "sweep.modes needs at least one value");
    require(grid.n_trials >= 1, "sweep.n_trials must be >= 1");
}

RunConfig parse_run_config(const std::string &text, RunConfig c)
{
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        const auto &table = keys();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Key &k) { return key == k.name; });
        if (it == table.end())
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        try
        {
            it->set(c, value);
        }
        catch (const ConfigError &e)
        {
            throw ConfigError("line " + std::to_string(line_no) + ": " + key + ": " + e.what());
        }
    }
    finalize(c);
    return c;
}

RunConfig load_run_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try
    {
        return parse_run_config(ss.str());
    }
    catch (const ConfigError &e)
    {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string format_run_config(const RunConfig &c)
{
    std::string out = "# effective configuration\n";
    for (const Key &k : keys())
    {
        const std::string name = k.name;
        if (c.allocation != RunConfig::Allocation::explicit_sets && name.rfind("ofdm.subcarriers_", 0) == 0)
            continue;
        out += name + " = " + k.get(c) + "\n";
    }
    return out;
}

} // namespace trilat

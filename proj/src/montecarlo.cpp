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

#include "trilat/montecarlo.hpp"

#include "trilat/error.hpp"
#include "trilat/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace trilat {

using json = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void mark_failed(TrialResult &r, const std::string &why)
{
    r.failure = why;
    r.estimates.clear();
    r.association.reset();
    r.errors_m.assign(static_cast<std::size_t>(r.n_targets), kInf);
    r.error_flags.assign(static_cast<std::size_t>(r.n_targets), true);
}

json point_json(const Point2D &p)
{
    return json::array({p.x, p.y});
}

Point2D point_from(const json &j)
{
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

void dump_channels(const std::filesystem::path &path, const TrialDebug &d)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "kind,m,q,index,re,im\n";
    const auto row = [&](const char *kind, std::size_t m, long q, Eigen::Index i, std::complex<double> v) {
        out << kind << ',' << m << ',' << q << ',' << i << ',' << format_double(v.real()) << ','
            << format_double(v.imag()) << '\n';
    };
    for (std::size_t m = 0; m < 2; ++m)
    {
        for (Eigen::Index l = 0; l < d.taps.ata[m].size(); ++l)
            if (d.taps.ata[m](l) != 0.0)
                row("h_ata", m, -1, l + 1, d.taps.ata[m](l));
        for (std::size_t q = 0; q < d.rx.y[m].size(); ++q)
            for (Eigen::Index n = 0; n < d.rx.y[m][q].size(); ++n)
                row("y", m, static_cast<long>(q), n, d.rx.y[m][q](n));
    }
}

} // namespace

NoiseModel noise_model(const PipelineConfig &c, long n)
{
    NoiseModel nm = NoiseModel::quantization(n, c.system);
    for (std::size_t m = 0; m < 2; ++m)
    {
        if (c.var_at)
            nm.var_at[m].assign(static_cast<std::size_t>(n), *c.var_at);
        if (c.var_it)
            nm.var_it[m].assign(static_cast<std::size_t>(n), *c.var_it);
    }
    return nm;
}

std::vector<int> match_estimates(const std::vector<Point2D> &truths, const std::vector<Point2D> &estimates)
{
    if (truths.size() != estimates.size())
        throw std::invalid_argument("match_estimates: sizes differ");
    if (truths.size() > 9)
        throw std::invalid_argument("match_estimates: at most 9 targets");
    std::vector<int> perm(truths.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_cost = kInf;
    do
    {
        double c = 0.0;
        for (std::size_t j = 0; j < truths.size(); ++j)
            c += distance(truths[j], estimates[static_cast<std::size_t>(perm[j])]);
        if (c < best_cost)
        {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

TrialResult run_trial(std::uint64_t seed, const PipelineConfig &config, const OfdmFrontEnd *frontend,
                      bool measure_time, TrialDebug *debug)
{
    TrialResult r;
    r.seed = seed;
    r.n_targets = config.n_targets;
    r.power_dbm = mw_to_dbm(config.system.tx_power_mw[0]);
    r.mode = config.mode;

    try
    {
        r.scenario = sample_scenario(derive_seed(seed, 1), config.n_targets, config.placement, config.system);
        const Anchors anchors = Anchors::from(r.scenario);

        RangeSets sets;
        if (config.oracle_supports)
        {
            sets = oracle_ranges(r.scenario, config.system, config.share_aia_bin);
        }
        else
        {
            std::optional<OfdmFrontEnd> local;
            if (!frontend)
                frontend = &local.emplace(config.system);
            TapBundle taps = synth_taps(r.scenario, config.system, derive_seed(seed, 2));
            IrsProfile irs = make_irs_profile(config.system.n_irs_elements, config.system.n_symbols,
                                              derive_seed(seed, 3));
            ReceivedSignal rx =
                simulate_rx(taps, irs, *frontend, derive_seed(seed, 4), config.noiseless ? 0.0 : -1.0);
            const PhaseOneResult phase1 = recover_supports(rx, *frontend, r.scenario, config.lasso, config.group);
            if (debug)
                *debug = TrialDebug{std::move(taps), std::move(irs), std::move(rx), phase1.supports};
            sets = extract_ranges(phase1.supports, config.system, config.share_aia_bin);
        }
        if (sets.size() != config.n_targets)
            throw InconsistentDetectionError("detected " + std::to_string(sets.size()) + " ranges per set, expected " +
                                             std::to_string(config.n_targets));

        const NoiseModel nm = noise_model(config, sets.size());
        const std::vector<double> tau(static_cast<std::size_t>(sets.size()), config.tau_m);

        const auto t0 = std::chrono::steady_clock::now();
        const LocalizationResult loc = solve(sets, anchors, nm, tau, config.mode, config.gauss_newton);
        const auto t1 = std::chrono::steady_clock::now();
        if (measure_time)
            r.solve_time_s = std::chrono::duration<double>(t1 - t0).count();

        r.association = loc.association;
        r.candidates = loc.candidates;
        const auto pairing = match_estimates(r.scenario.targets, loc.positions);
        for (std::size_t j = 0; j < r.scenario.targets.size(); ++j)
        {
            const Point2D &est = loc.positions[static_cast<std::size_t>(pairing[j])];
            r.estimates.push_back(est);
            const double e = distance(est, r.scenario.targets[j]);
            r.errors_m.push_back(e);
            r.error_flags.push_back(!(e <= config.error_radius_m));
        }
    }
    catch (const Error &e)
    {
        mark_failed(r, e.what());
    }
    return r;
}

double error_probability(const std::vector<TrialResult> &results)
{
    if (results.empty())
        throw std::invalid_argument("error_probability: no trials");
    std::size_t flagged = 0, total = 0;
    for (const auto &r : results)
    {
        total += r.error_flags.size();
        flagged += static_cast<std::size_t>(std::count(r.error_flags.begin(), r.error_flags.end(), true));
    }
    if (total == 0)
        throw std::invalid_argument("error_probability: no targets");
    return static_cast<double>(flagged) / static_cast<double>(total);
}

std::uint64_t trial_seed(std::uint64_t base_seed, long n_targets, std::uint64_t index)
{
    return derive_seed(base_seed, static_cast<std::uint64_t>(n_targets), index);
}

ExperimentSummary summarize(const std::vector<TrialResult> &results)
{
    using Key = std::tuple<long, double, int>;
    std::vector<Key> order;
    std::map<Key, std::vector<const TrialResult *>> groups;
    for (const auto &r : results)
    {
        const Key key{r.n_targets, r.power_dbm, static_cast<int>(r.mode)};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted)
            order.push_back(key);
        it->second.push_back(&r);
    }

    ExperimentSummary s;
    long flagged_all = 0, targets_all = 0;
    for (const Key &key : order)
    {
        auto group = groups.at(key);
        std::sort(group.begin(), group.end(),
                  [](const TrialResult *a, const TrialResult *b) { return a->index < b->index; });
        SummaryRow row;
        row.n_targets = std::get<0>(key);
        row.power_dbm = std::get<1>(key);
        row.mode = static_cast<SearchMode>(std::get<2>(key));
        row.n_trials = static_cast<long>(group.size());
        std::vector<double> finite;
        long targets = 0;
        double time_sum = 0.0;
        long timed = 0;
        for (const TrialResult *r : group)
        {
            if (r->failure)
                ++row.n_failed_trials;
            targets += static_cast<long>(r->error_flags.size());
            row.n_target_errors += static_cast<long>(std::count(r->error_flags.begin(), r->error_flags.end(), true));
            for (double e : r->errors_m)
                if (std::isfinite(e))
                    finite.push_back(e);
            if (r->solve_time_s)
            {
                time_sum += *r->solve_time_s;
                ++timed;
            }
        }
        row.error_prob = targets > 0 ? static_cast<double>(row.n_target_errors) / static_cast<double>(targets) : 0.0;
        if (!finite.empty())
        {
            row.mean_err_m = std::accumulate(finite.begin(), finite.end(), 0.0) / static_cast<double>(finite.size());
            std::sort(finite.begin(), finite.end());
            const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(finite.size())));
            row.p95_err_m = finite[std::max<std::size_t>(rank, 1) - 1];
        }
        if (timed > 0)
            row.mean_solve_s = time_sum / static_cast<double>(timed);
        flagged_all += row.n_target_errors;
        targets_all += targets;
        s.n_trials += row.n_trials;
        s.rows.push_back(row);
    }
    s.error_prob = targets_all > 0 ? static_cast<double>(flagged_all) / static_cast<double>(targets_all) : 0.0;
    return s;
}

ExperimentOutcome run_experiment(const ExperimentConfig &config, const std::optional<std::filesystem::path> &out_dir)
{
    const SweepGrid &g = config.grid;
    if (g.n_targets.empty() || g.power_dbm.empty() || g.modes.empty() || g.n_trials < 1)
        throw ConfigError("sweep grid must have at least one K, power, mode and trial");

    struct Job
    {
        std::size_t point;
        std::uint64_t index;
    };
    std::vector<PipelineConfig> points;
    std::vector<double> point_power;
    for (long K : g.n_targets)
        for (double p : g.power_dbm)
            for (SearchMode mode : g.modes)
            {
                PipelineConfig pc = config.pipeline;
                pc.n_targets = K;
                pc.mode = mode;
                pc.system.tx_power_mw = {dbm_to_mw(p), dbm_to_mw(p)};
                validate(pc.system);
                points.push_back(std::move(pc));
                point_power.push_back(p);
            }

    std::vector<std::optional<OfdmFrontEnd>> frontends(points.size());
    if (!config.pipeline.oracle_supports)
        for (std::size_t i = 0; i < points.size(); ++i)
            frontends[i].emplace(points[i].system);

    std::vector<Job> jobs;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (long t = 0; t < g.n_trials; ++t)
            jobs.push_back({i, static_cast<std::uint64_t>(t)});

    std::optional<std::filesystem::path> channel_dir;
    if (out_dir)
    {
        std::filesystem::create_directories(*out_dir);
        if (config.dump_channels && !config.pipeline.oracle_supports)
        {
            channel_dir = *out_dir / "channels";
            std::filesystem::create_directories(*channel_dir);
        }
    }

    ExperimentOutcome out;
    out.trials.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (std::size_t j = next++; j < jobs.size(); j = next++)
        {
            const Job &job = jobs[j];
            const PipelineConfig &pc = points[job.point];
            TrialDebug debug;
            const OfdmFrontEnd *fe = frontends[job.point] ? &*frontends[job.point] : nullptr;
            TrialResult r = run_trial(trial_seed(config.base_seed, pc.n_targets, job.index), pc, fe,
                                      config.record_timing, channel_dir ? &debug : nullptr);
            r.index = job.index;
            r.power_dbm = point_power[job.point];
            if (channel_dir && !r.failure)
                dump_channels(*channel_dir / ("trial_" + std::to_string(j) + ".csv"), debug);
            out.trials[j] = std::move(r);
        }
    };
    unsigned n_threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, jobs.size()));
    if (n_threads <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }

    out.summary = summarize(out.trials);
    if (out_dir)
    {
        write_records(*out_dir / "records.jsonl", out.trials);
        write_summary_csv(*out_dir / "summary.csv", out.summary);
    }
    return out;
}

void write_records(const std::filesystem::path &path, const std::vector<TrialResult> &results)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write records file " + path.string());
    for (const auto &r : results)
    {
        json j;
        j["trial"] = r.index;
        j["seed"] = r.seed;
        j["K"] = r.n_targets;
        j["power_dbm"] = r.power_dbm;
        j["mode"] = to_string(r.mode);
        j["bs1"] = point_json(r.scenario.bs[0]);
        j["bs2"] = point_json(r.scenario.bs[1]);
        j["irs"] = point_json(r.scenario.irs);
        j["targets"] = json::array();
        for (const auto &p : r.scenario.targets)
            j["targets"].push_back(point_json(p));
        j["estimates"] = json::array();
        for (const auto &p : r.estimates)
            j["estimates"].push_back(point_json(p));
        j["errors_m"] = json::array();
        for (double e : r.errors_m)
            j["errors_m"].push_back(std::isfinite(e) ? json(e) : json(nullptr));
        j["error_flags"] = r.error_flags;
        if (r.association)
            j["association"] = {{"lambda", r.association->lambda}, {"mu", r.association->mu}};
        else
            j["association"] = nullptr;
        j["candidates"] = r.candidates;
        j["failure"] = r.failure ? json(*r.failure) : json(nullptr);
        if (r.solve_time_s)
            j["solve_time_s"] = *r.solve_time_s;
        out << j.dump() << '\n';
    }
    if (!out)
        throw std::runtime_error("failed writing records file " + path.string());
}

std::vector<TrialResult> read_records(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read records file " + path.string());
    std::vector<TrialResult> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
            continue;
        try
        {
            const json j = json::parse(line);
            TrialResult r;
            r.index = j.at("trial").get<std::uint64_t>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.n_targets = j.at("K").get<long>();
            r.power_dbm = j.at("power_dbm").get<double>();
            r.mode = parse_search_mode(j.at("mode").get<std::string>());
            r.scenario.bs = {point_from(j.at("bs1")), point_from(j.at("bs2"))};
            r.scenario.irs = point_from(j.at("irs"));
            for (const auto &p : j.at("targets"))
                r.scenario.targets.push_back(point_from(p));
            for (const auto &p : j.at("estimates"))
                r.estimates.push_back(point_from(p));
            for (const auto &e : j.at("errors_m"))
                r.errors_m.push_back(e.is_null() ? kInf : e.get<double>());
            r.error_flags = j.at("error_flags").get<std::vector<bool>>();
            if (!j.at("association").is_null())
            {
                Association a;
                a.lambda = j.at("association").at("lambda").get<std::array<std::vector<int>, 2>>();
                a.mu = j.at("association").at("mu").get<std::array<std::vector<int>, 2>>();
                r.association = a;
            }
            r.candidates = j.at("candidates").get<std::uint64_t>();
            if (!j.at("failure").is_null())
                r.failure = j.at("failure").get<std::string>();
            if (j.contains("solve_time_s"))
                r.solve_time_s = j.at("solve_time_s").get<double>();
            out.push_back(std::move(r));
        }
        catch (const json::exception &e)
        {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        }
    }
    return out;
}

std::string summary_csv(const ExperimentSummary &s)
{
    std::ostringstream out;
    out << "K,power_dBm,mode,n_trials,error_prob,mean_err_m,p95_err_m,mean_solve_s\n";
    for (const auto &r : s.rows)
    {
        out << r.n_targets << ',' << format_double(r.power_dbm) << ',' << to_string(r.mode) << ',' << r.n_trials << ','
            << format_double(r.error_prob) << ',' << format_double(r.mean_err_m) << ','
            << format_double(r.p95_err_m) << ',' << (r.mean_solve_s ? format_double(*r.mean_solve_s) : "") << '\n';
    }
    return out.str();
}

void write_summary_csv(const std::filesystem::path &path, const ExperimentSummary &summary)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write summary table " + path.string());
    out << summary_csv(summary);
}

void write_summary_json(const std::filesystem::path &path, const ExperimentSummary &s, const std::string &config_text)
{
    json j;
    j["config"] = config_text;
    j["n_trials"] = s.n_trials;
    j["error_prob"] = s.error_prob;
    j["rows"] = json::array();
    for (const auto &r : s.rows)
    {
        json row = {{"K", r.n_targets},
                    {"power_dbm", r.power_dbm},
                    {"mode", to_string(r.mode)},
                    {"n_trials", r.n_trials},
                    {"n_failed_trials", r.n_failed_trials},
                    {"n_target_errors", r.n_target_errors},
                    {"error_prob", r.error_prob},
                    {"mean_err_m", r.mean_err_m},
                    {"p95_err_m", r.p95_err_m}};
        row["mean_solve_s"] = r.mean_solve_s ? json(*r.mean_solve_s) : json(nullptr);
        j["rows"].push_back(row);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write summary document " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace trilat

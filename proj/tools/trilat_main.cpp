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

// trilat command-line front end.
//
//   trilat simulate     [--config FILE|default] [--seed S] [--trials N] [--mode M] [--out DIR]
//   trilat sweep        same flags; runs every (K, power, mode) point of the config
//   trilat oracle-check --K 3 --trials 50
//   trilat plot-data    --records DIR/records.jsonl [--out summary.csv]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include "trilat/association.hpp"
#include "trilat/error.hpp"
#include "trilat/montecarlo.hpp"
#include "trilat/rng.hpp"
#include "trilat/run_config.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonFlags
{
    std::string config = "default";
    std::optional<std::uint64_t> seed;
    std::optional<long> trials;
    std::optional<std::string> mode;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    std::vector<std::string> overrides;
    bool timing = false;
    bool dump_channels = false;
};

void add_common(CLI::App *cmd, CommonFlags &f)
{
    cmd->add_option("--config", f.config, "config file, or 'default'");
    cmd->add_option("--seed", f.seed, "base seed (TRILAT_SEED overrides the config, --seed overrides both)");
    cmd->add_option("--trials", f.trials, "trials per grid point")->check(CLI::PositiveNumber);
    cmd->add_option("--mode", f.mode, "association search: pruned|exhaustive")
        ->check(CLI::IsMember({"pruned", "exhaustive"}));
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--threads", f.threads, "worker threads (0: all cores)");
    cmd->add_option("--set", f.overrides, "extra 'key=value' config line (repeatable)");
    cmd->add_flag("--timing", f.timing, "record Phase-II solve times (makes records machine-dependent)");
    cmd->add_flag("--dump-channels", f.dump_channels, "write per-trial channel taps and supports");
}

trilat::RunConfig resolve(const CommonFlags &f)
{
    using namespace trilat;
    RunConfig c = f.config == "default" ? default_run_config() : load_run_config(f.config);

    std::string extra;
    if (const char *env = std::getenv("TRILAT_SEED"))
        extra += std::string("run.base_seed = ") + env + "\n";
    for (const auto &line : f.overrides)
        extra += line + "\n";
    if (!extra.empty())
        c = parse_run_config(extra, c);

    if (f.seed)
        c.experiment.base_seed = *f.seed;
    if (f.trials)
        c.experiment.grid.n_trials = *f.trials;
    if (f.mode)
        c.experiment.grid.modes = {parse_search_mode(*f.mode)};
    if (f.out)
        c.out_dir = *f.out;
    if (f.threads)
        c.experiment.threads = *f.threads;
    if (f.timing)
        c.experiment.record_timing = true;
    if (f.dump_channels)
        c.experiment.dump_channels = true;
    finalize(c);
    return c;
}

void print_summary(const trilat::ExperimentSummary &s)
{
    std::cout << trilat::summary_csv(s);
    std::printf("overall error probability %.4f over %ld trials\n", s.error_prob, s.n_trials);
}

int run_grid(trilat::RunConfig c)
{
    using namespace trilat;
    const std::string text = format_run_config(c);
    std::filesystem::create_directories(c.out_dir);
    {
        std::ofstream eff(c.out_dir / "effective_config.txt", std::ios::binary);
        if (!eff)
            throw std::runtime_error("cannot write " + (c.out_dir / "effective_config.txt").string());
        eff << text;
    }
    const ExperimentOutcome out = run_experiment(c.experiment, c.out_dir);
    write_summary_json(c.out_dir / "summary.json", out.summary, text);
    print_summary(out.summary);
    std::printf("wrote %s\n", c.out_dir.string().c_str());
    return 0;
}

int simulate(const CommonFlags &f)
{
    trilat::RunConfig c = resolve(f);
    // single configuration: first entry of each grid axis
    auto &g = c.experiment.grid;
    g.n_targets.resize(1);
    g.power_dbm.resize(1);
    g.modes.resize(1);
    return run_grid(std::move(c));
}

int sweep(const CommonFlags &f)
{
    return run_grid(resolve(f));
}

int oracle_check(const CommonFlags &f, long K)
{
    using namespace trilat;
    RunConfig c = resolve(f);
    if (K < 1 || K > 5)
        throw ConfigError("--K must be in 1..5 for the exhaustive audit");
    const PipelineConfig &pc = c.experiment.pipeline;
    const long n = c.experiment.grid.n_trials;

    long eligible = 0, agree = 0, skipped = 0;
    for (long t = 0; t < n; ++t)
    {
        const std::uint64_t seed = trial_seed(c.experiment.base_seed, K, static_cast<std::uint64_t>(t));
        const Scenario sc = sample_scenario(derive_seed(seed, 1), K, pc.placement, pc.system);
        const TruthAssociation truth = truth_association(sc, pc.system);
        const Anchors anchors = Anchors::from(sc);
        const std::vector<double> tau(static_cast<std::size_t>(K), pc.tau_m);
        if (!satisfies_pruning(truth.sets, truth.association, anchors.d_ai, tau))
        {
            ++skipped;
            continue;
        }
        ++eligible;
        const NoiseModel nm = noise_model(pc, K);
        const auto a = solve(truth.sets, anchors, nm, tau, SearchMode::pruned, pc.gauss_newton);
        const auto b = solve(truth.sets, anchors, nm, tau, SearchMode::exhaustive, pc.gauss_newton);
        if (std::abs(a.cost - b.cost) <= 1e-6)
            ++agree;
        else
            std::fprintf(stderr, "trial %ld: pruned cost %.12g, exhaustive cost %.12g\n", t, a.cost, b.cost);
    }
    const double rate = eligible ? static_cast<double>(agree) / static_cast<double>(eligible) : 1.0;
    std::printf("oracle-check K=%ld: %ld/%ld eligible trials agree (%.1f%%), %ld skipped\n", K, agree, eligible,
                100.0 * rate, skipped);
    return agree == eligible ? 0 : kExitRuntime;
}

int plot_data(const std::string &records, const std::optional<std::string> &out)
{
    const auto trials = trilat::read_records(records);
    const auto summary = trilat::summarize(trials);
    if (out)
        trilat::write_summary_csv(*out, summary);
    else
        std::cout << trilat::summary_csv(summary);
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"trilat: two-BS + IRS device-free trilateration simulator"};
    app.require_subcommand(1);

    CommonFlags sim_flags, sweep_flags, oracle_flags;
    auto *sim = app.add_subcommand("simulate", "run one configuration");
    add_common(sim, sim_flags);
    auto *swp = app.add_subcommand("sweep", "run the full (K, power, mode) grid");
    add_common(swp, sweep_flags);

    auto *oracle = app.add_subcommand("oracle-check", "pruned vs exhaustive association audit");
    add_common(oracle, oracle_flags);
    long oracle_k = 3;
    oracle->add_option("--K", oracle_k, "number of targets");

    auto *plot = app.add_subcommand("plot-data", "re-emit the summary table from stored records");
    std::string records;
    std::optional<std::string> plot_out;
    plot->add_option("--records", records, "records.jsonl written by simulate/sweep")->required();
    plot->add_option("--out", plot_out, "CSV path (default: stdout)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try
    {
        if (*sim)
            return simulate(sim_flags);
        if (*swp)
            return sweep(sweep_flags);
        if (*oracle)
        {
            if (!oracle_flags.trials)
                oracle_flags.trials = 50;
            return oracle_check(oracle_flags, oracle_k);
        }
        if (*plot)
            return plot_data(records, plot_out);
    }
    catch (const std::invalid_argument &e)
    {
        std::fprintf(stderr, "trilat: invalid configuration: %s\n", e.what());
        return kExitUsage;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "trilat: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}

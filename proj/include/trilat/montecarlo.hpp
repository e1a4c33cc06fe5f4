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

#include "trilat/association.hpp"
#include "trilat/channel.hpp"
#include "trilat/scenario.hpp"
#include "trilat/sparse_recovery.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace trilat {

struct PipelineConfig
{
    SystemConfig system = SystemConfig::defaults();
    Placement placement;
    LassoConfig lasso;
    GroupLassoConfig group;
    double tau_m = 1.5;
    bool share_aia_bin = true; // see extract_ranges
    std::optional<double> var_at; // overrides of the quantization noise model
    std::optional<double> var_it;
    GaussNewtonOptions gauss_newton;
    SearchMode mode = SearchMode::pruned;
    long n_targets = 3;
    bool oracle_supports = false; // skip sparse recovery, use quantized true ranges
    bool noiseless = false;       // sigma^2 = 0 in the received signals
    double error_radius_m = 1.0;
};

struct TrialResult
{
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    long n_targets = 0;
    double power_dbm = 0.0;
    SearchMode mode = SearchMode::pruned;
    Scenario scenario;
    std::vector<Point2D> estimates;          // matched to scenario.targets order; empty on failure
    std::optional<Association> association;
    std::vector<double> errors_m;            // +inf for failed trials
    std::vector<bool> error_flags;
    std::uint64_t candidates = 0;
    std::optional<double> solve_time_s;      // Phase-II wall clock, when measured
    std::optional<std::string> failure;
};

// Channel-level artifacts of one trial, for debugging dumps.
struct TrialDebug
{
    TapBundle taps;
    IrsProfile irs;
    ReceivedSignal rx;
    SupportSet supports;
};

// Quantization noise model for n targets, with the configured variance overrides applied.
NoiseModel noise_model(const PipelineConfig &config, long n_targets);

// Min-cost pairing of estimates to truths (estimates.size() == truths.size() <= 9);
// returns estimate index per truth.
std::vector<int> match_estimates(const std::vector<Point2D> &truths, const std::vector<Point2D> &estimates);

// Full pipeline for one seed; pipeline errors are recorded in failure and count
// every target as an error.
TrialResult run_trial(std::uint64_t seed, const PipelineConfig &config, const OfdmFrontEnd *frontend = nullptr,
                      bool measure_time = false, TrialDebug *debug = nullptr);

// (# true error flags) / (# targets); throws std::invalid_argument on empty input.
double error_probability(const std::vector<TrialResult> &results);

struct SweepGrid
{
    std::vector<long> n_targets{3};
    std::vector<double> power_dbm{39.0};
    std::vector<SearchMode> modes{SearchMode::pruned};
    long n_trials = 1000;
};

struct ExperimentConfig
{
    PipelineConfig pipeline;
    SweepGrid grid;
    std::uint64_t base_seed = 1;
    unsigned threads = 0; // 0: hardware concurrency
    bool record_timing = false;
    bool dump_channels = false;
};

struct SummaryRow
{
    long n_targets = 0;
    double power_dbm = 0.0;
    SearchMode mode = SearchMode::pruned;
    long n_trials = 0;
    long n_failed_trials = 0;
    long n_target_errors = 0;
    double error_prob = 0.0;
    double mean_err_m = 0.0; // over targets with a finite error
    double p95_err_m = 0.0;
    std::optional<double> mean_solve_s;
};

struct ExperimentSummary
{
    std::vector<SummaryRow> rows;
    long n_trials = 0;
    double error_prob = 0.0;
};

// Seed of trial `index` at K targets; shared across power levels and modes so
// grid points see identical scenes and noise.
std::uint64_t trial_seed(std::uint64_t base_seed, long n_targets, std::uint64_t index);

// Rows in first-appearance order of (K, power, mode); independent of trial order
// within a group.
ExperimentSummary summarize(const std::vector<TrialResult> &results);

struct ExperimentOutcome
{
    std::vector<TrialResult> trials;
    ExperimentSummary summary;
};

// Runs the grid; when out_dir is given writes records.jsonl, summary.json,
// summary.csv (and channels/ when dump_channels).
ExperimentOutcome run_experiment(const ExperimentConfig &config,
                                 const std::optional<std::filesystem::path> &out_dir = std::nullopt);

void write_records(const std::filesystem::path &path, const std::vector<TrialResult> &results);
std::vector<TrialResult> read_records(const std::filesystem::path &path);
void write_summary_json(const std::filesystem::path &path, const ExperimentSummary &summary,
                        const std::string &config_text);
void write_summary_csv(const std::filesystem::path &path, const ExperimentSummary &summary);
std::string summary_csv(const ExperimentSummary &summary);

} // namespace trilat

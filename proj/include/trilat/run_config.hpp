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

#include "trilat/montecarlo.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace trilat {

// Everything a CLI run needs. Text form: one `section.key = value` per line,
// `#` starts a comment. Unknown keys are errors.
struct RunConfig
{
    ExperimentConfig experiment;
    // explicit_sets keeps experiment.pipeline.system.subcarriers as given
    enum class Allocation
    {
        interleaved,
        contiguous,
        explicit_sets,
    } allocation = Allocation::interleaved;
    double noise_psd_dbm_hz = -174.0;
    double ref_snr_db = 25.0;
    double ref_distance_m = 100.0;
    double ref_power_dbm = 39.0;
    std::filesystem::path out_dir = "trilat_out";
};

RunConfig default_run_config();

// Applies `key = value` lines on top of `base`; throws ConfigError with the line
// number on malformed input, then validates the merged result.
RunConfig parse_run_config(const std::string &text, RunConfig base = default_run_config());
RunConfig load_run_config(const std::filesystem::path &path);

// Recomputes derived fields (allocation, powers, gain reference) and checks invariants.
void finalize(RunConfig &config);

// Canonical text with every key; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig &config);

} // namespace trilat

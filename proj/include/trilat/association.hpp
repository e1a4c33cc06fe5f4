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
#include "trilat/sparse_recovery.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace trilat {

// Rank indices (0-based, ascending order) into the four range sets.
// lambda[0] is the identity: target labels are arbitrary, so they are fixed by
// the order of D1_AT.
struct Association
{
    std::array<std::vector<int>, 2> lambda;
    std::array<std::vector<int>, 2> mu;

    friend bool operator==(const Association &, const Association &) = default;
};

bool is_permutation_feasible(const Association &a, long n_targets);

struct Anchors
{
    std::array<Point2D, 2> bs;
    Point2D irs;
    std::array<double, 2> d_ai{};

    static Anchors from(const Scenario &scenario);
};

struct NoiseModel
{
    std::array<std::vector<double>, 2> var_at; // [m][k]
    std::array<std::vector<double>, 2> var_it; // [m][k]

    // Quantization-dominated variances: w_at^2 / 12 for the BS ranges and
    // w_at^2 / 12 + w_aita^2 / 12 for the IRS ranges (d_ai is known exactly).
    static NoiseModel quantization(long n_targets, const SystemConfig &config);
};

// D_AITA_m(mu[m][k]) - D_AT_m(lambda[m][k]) - d_ai[m].
double irs_range(const RangeSets &sets, const Association &a, int m, int k, const std::array<double, 2> &d_ai);

// All associations with lambda[0] = identity that satisfy
// |irs_range(m = 0) - irs_range(m = 1)| <= tau[k] for every k, in lexicographic
// order of (lambda[1], mu[0], mu[1]).
std::vector<Association> enumerate_feasible(const RangeSets &sets, const std::array<double, 2> &d_ai,
                                            const std::vector<double> &tau);

// (K!)^3 for the quotiented search space.
std::uint64_t association_count(long n_targets);

struct GaussNewtonOptions
{
    int max_iters = 100;
    double step_tol_m = 1e-8;
    double initial_damping = 1e-3; // relative to the largest diagonal of J^T J
};

// Per-target measurements: ranges to BS 1/2 and the IRS range as seen through each BS.
struct TargetRanges
{
    std::array<double, 2> d_at{};
    std::array<double, 2> d_it{};
    std::array<double, 2> var_at{};
    std::array<double, 2> var_it{};
};

// Whitened residuals (measured - predicted) / sigma: [at_1, at_2, it_1, it_2].
Eigen::Vector4d residuals(const Point2D &p, const TargetRanges &r, const Anchors &anchors);
Eigen::Matrix<double, 4, 2> residual_jacobian(const Point2D &p, const TargetRanges &r, const Anchors &anchors);
double target_cost(const Point2D &p, const TargetRanges &r, const Anchors &anchors);

struct PositionFit
{
    Point2D position;
    double cost = 0.0;
    int iterations = 0;
};

// Damped Gauss-Newton from a single start. Accepted steps strictly decrease the cost.
PositionFit gauss_newton(const Point2D &start, const TargetRanges &r, const Anchors &anchors,
                         const GaussNewtonOptions &options = {}, std::vector<double> *cost_trace = nullptr);

// Starts: two-circle intersection nearest the IRS, its mirror across the BS axis, the IRS.
std::array<Point2D, 3> initial_guesses(const TargetRanges &r, const Anchors &anchors);

// Best fit over the multi-start set; throws LocalizationError if every start fails.
PositionFit localize_target(const TargetRanges &r, const Anchors &anchors, const GaussNewtonOptions &options = {});

TargetRanges target_ranges(const RangeSets &sets, const Association &a, int k, const Anchors &anchors,
                           const NoiseModel &noise);

struct Localization
{
    std::vector<Point2D> positions;
    std::vector<double> per_target_cost;
    double cost = 0.0;
};

Localization localize(const Association &a, const RangeSets &sets, const Anchors &anchors, const NoiseModel &noise,
                      const GaussNewtonOptions &options = {});

enum class SearchMode
{
    pruned,
    exhaustive,
};

const char *to_string(SearchMode mode);
SearchMode parse_search_mode(const std::string &text);

struct LocalizationResult
{
    std::vector<Point2D> positions;
    Association association;
    double cost = 0.0;
    std::vector<double> per_target_cost;
    std::uint64_t candidates = 0; // associations scored
};

// Argmin of the summed ML cost over the candidate associations; ties keep the
// lexicographically first. Throws NoConsistentAssociationError when pruning
// leaves nothing, LocalizationError when every candidate fails.
LocalizationResult solve(const RangeSets &sets, const Anchors &anchors, const NoiseModel &noise,
                         const std::vector<double> &tau, SearchMode mode, const GaussNewtonOptions &options = {});

// Association that maps each true target to its own quantized ranges, with
// targets relabeled by ascending BS 1 range. Requires collision-free bins.
struct TruthAssociation
{
    RangeSets sets;
    Association association;
    std::vector<int> target_of_label; // label k -> scenario target index
};

TruthAssociation truth_association(const Scenario &scenario, const SystemConfig &config);

bool satisfies_pruning(const RangeSets &sets, const Association &a, const std::array<double, 2> &d_ai,
                       const std::vector<double> &tau);

} // namespace trilat

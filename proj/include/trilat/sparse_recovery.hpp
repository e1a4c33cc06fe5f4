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

#include "trilat/channel.hpp"
#include "trilat/scenario.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <vector>

namespace trilat {

struct SolverOptions
{
    int max_iters = 5000;
    // Convergence when the first-order optimality gap is below tol * scale,
    // scale = max_l |A_l^H y| (rows: max_l ||A_l^H Y||).
    double tol = 1e-9;
    // Largest squared singular value of the design; estimated by power iteration when absent.
    std::optional<double> lipschitz;
    bool keep_trace = false;
};

struct LassoConfig
{
    std::optional<double> rho;   // absolute override
    double rho_scale = 1.0;      // c in rho = c * sigma * sqrt(2 ln L) * ||column||
    std::optional<double> delta; // absolute support threshold override
    double delta_factor = 3.0;   // delta = factor * noise floor
    SolverOptions solver;
};

struct GroupLassoConfig
{
    std::optional<double> beta;
    double beta_scale = 1.0; // beta = beta_scale * rho * sqrt(Q - 1)
    std::optional<double> delta;
    double delta_factor = 3.0;
    SolverOptions solver;
};

struct LassoSolution
{
    Eigen::VectorXcd coef;
    int iterations = 0;
    double optimality_gap = 0.0; // absolute
    double scale = 0.0;
    std::vector<double> objective; // per iteration when keep_trace
};

struct GroupLassoSolution
{
    Eigen::MatrixXcd coef; // L x G, row l is g_l
    int iterations = 0;
    double optimality_gap = 0.0;
    double scale = 0.0;
    std::vector<double> objective;
};

double lasso_objective(const Eigen::VectorXcd &y, const Eigen::MatrixXcd &design, const Eigen::VectorXcd &h,
                       double rho);
double group_lasso_objective(const Eigen::MatrixXcd &Y, const Eigen::MatrixXcd &design, const Eigen::MatrixXcd &H,
                             double beta);

// Worst violation of the subgradient conditions: |A_l^H r| <= rho where h_l = 0,
// A_l^H r = rho h_l / |h_l| elsewhere.
double lasso_optimality_gap(const Eigen::VectorXcd &y, const Eigen::MatrixXcd &design, const Eigen::VectorXcd &h,
                            double rho);
double group_lasso_optimality_gap(const Eigen::MatrixXcd &Y, const Eigen::MatrixXcd &design,
                                  const Eigen::MatrixXcd &H, double beta);

double largest_singular_value_sq(const Eigen::MatrixXcd &design, int max_iters = 100, double rel_tol = 1e-10);

// min 0.5 ||y - A h||^2 + rho ||h||_1 (complex l1); throws NonConvergenceError.
LassoSolution solve_lasso(const Eigen::VectorXcd &y, const Eigen::MatrixXcd &design, double rho,
                          const SolverOptions &options = {});

// min 0.5 ||Y - A H||_F^2 + beta sum_l ||row_l(H)||_2; throws NonConvergenceError.
GroupLassoSolution solve_group_lasso(const Eigen::MatrixXcd &Y, const Eigen::MatrixXcd &design, double beta,
                                     const SolverOptions &options = {});

// 1-based bins whose magnitude (row norm) is >= threshold.
std::vector<Bin> detect_support(const Eigen::VectorXcd &solution, double threshold);
std::vector<Bin> detect_support(const Eigen::MatrixXcd &solution, double threshold);

// Median magnitude of the per-bin matched-filter estimates A_l^H y / ||A_l||^2
// (row norms for matrix measurements). Sparse paths leave the median on the noise.
double matched_filter_floor(const Eigen::MatrixXcd &measurements, const Eigen::MatrixXcd &design);

struct SupportSet
{
    std::array<std::vector<Bin>, 2> phase1; // detected BS-target-BS bins
    std::array<std::vector<Bin>, 2> phase2; // detected IRS-on bins
    std::array<Bin, 2> l_aia{};             // from anchor geometry
};

// Phase-I bins plus l_aia; phase-II bins outside it belong to BS-IRS-target-BS paths.
std::vector<Bin> known_bins(const SupportSet &supports, int m);

struct RangeSets
{
    std::array<std::vector<double>, 2> d_at;   // ascending
    std::array<std::vector<double>, 2> d_aita; // ascending

    long size() const { return static_cast<long>(d_at[0].size()); }
};

// Bin midpoints, sorted. With share_aia_bin, a BS whose BS-IRS-target-BS set is
// exactly one short (while both BS-target-BS sets agree) and whose l_aia was detected
// in phase II gets l_aia as that entry. Throws InconsistentDetectionError unless all
// four sets have the same cardinality.
RangeSets extract_ranges(const SupportSet &supports, const SystemConfig &config, bool share_aia_bin = true);

// Quantized truth: the sets an ideal detector would produce.
RangeSets oracle_ranges(const Scenario &scenario, const SystemConfig &config, bool share_aia_bin = true);

struct PhaseOneResult
{
    SupportSet supports;
    std::array<double, 2> rho{}, beta{}, delta1{}, delta2{};
    std::array<LassoSolution, 2> lasso;
    std::array<GroupLassoSolution, 2> group;
};

// Runs both sparse solves per BS and returns the detected supports.
PhaseOneResult recover_supports(const ReceivedSignal &rx, const OfdmFrontEnd &frontend, const Scenario &anchors,
                                const LassoConfig &lasso, const GroupLassoConfig &group);

} // namespace trilat

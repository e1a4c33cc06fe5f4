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

#include "trilat/sparse_recovery.hpp"

#include "trilat/error.hpp"
#include "trilat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace trilat {

namespace {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

// Row-wise block soft threshold; for single-column input this is the complex soft threshold.
void shrink_rows(MatrixXcd &X, double threshold)
{
    for (Index l = 0; l < X.rows(); ++l)
    {
        const double norm = X.row(l).norm();
        if (norm <= threshold)
            X.row(l).setZero();
        else
            X.row(l) *= (1.0 - threshold / norm);
    }
}

double penalty(const MatrixXcd &X)
{
    return X.rowwise().norm().sum();
}

double objective(const MatrixXcd &residual, const MatrixXcd &X, double weight)
{
    return 0.5 * residual.squaredNorm() + weight * penalty(X);
}

double gap_from_correlation(const MatrixXcd &corr, const MatrixXcd &X, double weight)
{
    double gap = 0.0;
    for (Index l = 0; l < X.rows(); ++l)
    {
        const double norm = X.row(l).norm();
        const double v = norm == 0.0 ? std::max(0.0, corr.row(l).norm() - weight)
                                     : (corr.row(l) - weight * X.row(l) / norm).norm();
        gap = std::max(gap, v);
    }
    return gap;
}

struct CoreResult
{
    MatrixXcd coef;
    int iterations = 0;
    double gap = 0.0;
    double scale = 0.0;
    std::vector<double> objective;
};

// Monotone FISTA on 0.5 ||Y - A X||_F^2 + weight * sum_l ||row_l(X)||.
CoreResult proximal_gradient(const MatrixXcd &Y, const MatrixXcd &A, double weight, const SolverOptions &opt,
                             const char *name)
{
    if (weight < 0.0 || !std::isfinite(weight))
        throw std::invalid_argument(std::string(name) + ": regularization weight must be finite and >= 0");
    if (Y.rows() != A.rows())
        throw std::invalid_argument(std::string(name) + ": measurement and design row counts differ");

    const Index L = A.cols();
    CoreResult out;
    out.coef = MatrixXcd::Zero(L, Y.cols());

    MatrixXcd corr = A.adjoint() * Y;
    out.scale = corr.rowwise().norm().maxCoeff();
    if (out.scale == 0.0 || L == 0)
        return out;

    const double lip = opt.lipschitz ? *opt.lipschitz : largest_singular_value_sq(A) * (1.0 + 1e-6);
    const double step = 1.0 / lip;
    const double tol = opt.tol * out.scale;

    MatrixXcd x = out.coef;
    MatrixXcd Ax = MatrixXcd::Zero(Y.rows(), Y.cols());
    MatrixXcd v = x, Av = Ax;
    double fx = objective(Y, x, weight);
    double t = 1.0;

    out.gap = gap_from_correlation(corr, x, weight);
    for (int it = 1; it <= opt.max_iters; ++it)
    {
        MatrixXcd z = v - step * (A.adjoint() * (Av - Y));
        shrink_rows(z, step * weight);
        MatrixXcd Az = A * z;
        const double fz = objective(Y - Az, z, weight);

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const bool accept = fz <= fx;
        MatrixXcd x_next = accept ? z : x;
        MatrixXcd Ax_next = accept ? Az : Ax;
        v = x_next + (t / t_next) * (z - x_next) + ((t - 1.0) / t_next) * (x_next - x);
        Av = Ax_next + (t / t_next) * (Az - Ax_next) + ((t - 1.0) / t_next) * (Ax_next - Ax);
        t = t_next;

        if (accept)
        {
            x = std::move(x_next);
            Ax = std::move(Ax_next);
            fx = fz;
            corr = A.adjoint() * (Y - Ax);
            out.gap = gap_from_correlation(corr, x, weight);
        }
        if (opt.keep_trace)
            out.objective.push_back(fx);
        out.iterations = it;
        if (out.gap <= tol)
        {
            out.coef = std::move(x);
            return out;
        }
    }
    throw NonConvergenceError(name, opt.max_iters, out.gap);
}

std::vector<Bin> support_of(const VectorXd &magnitude, double threshold)
{
    if (!(threshold > 0.0))
        throw std::invalid_argument("detect_support: threshold must be positive");
    std::vector<Bin> out;
    for (Index l = 0; l < magnitude.size(); ++l)
        if (magnitude(l) >= threshold)
            out.push_back(static_cast<Bin>(l + 1));
    return out;
}

double support_threshold(std::optional<double> absolute, double factor, double floor, const MatrixXcd &coef)
{
    if (absolute)
        return *absolute;
    const double peak = coef.size() == 0 ? 0.0 : coef.rowwise().norm().maxCoeff();
    return std::max({factor * floor, 1e-6 * peak, std::numeric_limits<double>::min()});
}

} // namespace

double lasso_objective(const Eigen::VectorXcd &y, const Eigen::MatrixXcd &A, const Eigen::VectorXcd &h, double rho)
{
    return 0.5 * (y - A * h).squaredNorm() + rho * h.cwiseAbs().sum();
}

double group_lasso_objective(const Eigen::MatrixXcd &Y, const Eigen::MatrixXcd &A, const Eigen::MatrixXcd &H,
                             double beta)
{
    return objective(Y - A * H, H, beta);
}

double lasso_optimality_gap(const Eigen::VectorXcd &y, const Eigen::MatrixXcd &A, const Eigen::VectorXcd &h,
                            double rho)
{
    return gap_from_correlation(A.adjoint() * (y - A * h), h, rho);
}

double group_lasso_optimality_gap(const Eigen::MatrixXcd &Y, const Eigen::MatrixXcd &A, const Eigen::MatrixXcd &H,
                                  double beta)
{
    return gap_from_correlation(A.adjoint() * (Y - A * H), H, beta);
}

double largest_singular_value_sq(const Eigen::MatrixXcd &A, int max_iters, double rel_tol)
{
    if (A.size() == 0)
        return 0.0;
    Rng rng(0x5eed);
    Eigen::VectorXcd v(A.cols());
    for (Index i = 0; i < v.size(); ++i)
        v(i) = {1.0 + rng.uniform(), rng.uniform() - 0.5};
    v.normalize();
    double est = 0.0;
    for (int it = 0; it < max_iters; ++it)
    {
        Eigen::VectorXcd w = A.adjoint() * (A * v);
        const double next = w.norm();
        if (next == 0.0)
            return 0.0;
        v = w / next;
        if (std::abs(next - est) <= rel_tol * next)
            return next;
        est = next;
    }
    return est;
}

LassoSolution solve_lasso(const Eigen::VectorXcd &y, const Eigen::MatrixXcd &design, double rho,
                          const SolverOptions &options)
{
    CoreResult r = proximal_gradient(y, design, rho, options, "LASSO");
    LassoSolution s;
    s.coef = r.coef.col(0);
    s.iterations = r.iterations;
    s.optimality_gap = r.gap;
    s.scale = r.scale;
    s.objective = std::move(r.objective);
    return s;
}

GroupLassoSolution solve_group_lasso(const Eigen::MatrixXcd &Y, const Eigen::MatrixXcd &design, double beta,
                                     const SolverOptions &options)
{
    CoreResult r = proximal_gradient(Y, design, beta, options, "group LASSO");
    return {std::move(r.coef), r.iterations, r.gap, r.scale, std::move(r.objective)};
}

std::vector<Bin> detect_support(const Eigen::VectorXcd &solution, double threshold)
{
    return support_of(solution.cwiseAbs(), threshold);
}

std::vector<Bin> detect_support(const Eigen::MatrixXcd &solution, double threshold)
{
    return support_of(solution.rowwise().norm(), threshold);
}

double matched_filter_floor(const Eigen::MatrixXcd &Y, const Eigen::MatrixXcd &A)
{
    if (A.cols() == 0)
        return 0.0;
    const MatrixXcd corr = A.adjoint() * Y;
    const VectorXd col_sq = A.colwise().squaredNorm().transpose();
    std::vector<double> mag(static_cast<std::size_t>(A.cols()));
    for (Index l = 0; l < A.cols(); ++l)
        mag[static_cast<std::size_t>(l)] = col_sq(l) > 0.0 ? corr.row(l).norm() / col_sq(l) : 0.0;
    const auto mid = mag.begin() + static_cast<std::ptrdiff_t>(mag.size() / 2);
    std::nth_element(mag.begin(), mid, mag.end());
    return *mid;
}

std::vector<Bin> known_bins(const SupportSet &supports, int m)
{
    const auto mi = static_cast<std::size_t>(m);
    std::vector<Bin> out = supports.phase1[mi];
    out.push_back(supports.l_aia[mi]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

RangeSets extract_ranges(const SupportSet &supports, const SystemConfig &config, bool share_aia_bin)
{
    RangeSets r;
    for (int m = 0; m < 2; ++m)
    {
        const auto mi = static_cast<std::size_t>(m);
        for (Bin l : supports.phase1[mi])
            r.d_at[mi].push_back(bin_midpoint(l, PathKind::bs_target_bs, config));
        const auto known = known_bins(supports, m);
        for (Bin l : supports.phase2[mi])
            if (!std::binary_search(known.begin(), known.end(), l))
                r.d_aita[mi].push_back(bin_midpoint(l, PathKind::bs_irs_target_bs, config));
        std::sort(r.d_at[mi].begin(), r.d_at[mi].end());
        std::sort(r.d_aita[mi].begin(), r.d_aita[mi].end());
        r.d_at[mi].erase(std::unique(r.d_at[mi].begin(), r.d_at[mi].end()), r.d_at[mi].end());
        r.d_aita[mi].erase(std::unique(r.d_aita[mi].begin(), r.d_aita[mi].end()), r.d_aita[mi].end());
    }
    const auto n = r.d_at[0].size();
    if (share_aia_bin && n > 0 && r.d_at[1].size() == n)
        for (std::size_t m = 0; m < 2; ++m)
        {
            // The shortest BS-IRS-target-BS path is 2 d_ai, so a target close to the
            // BS-IRS segment lands on l_aia and is removed together with it.
            const auto &p2 = supports.phase2[m];
            if (r.d_aita[m].size() + 1 != n || std::find(p2.begin(), p2.end(), supports.l_aia[m]) == p2.end())
                continue;
            const double d = bin_midpoint(supports.l_aia[m], PathKind::bs_irs_target_bs, config);
            r.d_aita[m].insert(std::lower_bound(r.d_aita[m].begin(), r.d_aita[m].end(), d), d);
        }
    if (r.d_at[1].size() != n || r.d_aita[0].size() != n || r.d_aita[1].size() != n)
        throw InconsistentDetectionError(
            "inconsistent detection counts: |D1_AT|=" + std::to_string(r.d_at[0].size()) +
            " |D2_AT|=" + std::to_string(r.d_at[1].size()) + " |D1_AITA|=" + std::to_string(r.d_aita[0].size()) +
            " |D2_AITA|=" + std::to_string(r.d_aita[1].size()));
    return r;
}

RangeSets oracle_ranges(const Scenario &scenario, const SystemConfig &config, bool share_aia_bin)
{
    const TrueBins b = true_bins(scenario, config);
    SupportSet s;
    for (std::size_t m = 0; m < 2; ++m)
    {
        std::set<Bin> p1(b.at[m].begin(), b.at[m].end());
        std::set<Bin> p2 = p1;
        p2.insert(b.aia[m]);
        p2.insert(b.aita[m].begin(), b.aita[m].end());
        s.phase1[m].assign(p1.begin(), p1.end());
        s.phase2[m].assign(p2.begin(), p2.end());
        s.l_aia[m] = b.aia[m];
    }
    return extract_ranges(s, config, share_aia_bin);
}

PhaseOneResult recover_supports(const ReceivedSignal &rx, const OfdmFrontEnd &frontend, const Scenario &anchors,
                                const LassoConfig &lasso, const GroupLassoConfig &group)
{
    const SystemConfig &c = frontend.config();
    const double sigma = std::sqrt(rx.noise_var);
    const double universal = std::sqrt(2.0 * std::log(static_cast<double>(c.n_taps)));
    PhaseOneResult out;
    for (int m = 0; m < 2; ++m)
    {
        const auto mi = static_cast<std::size_t>(m);
        const Eigen::MatrixXcd &E = frontend.steering(m);
        const double amp = std::sqrt(c.subcarrier_power_mw(m));
        const double col_norm = amp * std::sqrt(static_cast<double>(E.rows()));

        // IRS-off symbol: LASSO on the raw reception with design sqrt(p) diag(s) E.
        const Eigen::MatrixXcd A1 = (amp * rx.s[mi][0]).asDiagonal() * E;
        out.rho[mi] = lasso.rho ? *lasso.rho : lasso.rho_scale * sigma * universal * col_norm;
        out.lasso[mi] = solve_lasso(rx.y[mi][0], A1, out.rho[mi], lasso.solver);
        out.delta1[mi] =
            support_threshold(lasso.delta, lasso.delta_factor, matched_filter_floor(rx.y[mi][0], A1),
                              out.lasso[mi].coef);
        out.supports.phase1[mi] = detect_support(out.lasso[mi].coef, out.delta1[mi]);

        // IRS-on symbols: group LASSO on the symbol-normalized receptions.
        const auto q_on = static_cast<Index>(c.n_symbols - 1);
        Eigen::MatrixXcd Ybar(E.rows(), q_on);
        for (Index q = 0; q < q_on; ++q)
            Ybar.col(q) = rx.ybar[mi][static_cast<std::size_t>(q + 1)];
        const Eigen::MatrixXcd A2 = amp * E;
        out.beta[mi] =
            group.beta ? *group.beta : group.beta_scale * out.rho[mi] * std::sqrt(static_cast<double>(q_on));
        out.group[mi] = solve_group_lasso(Ybar, A2, out.beta[mi], group.solver);
        out.delta2[mi] = support_threshold(group.delta, group.delta_factor, matched_filter_floor(Ybar, A2),
                                           out.group[mi].coef);
        out.supports.phase2[mi] = detect_support(out.group[mi].coef, out.delta2[mi]);

        out.supports.l_aia[mi] = delay_bin(distance(anchors.bs[mi], anchors.irs), PathKind::bs_irs_bs, c);
    }
    return out;
}

} // namespace trilat

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

#include "trilat/association.hpp"

#include "trilat/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace trilat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_sets(const RangeSets &sets)
{
    const auto n = sets.d_at[0].size();
    if (sets.d_at[1].size() != n || sets.d_aita[0].size() != n || sets.d_aita[1].size() != n)
        throw InconsistentDetectionError("association needs K entries in each of the four range sets");
    if (n == 0)
        throw InconsistentDetectionError("association needs at least one detected target");
}

std::vector<int> identity(long n)
{
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

Eigen::Vector2d unit_from(const Point2D &p, const Point2D &anchor)
{
    const double d = distance(p, anchor);
    if (d == 0.0)
        return Eigen::Vector2d::Zero();
    return {(p.x - anchor.x) / d, (p.y - anchor.y) / d};
}

auto association_key(const Association &a)
{
    return std::tie(a.lambda[1], a.mu[0], a.mu[1]);
}

// Per-target fits indexed by (k, lambda2, mu1, mu2); candidates share them.
class FitCache
{
public:
    FitCache(const RangeSets &sets, const Anchors &anchors, const NoiseModel &noise, const GaussNewtonOptions &opt)
        : sets_(sets), anchors_(anchors), noise_(noise), opt_(opt), K_(static_cast<std::size_t>(sets.size())),
          fits_(K_ * K_ * K_ * K_)
    {
    }

    const std::optional<PositionFit> &get(std::size_t k, std::size_t l2, std::size_t m1, std::size_t m2)
    {
        Slot &slot = fits_[((k * K_ + l2) * K_ + m1) * K_ + m2];
        if (!slot.done)
        {
            TargetRanges r;
            for (std::size_t m = 0; m < 2; ++m)
            {
                const std::size_t lam = m == 0 ? k : l2;
                const std::size_t mu = m == 0 ? m1 : m2;
                r.d_at[m] = sets_.d_at[m][lam];
                r.d_it[m] = sets_.d_aita[m][mu] - sets_.d_at[m][lam] - anchors_.d_ai[m];
                r.var_at[m] = noise_.var_at[m][k];
                r.var_it[m] = noise_.var_it[m][k];
            }
            try
            {
                slot.fit = localize_target(r, anchors_, opt_);
            }
            catch (const LocalizationError &)
            {
                slot.fit.reset();
            }
            slot.done = true;
        }
        return slot.fit;
    }

    double cost(std::size_t k, std::size_t l2, std::size_t m1, std::size_t m2)
    {
        const auto &f = get(k, l2, m1, m2);
        return f ? f->cost : kInf;
    }

private:
    struct Slot
    {
        bool done = false;
        std::optional<PositionFit> fit;
    };
    const RangeSets &sets_;
    const Anchors &anchors_;
    const NoiseModel &noise_;
    GaussNewtonOptions opt_;
    std::size_t K_;
    std::vector<Slot> fits_;
};

LocalizationResult assemble(const Association &a, FitCache &cache, std::uint64_t candidates)
{
    LocalizationResult out;
    out.association = a;
    out.candidates = candidates;
    const auto K = a.lambda[0].size();
    for (std::size_t k = 0; k < K; ++k)
    {
        const auto &fit = cache.get(k, static_cast<std::size_t>(a.lambda[1][k]), static_cast<std::size_t>(a.mu[0][k]),
                                    static_cast<std::size_t>(a.mu[1][k]));
        out.positions.push_back(fit->position);
        out.per_target_cost.push_back(fit->cost);
        out.cost += fit->cost;
    }
    return out;
}

} // namespace

bool is_permutation_feasible(const Association &a, long n_targets)
{
    const auto ok = [n_targets](const std::vector<int> &v) {
        if (static_cast<long>(v.size()) != n_targets)
            return false;
        std::vector<int> s = v;
        std::sort(s.begin(), s.end());
        return s == identity(n_targets);
    };
    return ok(a.lambda[0]) && ok(a.lambda[1]) && ok(a.mu[0]) && ok(a.mu[1]);
}

Anchors Anchors::from(const Scenario &s)
{
    Anchors a;
    a.bs = s.bs;
    a.irs = s.irs;
    a.d_ai = {distance(s.bs[0], s.irs), distance(s.bs[1], s.irs)};
    return a;
}

NoiseModel NoiseModel::quantization(long n_targets, const SystemConfig &config)
{
    const double w_at = bin_width(PathKind::bs_target_bs, config);
    const double w_aita = bin_width(PathKind::bs_irs_target_bs, config);
    const double v_at = w_at * w_at / 12.0;
    const double v_it = v_at + w_aita * w_aita / 12.0;
    NoiseModel n;
    for (std::size_t m = 0; m < 2; ++m)
    {
        n.var_at[m].assign(static_cast<std::size_t>(n_targets), v_at);
        n.var_it[m].assign(static_cast<std::size_t>(n_targets), v_it);
    }
    return n;
}

double irs_range(const RangeSets &sets, const Association &a, int m, int k, const std::array<double, 2> &d_ai)
{
    const auto mi = static_cast<std::size_t>(m);
    const auto ki = static_cast<std::size_t>(k);
    return sets.d_aita[mi].at(static_cast<std::size_t>(a.mu[mi].at(ki))) -
           sets.d_at[mi].at(static_cast<std::size_t>(a.lambda[mi].at(ki))) - d_ai[mi];
}

bool satisfies_pruning(const RangeSets &sets, const Association &a, const std::array<double, 2> &d_ai,
                       const std::vector<double> &tau)
{
    for (std::size_t k = 0; k < a.lambda[0].size(); ++k)
    {
        const int ki = static_cast<int>(k);
        if (std::abs(irs_range(sets, a, 0, ki, d_ai) - irs_range(sets, a, 1, ki, d_ai)) > tau.at(k))
            return false;
    }
    return true;
}

std::vector<Association> enumerate_feasible(const RangeSets &sets, const std::array<double, 2> &d_ai,
                                            const std::vector<double> &tau)
{
    check_sets(sets);
    const long K = sets.size();
    if (static_cast<long>(tau.size()) != K)
        throw std::invalid_argument("enumerate_feasible: need one threshold per target");

    std::vector<Association> out;
    Association cur;
    cur.lambda[0] = identity(K);
    for (auto *v : {&cur.lambda[1], &cur.mu[0], &cur.mu[1]})
        v->assign(static_cast<std::size_t>(K), -1);
    std::vector<char> used_l2(static_cast<std::size_t>(K)), used_m1(used_l2), used_m2(used_l2);

    auto recurse = [&](auto &&self, long k) -> void {
        if (k == K)
        {
            out.push_back(cur);
            return;
        }
        const auto ki = static_cast<std::size_t>(k);
        for (std::size_t l2 = 0; l2 < static_cast<std::size_t>(K); ++l2)
        {
            if (used_l2[l2])
                continue;
            for (std::size_t m1 = 0; m1 < static_cast<std::size_t>(K); ++m1)
            {
                if (used_m1[m1])
                    continue;
                const double r1 = sets.d_aita[0][m1] - sets.d_at[0][ki] - d_ai[0];
                for (std::size_t m2 = 0; m2 < static_cast<std::size_t>(K); ++m2)
                {
                    if (used_m2[m2])
                        continue;
                    const double r2 = sets.d_aita[1][m2] - sets.d_at[1][l2] - d_ai[1];
                    if (std::abs(r1 - r2) > tau[ki])
                        continue;
                    used_l2[l2] = used_m1[m1] = used_m2[m2] = 1;
                    cur.lambda[1][ki] = static_cast<int>(l2);
                    cur.mu[0][ki] = static_cast<int>(m1);
                    cur.mu[1][ki] = static_cast<int>(m2);
                    self(self, k + 1);
                    used_l2[l2] = used_m1[m1] = used_m2[m2] = 0;
                }
            }
        }
    };
    recurse(recurse, 0);

    std::sort(out.begin(), out.end(),
              [](const Association &a, const Association &b) { return association_key(a) < association_key(b); });
    if (out.empty())
        throw NoConsistentAssociationError("no consistent association: every candidate violates the IRS-range "
                                           "agreement threshold");
    return out;
}

std::uint64_t association_count(long n_targets)
{
    std::uint64_t f = 1;
    for (long i = 2; i <= n_targets; ++i)
        f *= static_cast<std::uint64_t>(i);
    return f * f * f;
}

Eigen::Vector4d residuals(const Point2D &p, const TargetRanges &r, const Anchors &a)
{
    const double d_irs = distance(p, a.irs);
    Eigen::Vector4d res;
    for (int m = 0; m < 2; ++m)
    {
        const auto mi = static_cast<std::size_t>(m);
        res(m) = (r.d_at[mi] - distance(p, a.bs[mi])) / std::sqrt(r.var_at[mi]);
        res(2 + m) = (r.d_it[mi] - d_irs) / std::sqrt(r.var_it[mi]);
    }
    return res;
}

Eigen::Matrix<double, 4, 2> residual_jacobian(const Point2D &p, const TargetRanges &r, const Anchors &a)
{
    Eigen::Matrix<double, 4, 2> J;
    const Eigen::Vector2d u_irs = unit_from(p, a.irs);
    for (int m = 0; m < 2; ++m)
    {
        const auto mi = static_cast<std::size_t>(m);
        J.row(m) = -unit_from(p, a.bs[mi]).transpose() / std::sqrt(r.var_at[mi]);
        J.row(2 + m) = -u_irs.transpose() / std::sqrt(r.var_it[mi]);
    }
    return J;
}

double target_cost(const Point2D &p, const TargetRanges &r, const Anchors &a)
{
    return residuals(p, r, a).squaredNorm();
}

PositionFit gauss_newton(const Point2D &start, const TargetRanges &r, const Anchors &anchors,
                         const GaussNewtonOptions &opt, std::vector<double> *cost_trace)
{
    PositionFit fit{start, target_cost(start, r, anchors), 0};
    if (cost_trace)
        cost_trace->push_back(fit.cost);
    double damping = -1.0;
    for (int it = 1; it <= opt.max_iters; ++it)
    {
        fit.iterations = it;
        const Eigen::Vector4d res = residuals(fit.position, r, anchors);
        const Eigen::Matrix<double, 4, 2> J = residual_jacobian(fit.position, r, anchors);
        const Eigen::Matrix2d JtJ = J.transpose() * J;
        const Eigen::Vector2d g = J.transpose() * res;
        if (damping < 0.0)
            damping = opt.initial_damping * std::max(JtJ.diagonal().maxCoeff(), 1e-12);

        const Eigen::Vector2d step = -(JtJ + damping * Eigen::Matrix2d::Identity()).ldlt().solve(g);
        if (!step.allFinite())
            break;
        const Point2D trial{fit.position.x + step(0), fit.position.y + step(1)};
        const double trial_cost = target_cost(trial, r, anchors);
        if (trial_cost < fit.cost)
        {
            fit.position = trial;
            fit.cost = trial_cost;
            damping /= 10.0;
            if (cost_trace)
                cost_trace->push_back(fit.cost);
        }
        else
        {
            damping *= 10.0;
        }
        if (step.norm() < opt.step_tol_m || damping > 1e30)
            break;
    }
    return fit;
}

std::array<Point2D, 3> initial_guesses(const TargetRanges &r, const Anchors &a)
{
    const Eigen::Vector2d a1(a.bs[0].x, a.bs[0].y), a2(a.bs[1].x, a.bs[1].y);
    const Eigen::Vector2d e = (a2 - a1).normalized();
    const Eigen::Vector2d perp(-e(1), e(0));
    const double base = (a2 - a1).norm();

    // Radical line of the two range circles, then its intersection with circle 1.
    const double along = (r.d_at[0] * r.d_at[0] - r.d_at[1] * r.d_at[1] + base * base) / (2.0 * base);
    const double h = std::sqrt(std::max(0.0, r.d_at[0] * r.d_at[0] - along * along));
    const Eigen::Vector2d foot = a1 + along * e;
    const Eigen::Vector2d c1 = foot + h * perp, c2 = foot - h * perp;
    const Eigen::Vector2d irs(a.irs.x, a.irs.y);
    const Eigen::Vector2d near = (c1 - irs).norm() <= (c2 - irs).norm() ? c1 : c2;

    const Eigen::Vector2d proj = a1 + (near - a1).dot(e) * e;
    const Eigen::Vector2d mirror = 2.0 * proj - near;
    return {Point2D{near(0), near(1)}, Point2D{mirror(0), mirror(1)}, a.irs};
}

PositionFit localize_target(const TargetRanges &r, const Anchors &anchors, const GaussNewtonOptions &opt)
{
    std::optional<PositionFit> best;
    for (const Point2D &start : initial_guesses(r, anchors))
    {
        if (!std::isfinite(start.x) || !std::isfinite(start.y))
            continue;
        const PositionFit fit = gauss_newton(start, r, anchors, opt);
        if (!std::isfinite(fit.cost) || !std::isfinite(fit.position.x) || !std::isfinite(fit.position.y))
            continue;
        if (!best || fit.cost < best->cost)
            best = fit;
    }
    if (!best)
        throw LocalizationError("localization failure: all Gauss-Newton starts diverged (d_at = " +
                                std::to_string(r.d_at[0]) + ", " + std::to_string(r.d_at[1]) + "; d_it = " +
                                std::to_string(r.d_it[0]) + ", " + std::to_string(r.d_it[1]) + ")");
    return *best;
}

TargetRanges target_ranges(const RangeSets &sets, const Association &a, int k, const Anchors &anchors,
                           const NoiseModel &noise)
{
    TargetRanges r;
    const auto ki = static_cast<std::size_t>(k);
    for (int m = 0; m < 2; ++m)
    {
        const auto mi = static_cast<std::size_t>(m);
        r.d_at[mi] = sets.d_at[mi].at(static_cast<std::size_t>(a.lambda[mi].at(ki)));
        r.d_it[mi] = irs_range(sets, a, m, k, anchors.d_ai);
        r.var_at[mi] = noise.var_at[mi].at(ki);
        r.var_it[mi] = noise.var_it[mi].at(ki);
    }
    return r;
}

Localization localize(const Association &a, const RangeSets &sets, const Anchors &anchors, const NoiseModel &noise,
                      const GaussNewtonOptions &options)
{
    check_sets(sets);
    if (!is_permutation_feasible(a, sets.size()))
        throw std::invalid_argument("localize: association indices must be permutations of 0..K-1");
    Localization out;
    for (int k = 0; k < static_cast<int>(sets.size()); ++k)
    {
        const PositionFit fit = localize_target(target_ranges(sets, a, k, anchors, noise), anchors, options);
        out.positions.push_back(fit.position);
        out.per_target_cost.push_back(fit.cost);
        out.cost += fit.cost;
    }
    return out;
}

const char *to_string(SearchMode mode)
{
    return mode == SearchMode::pruned ? "pruned" : "exhaustive";
}

SearchMode parse_search_mode(const std::string &text)
{
    if (text == "pruned")
        return SearchMode::pruned;
    if (text == "exhaustive")
        return SearchMode::exhaustive;
    throw std::invalid_argument("unknown search mode '" + text + "' (expected pruned|exhaustive)");
}

LocalizationResult solve(const RangeSets &sets, const Anchors &anchors, const NoiseModel &noise,
                         const std::vector<double> &tau, SearchMode mode, const GaussNewtonOptions &options)
{
    check_sets(sets);
    const long K = sets.size();
    FitCache cache(sets, anchors, noise, options);

    std::optional<Association> best;
    double best_cost = kInf;
    std::uint64_t scored = 0;

    if (mode == SearchMode::pruned)
    {
        for (const Association &a : enumerate_feasible(sets, anchors.d_ai, tau))
        {
            ++scored;
            double total = 0.0;
            for (std::size_t k = 0; k < a.lambda[0].size(); ++k)
                total += cache.cost(k, static_cast<std::size_t>(a.lambda[1][k]), static_cast<std::size_t>(a.mu[0][k]),
                                    static_cast<std::size_t>(a.mu[1][k]));
            if (total < best_cost)
            {
                best_cost = total;
                best = a;
            }
        }
    }
    else
    {
        const auto Ku = static_cast<std::size_t>(K);
        std::vector<double> table(Ku * Ku * Ku * Ku);
        for (std::size_t k = 0; k < Ku; ++k)
            for (std::size_t l2 = 0; l2 < Ku; ++l2)
                for (std::size_t m1 = 0; m1 < Ku; ++m1)
                    for (std::size_t m2 = 0; m2 < Ku; ++m2)
                        table[((k * Ku + l2) * Ku + m1) * Ku + m2] = cache.cost(k, l2, m1, m2);

        std::vector<int> l2 = identity(K), m1 = identity(K), m2 = identity(K);
        do
        {
            do
            {
                do
                {
                    ++scored;
                    double total = 0.0;
                    for (std::size_t k = 0; k < Ku; ++k)
                        total += table[((k * Ku + static_cast<std::size_t>(l2[k])) * Ku +
                                        static_cast<std::size_t>(m1[k])) *
                                           Ku +
                                       static_cast<std::size_t>(m2[k])];
                    if (total < best_cost)
                    {
                        best_cost = total;
                        best = Association{{identity(K), l2}, {m1, m2}};
                    }
                } while (std::next_permutation(m2.begin(), m2.end()));
            } while (std::next_permutation(m1.begin(), m1.end()));
        } while (std::next_permutation(l2.begin(), l2.end()));
    }

    if (!best)
        throw LocalizationError("localization failure: no candidate association produced a finite cost");
    return assemble(*best, cache, scored);
}

TruthAssociation truth_association(const Scenario &scenario, const SystemConfig &config)
{
    TruthAssociation t;
    t.sets = oracle_ranges(scenario, config);
    const TrueBins bins = true_bins(scenario, config);
    const auto K = scenario.targets.size();

    const auto rank_of = [](const std::vector<double> &set, double value) {
        const auto it = std::lower_bound(set.begin(), set.end(), value - 1e-9);
        if (it == set.end() || std::abs(*it - value) > 1e-9)
            throw std::logic_error("truth_association: quantized range missing from its set");
        return static_cast<int>(it - set.begin());
    };

    std::array<std::vector<int>, 2> lam, mu;
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t j = 0; j < K; ++j)
        {
            lam[m].push_back(rank_of(t.sets.d_at[m], bin_midpoint(bins.at[m][j], PathKind::bs_target_bs, config)));
            mu[m].push_back(
                rank_of(t.sets.d_aita[m], bin_midpoint(bins.aita[m][j], PathKind::bs_irs_target_bs, config)));
        }

    t.target_of_label.assign(K, -1);
    for (std::size_t j = 0; j < K; ++j)
        t.target_of_label[static_cast<std::size_t>(lam[0][j])] = static_cast<int>(j);
    if (std::find(t.target_of_label.begin(), t.target_of_label.end(), -1) != t.target_of_label.end())
        throw std::invalid_argument("truth_association: targets share a BS 1 delay bin");
    for (std::size_t m = 0; m < 2; ++m)
    {
        t.association.lambda[m].resize(K);
        t.association.mu[m].resize(K);
        for (std::size_t k = 0; k < K; ++k)
        {
            const auto j = static_cast<std::size_t>(t.target_of_label[k]);
            t.association.lambda[m][k] = lam[m][j];
            t.association.mu[m][k] = mu[m][j];
        }
    }
    return t;
}

} // namespace trilat

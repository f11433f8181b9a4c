#pragma once

#include "bellfam/quantum.hpp"
#include "bellfam/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

namespace bellfam {

namespace detail {

/// Independent deterministic stream per (seed, stream) pair.
inline std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return std::mt19937_64(z);
}

struct NelderMeadOptions {
    int max_iterations = 6000;
    double f_rel_tol = 1e-13;
    double x_rel_tol = 1e-12;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Plain downhill simplex (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). Tolerances are relative to the running best.
template <class F>
NelderMeadResult nelder_mead_minimize(F&& f, const std::vector<double>& x0,
                                      const std::vector<double>& steps,
                                      const NelderMeadOptions& opts = {}) {
    const std::size_t d = x0.size();
    auto safe_eval = [&](const std::vector<double>& x) {
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    std::vector<std::vector<double>> simplex(d + 1, x0);
    for (std::size_t i = 0; i < d; ++i) simplex[i + 1][i] += steps[i] != 0 ? steps[i] : 1e-3;
    std::vector<double> values(d + 1);
    for (std::size_t i = 0; i <= d; ++i) values[i] = safe_eval(simplex[i]);

    std::vector<std::size_t> order(d + 1);
    NelderMeadResult result;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        result.iterations = iter;
        for (std::size_t i = 0; i <= d; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

        const double f_best = values[order[0]];
        const double f_worst = values[order[d]];
        const double f_scale = std::max(std::abs(f_best), 1e-300);
        double x_spread = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const double lo = simplex[order[0]][i];
            double span = 0;
            for (std::size_t k = 1; k <= d; ++k) span = std::max(span, std::abs(simplex[order[k]][i] - lo));
            x_spread = std::max(x_spread, span / std::max(1.0, std::abs(lo)));
        }
        if (f_worst - f_best <= opts.f_rel_tol * f_scale || x_spread <= opts.x_rel_tol) {
            result.converged = true;
            break;
        }

        std::vector<double> centroid(d, 0.0);
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t i = 0; i < d; ++i) centroid[i] += simplex[order[k]][i] / static_cast<double>(d);
        const auto& worst = simplex[order[d]];

        auto blend = [&](double t) {
            std::vector<double> x(d);
            for (std::size_t i = 0; i < d; ++i) x[i] = centroid[i] + t * (centroid[i] - worst[i]);
            return x;
        };

        auto reflected = blend(1.0);
        const double f_reflected = safe_eval(reflected);
        if (f_reflected < f_best) {
            auto expanded = blend(2.0);
            const double f_expanded = safe_eval(expanded);
            if (f_expanded < f_reflected) {
                simplex[order[d]] = std::move(expanded);
                values[order[d]] = f_expanded;
            } else {
                simplex[order[d]] = std::move(reflected);
                values[order[d]] = f_reflected;
            }
            continue;
        }
        if (f_reflected < values[order[d - 1]]) {
            simplex[order[d]] = std::move(reflected);
            values[order[d]] = f_reflected;
            continue;
        }
        const bool outside = f_reflected < f_worst;
        auto contracted = blend(outside ? 0.5 : -0.5);
        const double f_contracted = safe_eval(contracted);
        if (f_contracted < (outside ? f_reflected : f_worst)) {
            simplex[order[d]] = std::move(contracted);
            values[order[d]] = f_contracted;
            continue;
        }
        for (std::size_t k = 1; k <= d; ++k) {
            auto& x = simplex[order[k]];
            for (std::size_t i = 0; i < d; ++i)
                x[i] = simplex[order[0]][i] + 0.5 * (x[i] - simplex[order[0]][i]);
            values[order[k]] = safe_eval(x);
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= d; ++i)
        if (values[i] < values[best]) best = i;
    result.x = simplex[best];
    result.f = values[best];
    return result;
}

/// Precompiled symmetric objective: tuples with pi*B weights and party counts.
struct SymmetricObjective {
    int n = 0;
    int m = 0;
    bool analytic = false;
    bool two_level = true;
    struct Term {
        IndexTuple tuple;
        double pi_b = 0;
        int level = 0;
    };
    std::vector<Term> terms;

    static SymmetricObjective build(const BellInequality& ineq, EvalPath path) {
        SymmetricObjective obj;
        obj.n = ineq.parties();
        obj.m = ineq.settings();
        if (path == EvalPath::Analytic && !analytic_supported(ineq))
            throw std::invalid_argument("optimize: analytic path unsupported for this support");
        obj.analytic = path != EvalPath::BruteForce && analytic_supported(ineq);
        for (const auto& [tuple, coeff] : ineq.coefficients()) {
            Term term;
            term.tuple = tuple;
            term.pi_b = permutation_count(tuple).convert_to<double>() * coeff.convert_to<double>();
            term.level = tuple.nonzero_count();
            if (term.level != obj.n && term.level != obj.n - 1) obj.two_level = false;
            obj.terms.push_back(std::move(term));
        }
        return obj;
    }

    double probability(double alpha, const std::vector<double>& phis, const IndexTuple& t) const {
        if (analytic) return analytic_conditional_probability(alpha, phis, n, t);
        const StateVector psi = symmetric_state(n, alpha);
        std::vector<MeasurementOperator> ops;
        ops.reserve(phis.size());
        for (double phi : phis) ops.emplace_back(phi);
        return conditional_probability_bruteforce(psi, ops, t);
    }

    double value(double alpha, const std::vector<double>& phis, double eta) const {
        if (analytic) {
            double total = 0;
            for (const auto& term : terms)
                total += term.pi_b * std::pow(eta, term.level) *
                         analytic_conditional_probability(alpha, phis, n, term.tuple);
            return total;
        }
        const StateVector psi = symmetric_state(n, alpha);
        std::vector<MeasurementOperator> ops;
        ops.reserve(phis.size());
        for (double phi : phis) ops.emplace_back(phi);
        double total = 0;
        for (const auto& term : terms)
            total += term.pi_b * std::pow(eta, term.level) *
                     conditional_probability_bruteforce(psi, ops, term.tuple);
        return total;
    }

    EtaContributions contributions(double alpha, const std::vector<double>& phis) const {
        EtaContributions out;
        for (const auto& term : terms) {
            const double p = probability(alpha, phis, term.tuple);
            (term.level == n ? out.full : out.sub) += term.pi_b * p;
        }
        return out;
    }
};

} // namespace detail

struct OptimizeOptions {
    int restarts = 20;
    std::uint64_t seed = 1;
    bool constrain_alpha = false; // tie alpha to arctan(xi) and search angles only
    int threads = 0;
    EvalPath path = EvalPath::Auto;
    int max_iterations = 6000;
    double initial_range = 0.5; // restart angles drawn uniformly from [-range, range]
    std::vector<std::vector<double>> warm_starts; // full parameter vectors tried before restarts
};

struct OptimizationResult {
    double alpha = 0;
    std::vector<double> phis;
    double value = 0;
    double eta = 1;
    bool converged = false;
    int restarts_used = 0;
    bool has_contributions = false;
    double sub = 0;
    double full = 0;
};

/// Multi-start simplex search of the detection-weighted value over
/// (alpha, phi_1..phi_m), or over the angles alone with alpha bound to
/// arctan(xi). Deterministic for a fixed seed; restarts run independently.
inline OptimizationResult optimize_angles(const BellInequality& ineq, double eta,
                                          const OptimizeOptions& opts = {}) {
    if (eta <= 0.0 || eta > 1.0) throw std::invalid_argument("optimize_angles: eta outside (0,1]");
    const auto objective = detail::SymmetricObjective::build(ineq, opts.path);
    const int m = objective.m;
    const int n = objective.n;
    const std::size_t dim = static_cast<std::size_t>(opts.constrain_alpha ? m : m + 1);

    auto unpack = [&](const std::vector<double>& p, double& alpha, std::vector<double>& phis) {
        if (opts.constrain_alpha) {
            phis.assign(p.begin(), p.end());
            for (int j = 2; j <= m; ++j)
                if (MeasurementOperator(phis[static_cast<std::size_t>(j - 1)]).c_minus == 0.0)
                    return false;
            alpha = mixing_angle_for_threshold(phis, n);
        } else {
            alpha = p[0];
            phis.assign(p.begin() + 1, p.end());
        }
        return true;
    };

    auto negated = [&](const std::vector<double>& p) {
        double alpha = 0;
        std::vector<double> phis;
        if (!unpack(p, alpha, phis)) return std::numeric_limits<double>::infinity();
        return -objective.value(alpha, phis, eta);
    };

    struct Run {
        double value = -std::numeric_limits<double>::infinity();
        std::vector<double> params;
        bool converged = false;
    };
    const std::size_t total_runs = opts.warm_starts.size() + static_cast<std::size_t>(opts.restarts);
    std::vector<Run> runs(total_runs);

    auto execute = [&](std::size_t run_index) {
        std::vector<double> x0;
        if (run_index < opts.warm_starts.size()) {
            x0 = opts.warm_starts[run_index];
            if (x0.size() != dim) return; // ignore malformed seeds
        } else {
            auto rng = detail::seeded_rng(opts.seed, run_index - opts.warm_starts.size());
            std::uniform_real_distribution<double> uniform(-opts.initial_range, opts.initial_range);
            x0.resize(dim);
            for (auto& v : x0) v = uniform(rng);
        }
        std::vector<double> steps(dim);
        for (std::size_t i = 0; i < dim; ++i) steps[i] = std::max(std::abs(x0[i]) * 0.25, 1e-9);
        if (run_index >= opts.warm_starts.size())
            for (auto& s : steps) s = std::max(s, 0.05);

        detail::NelderMeadOptions nm;
        nm.max_iterations = opts.max_iterations;
        auto first = detail::nelder_mead_minimize(negated, x0, steps, nm);
        // polish from the found point with a tight simplex
        std::vector<double> polish_steps(dim);
        for (std::size_t i = 0; i < dim; ++i)
            polish_steps[i] = std::max(std::abs(first.x[i]) * 0.05, 1e-12);
        auto second = detail::nelder_mead_minimize(negated, first.x, polish_steps, nm);
        const auto& pick = second.f < first.f ? second : first;
        runs[run_index] = Run{-pick.f, pick.x, pick.converged};
    };

    const int workers = std::min<int>(resolve_threads(opts.threads), static_cast<int>(total_runs));
    if (workers <= 1) {
        for (std::size_t r = 0; r < total_runs; ++r) execute(r);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t r = static_cast<std::size_t>(w); r < total_runs;
                     r += static_cast<std::size_t>(workers))
                    execute(r);
            });
        for (auto& t : pool) t.join();
    }

    std::size_t best = 0;
    for (std::size_t r = 1; r < total_runs; ++r)
        if (runs[r].value > runs[best].value) best = r;

    OptimizationResult result;
    result.eta = eta;
    result.restarts_used = static_cast<int>(total_runs);
    result.converged = runs[best].converged;
    result.value = runs[best].value;
    std::vector<double> phis;
    double alpha = 0;
    unpack(runs[best].params, alpha, phis);
    result.alpha = alpha;
    result.phis = std::move(phis);
    if (objective.two_level) {
        const auto contrib = objective.contributions(result.alpha, result.phis);
        result.has_contributions = true;
        result.sub = contrib.sub;
        result.full = contrib.full;
    }
    return result;
}

/// A violation certificate at detection efficiency eta. For two-level
/// supports the margin is measured in eta units through the contribution
/// ratio, which stays well conditioned when the violation itself collapses
/// near threshold; otherwise the raw value is compared against the absolute
/// certification threshold.
inline bool certified_violation(const OptimizationResult& result, double threshold = 1e-9) {
    if (result.has_contributions && result.sub < 0 && result.full > 0) {
        const double ratio = -result.sub / result.full;
        if (result.eta - ratio > threshold * result.eta) return true;
    }
    return result.value > threshold;
}

struct ThresholdOptions {
    double tol = 1e-3;
    double lo = 0.0;
    double hi = 1.0;
    double certification = 1e-9;
    OptimizeOptions optimize;
};

namespace detail {

/// Shrink a cached solution toward threshold with the observed per-setting
/// power laws phi_j ~ eps^(2^(m-1-j)), alpha ~ eps^(2^(m-3)).
inline std::vector<double> rescale_toward_threshold(const std::vector<double>& params, int m,
                                                    double eps_from, double eps_to) {
    if (!(eps_from > 0) || !(eps_to > 0)) return params;
    const double r = eps_to / eps_from;
    std::vector<double> out = params;
    const bool has_alpha = static_cast<int>(params.size()) == m + 1;
    const std::size_t offset = has_alpha ? 1 : 0;
    if (has_alpha) out[0] *= std::pow(r, std::pow(2.0, m - 3));
    for (int j = 1; j <= m; ++j)
        out[offset + static_cast<std::size_t>(j - 1)] *= std::pow(r, std::pow(2.0, m - 1 - j));
    return out;
}

} // namespace detail

/// Bisection on eta of "optimization certifies a violation", returning the
/// upper endpoint of the final bracket. Earlier successes seed later steps,
/// both as-is and rescaled toward the running threshold estimate.
inline double critical_efficiency_numeric(const BellInequality& ineq,
                                          const ThresholdOptions& opts = {}) {
    const int m = ineq.settings();
    struct Success {
        double eta;
        std::vector<double> params;
    };
    std::vector<Success> successes;

    auto pack = [&](const OptimizationResult& r) {
        std::vector<double> p;
        if (!opts.optimize.constrain_alpha) p.push_back(r.alpha);
        p.insert(p.end(), r.phis.begin(), r.phis.end());
        return p;
    };

    auto attempt = [&](double eta, double lo_estimate) {
        OptimizeOptions local = opts.optimize;
        for (auto it = successes.rbegin(); it != successes.rend(); ++it) {
            local.warm_starts.push_back(it->params);
            local.warm_starts.push_back(detail::rescale_toward_threshold(
                it->params, m, it->eta - lo_estimate, eta - lo_estimate));
            if (local.warm_starts.size() >= 8) break;
        }
        auto result = optimize_angles(ineq, eta, local);
        const bool ok = certified_violation(result, opts.certification);
        if (ok) successes.push_back({eta, pack(result)});
        return ok;
    };

    double lo = opts.lo;
    double hi = opts.hi;
    if (!attempt(hi, lo)) throw no_threshold_error("critical_efficiency_numeric: no violation at eta = 1");
    while (hi - lo > opts.tol) {
        const double mid = 0.5 * (lo + hi);
        if (attempt(mid, lo))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

struct PowerFit {
    double slope = 0;
    double intercept = 0;
    double slope_stderr = 0;
    int points = 0;
};

namespace detail {

inline PowerFit fit_loglog(const std::vector<double>& eps, const std::vector<double>& q) {
    PowerFit fit;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0) || !(std::abs(q[i]) > 0)) continue;
        xs.push_back(std::log(eps[i]));
        ys.push_back(std::log(std::abs(q[i])));
    }
    fit.points = static_cast<int>(xs.size());
    if (fit.points < 2) return fit;
    double mx = 0, my = 0;
    for (int i = 0; i < fit.points; ++i) {
        mx += xs[static_cast<std::size_t>(i)];
        my += ys[static_cast<std::size_t>(i)];
    }
    mx /= fit.points;
    my /= fit.points;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < fit.points; ++i) {
        const double dx = xs[static_cast<std::size_t>(i)] - mx;
        sxx += dx * dx;
        sxy += dx * (ys[static_cast<std::size_t>(i)] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (fit.points > 2) {
        double ss = 0;
        for (int i = 0; i < fit.points; ++i) {
            const double r = ys[static_cast<std::size_t>(i)] - fit.intercept -
                             fit.slope * xs[static_cast<std::size_t>(i)];
            ss += r * r;
        }
        fit.slope_stderr = std::sqrt(ss / (fit.points - 2) / sxx);
    }
    return fit;
}

} // namespace detail

/// eta_k = eta_crit + span * ratio^k, k = 0..points-1 (descending toward threshold).
inline std::vector<double> geometric_eta_grid(double eta_crit, double span = 0.1, int points = 10,
                                              double ratio = 0.72) {
    if (points < 1 || span <= 0 || ratio <= 0 || ratio >= 1)
        throw std::invalid_argument("geometric_eta_grid: bad parameters");
    std::vector<double> grid(static_cast<std::size_t>(points));
    double eps = span;
    for (int k = 0; k < points; ++k) {
        grid[static_cast<std::size_t>(k)] = eta_crit + eps;
        eps *= ratio;
    }
    return grid;
}

struct ScalingOptions {
    OptimizeOptions optimize;
    double certification = 1e-9;
};

struct ScalingPoint {
    double eta = 0;
    double alpha = 0;
    std::vector<double> phis;
    double value = 0;
    bool ok = false;
};

struct ScalingResult {
    double eta_crit = 0;
    std::vector<ScalingPoint> points;
    std::vector<PowerFit> phi_fits;
    PowerFit alpha_fit;
    PowerFit violation_fit;
    bool complete = false;
};

/// Optimizes along a geometric eta grid approaching the threshold and fits
/// log|phi_j|, log|alpha| and log(violation) against log(eta - eta_crit).
inline ScalingResult scaling_exponents(const BellInequality& ineq, double eta_crit,
                                       const std::vector<double>& grid,
                                       const ScalingOptions& opts = {}) {
    if (grid.size() < 8)
        throw std::invalid_argument("scaling_exponents: need at least 8 grid points");
    for (double eta : grid)
        if (!(eta > eta_crit)) throw std::invalid_argument("scaling_exponents: grid point at or below threshold");
    std::vector<double> ordered = grid;
    std::sort(ordered.rbegin(), ordered.rend());

    const int m = ineq.settings();
    ScalingResult result;
    result.eta_crit = eta_crit;
    std::vector<double> prev_params;
    double prev_eta = 0;
    for (double eta : ordered) {
        OptimizeOptions local = opts.optimize;
        if (!prev_params.empty()) {
            local.warm_starts.push_back(prev_params);
            local.warm_starts.push_back(detail::rescale_toward_threshold(
                prev_params, m, prev_eta - eta_crit, eta - eta_crit));
        }
        auto opt = optimize_angles(ineq, eta, local);
        ScalingPoint point;
        point.eta = eta;
        point.alpha = opt.alpha;
        point.phis = opt.phis;
        point.value = opt.value;
        point.ok = certified_violation(opt, opts.certification) && opt.value > 0;
        if (point.ok) {
            prev_params.clear();
            if (!opts.optimize.constrain_alpha) prev_params.push_back(opt.alpha);
            prev_params.insert(prev_params.end(), opt.phis.begin(), opt.phis.end());
            prev_eta = eta;
        }
        result.points.push_back(std::move(point));
    }

    std::vector<double> eps;
    std::vector<std::vector<double>> phi_abs(static_cast<std::size_t>(m));
    std::vector<double> alpha_abs, values;
    result.complete = true;
    for (const auto& point : result.points) {
        if (!point.ok) {
            result.complete = false;
            continue;
        }
        eps.push_back(point.eta - eta_crit);
        for (int j = 0; j < m; ++j)
            phi_abs[static_cast<std::size_t>(j)].push_back(std::abs(point.phis[static_cast<std::size_t>(j)]));
        alpha_abs.push_back(std::abs(point.alpha));
        values.push_back(point.value);
    }
    result.phi_fits.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
        result.phi_fits[static_cast<std::size_t>(j)] = detail::fit_loglog(eps, phi_abs[static_cast<std::size_t>(j)]);
    result.alpha_fit = detail::fit_loglog(eps, alpha_abs);
    result.violation_fit = detail::fit_loglog(eps, values);
    return result;
}

} // namespace bellfam

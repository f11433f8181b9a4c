#pragma once

#include "bellfam/family.hpp"
#include "bellfam/optimize.hpp"
#include "bellfam/statevector.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace bellfam {

/// One ordered product term of a Bell functional: weight times the joint
/// outcome-one probability of the per-party settings (0 = identity).
struct BellTerm {
    double weight = 0;
    std::vector<int> settings;
};

/// Fully expanded functional: violation means value > violation_offset.
struct BellFunctional {
    int n = 0;
    std::vector<int> settings_per_party;
    std::vector<BellTerm> terms;
    double violation_offset = 0;
};

/// Ordered expansion of a symmetric inequality with detection weights folded in.
inline BellFunctional functional_from_symmetric(const BellInequality& ineq, double eta) {
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("functional: eta outside [0,1]");
    BellFunctional f;
    f.n = ineq.parties();
    f.settings_per_party.assign(static_cast<std::size_t>(f.n), ineq.settings());
    for (const auto& [tuple, coeff] : ineq.coefficients()) {
        const double weight = coeff.convert_to<double>() * std::pow(eta, tuple.nonzero_count());
        std::vector<int> perm = tuple.values();
        do {
            f.terms.push_back(BellTerm{weight, perm});
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    return f;
}

/// Detection-weighted CH-type functional; the classical bound 2 - 2c is not
/// eta-scaled, so it becomes the violation offset.
inline BellFunctional functional_from_chtype(const ChTypeInequality& ineq, double eta) {
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("functional: eta outside [0,1]");
    const double e2 = eta * eta;
    BellFunctional f;
    f.n = 2;
    f.settings_per_party = {2, 2};
    f.terms = {
        {e2, {1, 1}}, {e2, {1, 2}}, {e2, {2, 1}}, {-e2, {2, 2}},
        {-ineq.c * eta, {1, 0}}, {-ineq.c * eta, {0, 1}},
    };
    f.violation_offset = ineq.classical_bound();
    return f;
}

namespace detail {

inline void apply_term(StateVector& work, const BellTerm& term,
                       const std::vector<std::vector<Mat2>>& settings, int skip_party = -1) {
    for (std::size_t i = 0; i < term.settings.size(); ++i) {
        const int j = term.settings[i];
        if (j == 0 || static_cast<int>(i) == skip_party) continue;
        apply_single_qubit(work, static_cast<int>(i), settings[i][static_cast<std::size_t>(j - 1)]);
    }
}

inline double functional_value(const BellFunctional& f, const StateVector& psi,
                               const std::vector<std::vector<Mat2>>& settings) {
    double total = 0;
    StateVector work;
    for (const auto& term : f.terms) {
        work = psi;
        apply_term(work, term, settings);
        total += term.weight * inner(psi, work);
    }
    return total;
}

/// Rayleigh/power iteration on the shifted operator G + shift I; the shift
/// makes it PSD, so warm starts never lose ground.
inline double leading_eigenvector(const BellFunctional& f,
                                  const std::vector<std::vector<Mat2>>& settings, double shift,
                                  StateVector& state, double tol, int max_iterations) {
    const std::size_t dim = state.size();
    StateVector next(dim), work(dim);
    double rayleigh_prev = 0;
    bool have_prev = false;
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (const auto& term : f.terms) {
            work = state;
            apply_term(work, term, settings);
            for (std::size_t i = 0; i < dim; ++i) next[i] += term.weight * work[i];
        }
        for (std::size_t i = 0; i < dim; ++i) next[i] += shift * state[i];
        const double rayleigh = inner(state, next);
        const double norm = std::sqrt(inner(next, next));
        if (norm == 0.0) break; // state annihilated; keep it
        for (std::size_t i = 0; i < dim; ++i) state[i] = next[i] / norm;
        if (have_prev && std::abs(rayleigh - rayleigh_prev) <= tol * std::max(1.0, std::abs(rayleigh)))
            break;
        rayleigh_prev = rayleigh;
        have_prev = true;
    }
    return functional_value(f, state, settings);
}

struct Eigen2 {
    double values[2];
    double vectors[2][2]; // vectors[k] is the unit eigenvector of values[k]
};

inline Eigen2 symmetric_eigen2(double a00, double a01, double a11) {
    Eigen2 e;
    const double half_trace = 0.5 * (a00 + a11);
    const double disc = std::sqrt(0.25 * (a00 - a11) * (a00 - a11) + a01 * a01);
    e.values[0] = half_trace + disc;
    e.values[1] = half_trace - disc;
    double vx = a01, vy = e.values[0] - a00;
    if (std::abs(vx) + std::abs(vy) == 0.0) {
        vx = 1;
        vy = 0;
    }
    const double norm = std::hypot(vx, vy);
    e.vectors[0][0] = vx / norm;
    e.vectors[0][1] = vy / norm;
    e.vectors[1][0] = -e.vectors[0][1];
    e.vectors[1][1] = e.vectors[0][0];
    return e;
}

} // namespace detail

struct SeesawOptions {
    int max_rounds = 500;
    double value_tol = 1e-11;
    double eigen_tol = 1e-12;
    int power_iteration_cap = 20000;
    double tie_tol = 1e-12;
    std::uint64_t seed = 1;
    int restarts = 1;
    int threads = 0;
};

struct SeesawResult {
    StateVector state;
    std::vector<std::vector<Mat2>> measurements; // [party][setting-1]
    double value = 0;
    bool converged = false;
    int rounds = 0;
};

namespace detail {

inline SeesawResult seesaw_single(const BellFunctional& f, const SeesawOptions& opts,
                                  std::uint64_t stream) {
    auto rng = seeded_rng(opts.seed, stream);
    std::uniform_real_distribution<double> circle(0.0, 2.0 * 3.14159265358979323846);
    const std::size_t dim = std::size_t(1) << f.n;

    SeesawResult result;
    result.measurements.resize(static_cast<std::size_t>(f.n));
    for (int i = 0; i < f.n; ++i)
        for (int j = 0; j < f.settings_per_party[static_cast<std::size_t>(i)]; ++j)
            result.measurements[static_cast<std::size_t>(i)].push_back(
                MeasurementOperator(circle(rng)).matrix());

    result.state.assign(dim, 0.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double norm = 0;
    for (auto& a : result.state) {
        a = gauss(rng);
        norm += a * a;
    }
    norm = std::sqrt(norm);
    for (auto& a : result.state) a /= norm;

    double shift = 1.0;
    for (const auto& term : f.terms) shift += std::abs(term.weight);

    double previous = -std::numeric_limits<double>::infinity();
    const double slack = 1e-9 * shift;
    StateVector work(dim);
    for (int round = 1; round <= opts.max_rounds; ++round) {
        result.rounds = round;
        const double after_state = detail::leading_eigenvector(
            f, result.measurements, shift, result.state, opts.eigen_tol, opts.power_iteration_cap);
        if (after_state < previous - slack)
            throw std::logic_error("seesaw: state step decreased the objective");

        for (int i = 0; i < f.n; ++i) {
            for (int j = 1; j <= f.settings_per_party[static_cast<std::size_t>(i)]; ++j) {
                double m00 = 0, m01 = 0, m11 = 0;
                for (const auto& term : f.terms) {
                    if (term.settings[static_cast<std::size_t>(i)] != j) continue;
                    work = result.state;
                    detail::apply_term(work, term, result.measurements, i);
                    const std::size_t bit = std::size_t(1) << i;
                    double t00 = 0, t01 = 0, t10 = 0, t11 = 0;
                    for (std::size_t base = 0; base < dim; ++base) {
                        if (base & bit) continue;
                        const double p0 = result.state[base], p1 = result.state[base | bit];
                        const double v0 = work[base], v1 = work[base | bit];
                        t00 += p0 * v0;
                        t01 += p0 * v1;
                        t10 += p1 * v0;
                        t11 += p1 * v1;
                    }
                    m00 += term.weight * t00;
                    m01 += term.weight * 0.5 * (t01 + t10);
                    m11 += term.weight * t11;
                }
                const auto eig = detail::symmetric_eigen2(m00, m01, m11);
                if (std::abs(eig.values[0]) <= opts.tie_tol || std::abs(eig.values[1]) <= opts.tie_tol)
                    continue; // degenerate direction: keep the previous projector
                Mat2 next{0, 0, 0, 0};
                for (int k = 0; k < 2; ++k) {
                    if (eig.values[k] <= 0) continue;
                    next.a00 += eig.vectors[k][0] * eig.vectors[k][0];
                    next.a01 += eig.vectors[k][0] * eig.vectors[k][1];
                    next.a10 += eig.vectors[k][0] * eig.vectors[k][1];
                    next.a11 += eig.vectors[k][1] * eig.vectors[k][1];
                }
                result.measurements[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)] = next;
            }
        }
        result.value = detail::functional_value(f, result.state, result.measurements);
        if (result.value < after_state - slack)
            throw std::logic_error("seesaw: measurement sweep decreased the objective");
        if (std::abs(result.value - previous) < opts.value_tol) {
            result.converged = true;
            break;
        }
        previous = result.value;
    }
    return result;
}

} // namespace detail

/// Alternating maximization over the state (leading eigenvector of the Bell
/// operator) and every party's binary measurements (positive eigenspace of
/// the contracted 2x2 operator). Deterministic per seed; restarts keep the
/// best value.
inline SeesawResult seesaw(const BellFunctional& f, const SeesawOptions& opts = {}) {
    const int runs = std::max(1, opts.restarts);
    std::vector<SeesawResult> results(static_cast<std::size_t>(runs));
    const int workers = std::min(resolve_threads(opts.threads), runs);
    auto execute = [&](int r) { results[static_cast<std::size_t>(r)] = detail::seesaw_single(f, opts, static_cast<std::uint64_t>(r)); };
    if (workers <= 1) {
        for (int r = 0; r < runs; ++r) execute(r);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int r = w; r < runs; r += workers) execute(r);
            });
        for (auto& t : pool) t.join();
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < results.size(); ++r)
        if (results[r].value > results[best].value) best = r;
    return results[best];
}

inline SeesawResult seesaw(const BellInequality& ineq, double eta, const SeesawOptions& opts = {}) {
    return seesaw(functional_from_symmetric(ineq, eta), opts);
}

inline SeesawResult seesaw(const ChTypeInequality& ineq, double eta, const SeesawOptions& opts = {}) {
    return seesaw(functional_from_chtype(ineq, eta), opts);
}

struct WFamilyFit {
    double overlap = 0; // |<psi| (x)R_i |w(alpha)>| maximized over alpha and local frames
    double alpha = 0;
};

/// Best overlap with the one-excitation family cos(a)|0..0> - sin(a)|W>, up
/// to a local orthogonal frame per party. The frame search removes the gauge
/// freedom of see-saw solutions; without it the overlap would depend on the
/// random initial settings.
inline WFamilyFit fidelity_with_w_family(const StateVector& psi, std::uint64_t seed = 7) {
    const int n = qubit_count(psi);
    const std::size_t dim = psi.size();

    auto overlap_for = [&](double alpha, const std::vector<double>& thetas, unsigned flips) {
        StateVector w = symmetric_state(n, alpha);
        for (int i = 0; i < n; ++i) {
            const double c = std::cos(thetas[static_cast<std::size_t>(i)]);
            const double s = std::sin(thetas[static_cast<std::size_t>(i)]);
            Mat2 rot{c, -s, s, c};
            if ((flips >> i) & 1u) {
                rot.a01 = -rot.a01;
                rot.a11 = -rot.a11;
            }
            apply_single_qubit(w, i, rot);
        }
        double dot = 0;
        for (std::size_t k = 0; k < dim; ++k) dot += psi[k] * w[k];
        return dot;
    };

    WFamilyFit best;
    auto rng = detail::seeded_rng(seed, 0);
    std::uniform_real_distribution<double> uniform(-1.5, 1.5);
    for (unsigned flips = 0; flips < (1u << n); ++flips) {
        for (int start = 0; start < 6; ++start) {
            std::vector<double> x0(static_cast<std::size_t>(n + 1), 0.0);
            if (start > 0)
                for (auto& v : x0) v = uniform(rng);
            std::vector<double> steps(x0.size(), 0.3);
            auto objective = [&](const std::vector<double>& p) {
                std::vector<double> thetas(p.begin() + 1, p.end());
                return -std::abs(overlap_for(p[0], thetas, flips));
            };
            detail::NelderMeadOptions nm;
            nm.max_iterations = 2000;
            auto res = detail::nelder_mead_minimize(objective, x0, steps, nm);
            if (-res.f > best.overlap) {
                best.overlap = -res.f;
                best.alpha = std::remainder(res.x[0], 2.0 * 3.14159265358979323846);
            }
        }
    }
    return best;
}

/// Von Neumann entropy (base 2) of one qubit of a two-qubit pure state.
inline double entanglement_entropy_2qubit(const StateVector& psi) {
    if (psi.size() != 4) throw std::invalid_argument("entanglement_entropy_2qubit: need 2 qubits");
    double r00 = 0, r01 = 0, r11 = 0;
    for (int b1 = 0; b1 < 2; ++b1) {
        const double a0 = psi[static_cast<std::size_t>(2 * b1)];
        const double a1 = psi[static_cast<std::size_t>(1 + 2 * b1)];
        r00 += a0 * a0;
        r01 += a0 * a1;
        r11 += a1 * a1;
    }
    const auto eig = detail::symmetric_eigen2(r00, r01, r11);
    double entropy = 0;
    for (double lambda : eig.values)
        if (lambda > 1e-15) entropy -= lambda * std::log2(lambda);
    return entropy;
}

} // namespace bellfam

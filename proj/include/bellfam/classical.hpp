#pragma once

#include "bellfam/family.hpp"
#include "bellfam/inequality.hpp"
#include "bellfam/util.hpp"

#include <bit>
#include <cstdint>
#include <thread>
#include <vector>

namespace bellfam {

namespace detail {

/// Precomputed per-inequality evaluation data: for every stored tuple, one
/// bitmask per distinct index ordering. A strategy mask realizes an ordering
/// iff it contains all the ordering's (party, setting) bits; zero indices
/// contribute no bit.
struct EvalPlan {
    int n = 0;
    int m = 0;
    struct Term {
        IndexTuple tuple;
        Rational coeff;
        long long coeff_int = 0;
        std::vector<std::uint64_t> orderings;
    };
    std::vector<Term> terms;
    bool integer_coeffs = true;

    static EvalPlan build(const BellInequality& ineq) {
        EvalPlan plan;
        plan.n = ineq.parties();
        plan.m = ineq.settings();
        for (const auto& [tuple, coeff] : ineq.coefficients()) {
            Term term;
            term.tuple = tuple;
            term.coeff = coeff;
            if (denominator(coeff) == 1 && numerator(coeff) >= LLONG_MIN / 4 &&
                numerator(coeff) <= LLONG_MAX / 4) {
                term.coeff_int = numerator(coeff).convert_to<long long>();
            } else {
                plan.integer_coeffs = false;
            }
            std::vector<int> perm = tuple.values();
            do {
                std::uint64_t mask = 0;
                for (int i = 0; i < plan.n; ++i)
                    if (perm[static_cast<std::size_t>(i)] > 0)
                        mask |= std::uint64_t(1)
                                << (i * plan.m + perm[static_cast<std::size_t>(i)] - 1);
                term.orderings.push_back(mask);
            } while (std::next_permutation(perm.begin(), perm.end()));
            plan.terms.push_back(std::move(term));
        }
        return plan;
    }

    long long ordering_count(const Term& term, std::uint64_t strategy_bits) const {
        long long count = 0;
        for (std::uint64_t mask : term.orderings)
            count += ((strategy_bits & mask) == mask);
        return count;
    }

    Rational value(std::uint64_t strategy_bits) const {
        Rational total(0);
        for (const auto& term : terms) {
            const long long count = ordering_count(term, strategy_bits);
            if (count != 0) total += term.coeff * count;
        }
        return total;
    }

    /// Valid only when integer_coeffs; counts are bounded by n! so the
    /// accumulator stays far from overflow.
    __int128 value_int(std::uint64_t strategy_bits) const {
        __int128 total = 0;
        for (const auto& term : terms)
            total += static_cast<__int128>(term.coeff_int) * ordering_count(term, strategy_bits);
        return total;
    }
};

inline Rational rational_from_int128(__int128 v) {
    const bool neg = v < 0;
    unsigned __int128 mag = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
    BigInt big = static_cast<std::uint64_t>(mag >> 64);
    big <<= 64;
    big += static_cast<std::uint64_t>(mag);
    if (neg) big = -big;
    return Rational(big);
}

} // namespace detail

/// Exact value of the Bell expression on one deterministic strategy: the sum
/// over canonical tuples of the coefficient times the number of distinct
/// index orderings whose outcome product is one.
inline Rational strategy_value(const BellInequality& ineq, const DeterministicStrategy& s) {
    if (s.parties() != ineq.parties() || s.settings() != ineq.settings())
        throw std::invalid_argument("strategy_value: dimension mismatch");
    return detail::EvalPlan::build(ineq).value(s.bits());
}

struct ClassicalMaximumOptions {
    int enumeration_cap_bits = 26;
    int threads = 0;
    std::size_t max_argmax_samples = 8;
};

struct ClassicalMaximumResult {
    Rational maximum;
    std::uint64_t argmax_count = 0;
    std::vector<std::uint64_t> argmax_samples; // lowest strategy masks attaining the maximum
};

/// Exhaustive maximum of strategy_value over all 2^(n m) strategies.
inline ClassicalMaximumResult classical_maximum(const BellInequality& ineq,
                                                const ClassicalMaximumOptions& opts = {}) {
    const int bits = ineq.parties() * ineq.settings();
    if (bits > opts.enumeration_cap_bits)
        throw resource_error("classical_maximum: " + std::to_string(bits) +
                             " strategy bits exceed cap " +
                             std::to_string(opts.enumeration_cap_bits));
    const auto plan = detail::EvalPlan::build(ineq);
    const std::uint64_t total = std::uint64_t(1) << bits;
    const int workers = std::min<int>(resolve_threads(opts.threads),
                                      static_cast<int>(std::min<std::uint64_t>(total, 64)));

    struct Local {
        bool has = false;
        Rational best;
        __int128 best_int = 0;
        std::uint64_t count = 0;
        std::vector<std::uint64_t> samples;
    };
    std::vector<Local> locals(static_cast<std::size_t>(workers));

    auto run = [&](int w) {
        Local& local = locals[static_cast<std::size_t>(w)];
        const std::uint64_t begin = total * w / workers;
        const std::uint64_t end = total * (w + 1) / workers;
        if (plan.integer_coeffs) {
            for (std::uint64_t s = begin; s < end; ++s) {
                const __int128 v = plan.value_int(s);
                if (!local.has || v > local.best_int) {
                    local.has = true;
                    local.best_int = v;
                    local.count = 1;
                    local.samples.assign(1, s);
                } else if (v == local.best_int) {
                    ++local.count;
                    if (local.samples.size() < opts.max_argmax_samples) local.samples.push_back(s);
                }
            }
            local.best = detail::rational_from_int128(local.best_int);
        } else {
            for (std::uint64_t s = begin; s < end; ++s) {
                Rational v = plan.value(s);
                if (!local.has || v > local.best) {
                    local.has = true;
                    local.best = std::move(v);
                    local.count = 1;
                    local.samples.assign(1, s);
                } else if (v == local.best) {
                    ++local.count;
                    if (local.samples.size() < opts.max_argmax_samples) local.samples.push_back(s);
                }
            }
        }
    };

    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }

    ClassicalMaximumResult result;
    bool has = false;
    for (const auto& local : locals) {
        if (!local.has) continue;
        if (!has || local.best > result.maximum) {
            has = true;
            result.maximum = local.best;
            result.argmax_count = local.count;
            result.argmax_samples = local.samples;
        } else if (local.best == result.maximum) {
            result.argmax_count += local.count;
            for (std::uint64_t s : local.samples)
                if (result.argmax_samples.size() < opts.max_argmax_samples)
                    result.argmax_samples.push_back(s);
        }
    }
    return result;
}

/// Exact permanent via Ryser's inclusion-exclusion with Gray-code row-sum
/// updates, O(2^d d) rational operations.
inline Rational permanent(const std::vector<std::vector<Rational>>& matrix) {
    const std::size_t d = matrix.size();
    for (const auto& row : matrix)
        if (row.size() != d) throw std::invalid_argument("permanent: matrix must be square");
    if (d == 0) return Rational(1);
    if (d > 30) throw resource_error("permanent: dimension above 30");

    std::vector<Rational> row_sum(d, Rational(0));
    Rational total(0);
    std::uint64_t gray = 0;
    for (std::uint64_t k = 1; k < (std::uint64_t(1) << d); ++k) {
        const int bit = std::countr_zero(k);
        const std::uint64_t flipped = std::uint64_t(1) << bit;
        gray ^= flipped;
        const bool added = (gray & flipped) != 0;
        for (std::size_t i = 0; i < d; ++i) {
            if (added)
                row_sum[i] += matrix[i][static_cast<std::size_t>(bit)];
            else
                row_sum[i] -= matrix[i][static_cast<std::size_t>(bit)];
        }
        Rational product(1);
        for (std::size_t i = 0; i < d; ++i) {
            if (row_sum[i] == 0) {
                product = 0;
                break;
            }
            product *= row_sum[i];
        }
        if (product == 0) continue;
        const int subset_size = std::popcount(gray);
        if ((static_cast<int>(d) - subset_size) % 2 == 0)
            total += product;
        else
            total -= product;
    }
    return total;
}

/// n x n matrix of Eq.-style column merges for the permanent cross-check:
/// columns 1..m-1 are strategy columns 2..m, columns m..n-1 repeat strategy
/// column m, and the last column is 2 a_{i1} + sum_{k=2}^{m-1} a_{ik}
/// + 2 (n-m+1)/(n-m+2) a_{im} - 2.
inline std::vector<std::vector<Rational>> beta_matrix(const DeterministicStrategy& s) {
    const int n = s.parties();
    const int m = s.settings();
    if (n < m) throw std::invalid_argument("beta_matrix: need n >= m");
    const Rational last_weight = Rational(2 * (n - m + 1), n - m + 2);
    std::vector<std::vector<Rational>> beta(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& row = beta[static_cast<std::size_t>(i)];
        row.resize(static_cast<std::size_t>(n));
        for (int j = 1; j <= m - 1; ++j) row[static_cast<std::size_t>(j - 1)] = s.outcome(i, j + 1);
        for (int j = m; j <= n - 1; ++j) row[static_cast<std::size_t>(j - 1)] = s.outcome(i, m);
        Rational last = Rational(2) * s.outcome(i, 1);
        for (int k = 2; k <= m - 1; ++k) last += s.outcome(i, k);
        last += last_weight * s.outcome(i, m);
        last -= 2;
        row[static_cast<std::size_t>(n - 1)] = std::move(last);
    }
    return beta;
}

/// perm(beta(s)) - Q(s) for a family-shaped inequality, where Q collects the
/// free negative n-party terms scaled by -2 (n-m+1)!. Equals
/// 2 (n-m+1)! * strategy_value(s) identically.
inline Rational permanent_form_value(const BellInequality& ineq, const DeterministicStrategy& s) {
    if (s.parties() != ineq.parties() || s.settings() != ineq.settings())
        throw std::invalid_argument("permanent_form_value: dimension mismatch");
    const FamilySupport support = family_support(ineq);
    const Rational scale = Rational(2 * factorial(support.n - support.m + 1));

    Rational q(0);
    const auto plan = detail::EvalPlan::build(ineq);
    for (const auto& term : plan.terms) {
        bool is_free = false;
        for (const auto& [tuple, value] : support.frees)
            if (tuple == term.tuple) {
                is_free = true;
                break;
            }
        if (!is_free) continue;
        const long long count = plan.ordering_count(term, s.bits());
        if (count != 0) q -= scale * term.coeff * count;
    }
    return permanent(beta_matrix(s)) - q;
}

} // namespace bellfam

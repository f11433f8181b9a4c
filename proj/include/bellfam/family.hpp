#pragma once

#include "bellfam/inequality.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace bellfam {

/// Index multiset shared by all significant terms: 2,...,m-1 once each and m
/// repeated n-m+1 times (n-1 entries total).
inline std::vector<int> family_reference_multiset(int n, int m) {
    if (m < 2 || m > n) throw std::invalid_argument("family: need 2 <= m <= n");
    std::vector<int> r;
    r.reserve(static_cast<std::size_t>(n - 1));
    for (int j = 2; j < m; ++j) r.push_back(j);
    for (int k = 0; k < n - m + 1; ++k) r.push_back(m);
    return r;
}

/// The lone (n-1)-party tuple of the family: index 0 plus the reference multiset.
inline IndexTuple family_reference_tuple(int n, int m) {
    auto r = family_reference_multiset(n, m);
    r.insert(r.begin(), 0);
    return IndexTuple(std::move(r));
}

/// Significant coefficients of the (n, m) family: the (n-1)-party tuple at -1
/// and the n-party tuples obtained by replacing its 0 with l = 1..m, valued 1
/// except n-m+1 for l = m. Classical bound left unset.
inline BellInequality significant_coefficients(int n, int m) {
    if (m < 2 || m > n) throw std::invalid_argument("significant_coefficients: need 2 <= m <= n");
    BellInequality ineq(n, m);
    ineq.set_coefficient(family_reference_tuple(n, m), Rational(-1));
    const auto reference = family_reference_multiset(n, m);
    for (int l = 1; l <= m; ++l) {
        auto indices = reference;
        indices.push_back(l);
        ineq.set_coefficient(IndexTuple(std::move(indices)), Rational(l == m ? n - m + 1 : 1));
    }
    return ineq;
}

/// Magnitude hierarchy |phi_1| << |phi_2| << ... << |phi_m| encoded as
/// strictly decreasing positive exponents: |phi_j| ~ eps^{e_j}.
struct HierarchyExponents {
    std::vector<double> e;

    explicit HierarchyExponents(std::vector<double> exponents) : e(std::move(exponents)) {
        if (e.empty()) throw std::invalid_argument("HierarchyExponents: empty");
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] <= 0) throw std::invalid_argument("HierarchyExponents: exponents must be positive");
            if (i > 0 && e[i] >= e[i - 1])
                throw std::invalid_argument("HierarchyExponents: exponents must strictly decrease");
        }
    }

    static HierarchyExponents geometric(int m, double base = 2.0) {
        std::vector<double> e(static_cast<std::size_t>(m));
        for (int j = 1; j <= m; ++j) e[static_cast<std::size_t>(j - 1)] = std::pow(base, m - j);
        return HierarchyExponents(std::move(e));
    }

    double at(int setting) const { return e.at(static_cast<std::size_t>(setting - 1)); }
};

enum class TermClass { Significant, Negligible, Dominant };

/// Leading-order comparison of an n-party term against the significant ones.
/// E = 2 (sum of exponents of t - sum over the reference multiset - e_w),
/// where w is the largest exponent (smallest setting index) at which the
/// multiset difference between t and the reference is nonzero.
inline TermClass term_class(const IndexTuple& t, int n, int m, const HierarchyExponents& h) {
    if (t.size() != n) throw std::invalid_argument("term_class: tuple length must equal n");
    if (static_cast<int>(h.e.size()) != m)
        throw std::invalid_argument("term_class: hierarchy size must equal m");
    std::vector<int> diff(static_cast<std::size_t>(m + 1), 0);
    double tuple_sum = 0;
    for (int v : t) {
        if (v < 1 || v > m)
            throw std::invalid_argument("term_class: n-party tuple must have indices in [1, m]");
        tuple_sum += h.at(v);
        ++diff[static_cast<std::size_t>(v)];
    }
    double reference_sum = 0;
    for (int v : family_reference_multiset(n, m)) {
        reference_sum += h.at(v);
        --diff[static_cast<std::size_t>(v)];
    }
    int w = 0;
    for (int j = 1; j <= m; ++j)
        if (diff[static_cast<std::size_t>(j)] != 0) {
            w = j;
            break;
        }
    if (w == 0) return TermClass::Significant;
    const double exponent = 2.0 * (tuple_sum - reference_sum - h.at(w));
    constexpr double tol = 1e-9;
    if (exponent > tol) return TermClass::Negligible;
    if (exponent < -tol) return TermClass::Dominant;
    return TermClass::Significant;
}

/// Structural decomposition of a family-shaped inequality: the reference
/// (n-1)-party tuple at -1, the m significant n-party tuples at their fixed
/// values, and any remaining tuples, which must be n-party and negative.
struct FamilySupport {
    int n = 0;
    int m = 0;
    IndexTuple reference;
    std::vector<std::pair<IndexTuple, Rational>> positives;
    std::vector<std::pair<IndexTuple, Rational>> frees;
};

inline FamilySupport family_support(const BellInequality& ineq) {
    const int n = ineq.parties();
    const int m = ineq.settings();
    if (m < 2 || m > n) throw std::invalid_argument("family_support: need 2 <= m <= n");
    FamilySupport support;
    support.n = n;
    support.m = m;
    support.reference = family_reference_tuple(n, m);
    const auto reference = family_reference_multiset(n, m);
    std::map<IndexTuple, Rational> expected;
    for (int l = 1; l <= m; ++l) {
        auto indices = reference;
        indices.push_back(l);
        expected.emplace(IndexTuple(std::move(indices)), Rational(l == m ? n - m + 1 : 1));
    }
    for (const auto& [tuple, value] : ineq.coefficients()) {
        if (tuple == support.reference) {
            if (value != -1)
                throw std::invalid_argument("family_support: reference tuple must carry -1");
            continue;
        }
        auto it = expected.find(tuple);
        if (it != expected.end()) {
            if (value != it->second)
                throw std::invalid_argument("family_support: wrong value on significant tuple " +
                                            tuple.str());
            support.positives.emplace_back(tuple, value);
            expected.erase(it);
            continue;
        }
        if (tuple.nonzero_count() != n)
            throw std::invalid_argument("family_support: unexpected subcorrelation tuple " +
                                        tuple.str());
        if (value >= 0)
            throw std::invalid_argument("family_support: extra n-party tuple " + tuple.str() +
                                        " must be negative");
        support.frees.emplace_back(tuple, value);
    }
    if (ineq.coefficient(support.reference) != -1)
        throw std::invalid_argument("family_support: missing reference tuple");
    if (!expected.empty())
        throw std::invalid_argument("family_support: missing significant tuple " +
                                    expected.begin()->first.str());
    return support;
}

/// The three-party three-setting instance with the small hand-picked free
/// coefficients; classical bound 0.
inline BellInequality preset_333() {
    BellInequality ineq(3, 3);
    ineq.set_coefficient({0, 2, 3}, Rational(-1));
    ineq.set_coefficient({1, 1, 2}, Rational(-1));
    ineq.set_coefficient({1, 1, 3}, Rational(-1));
    ineq.set_coefficient({1, 2, 2}, Rational(-2));
    ineq.set_coefficient({1, 2, 3}, Rational(1));
    ineq.set_coefficient({2, 2, 3}, Rational(1));
    ineq.set_coefficient({2, 3, 3}, Rational(1));
    ineq.set_classical_bound(Rational(0));
    return ineq;
}

/// Two-party CH-type inequality with weight c on the single-party marginals:
///   P(A1B1) + P(A1B2) + P(A2B1) - P(A2B2) - c P(A1) - c P(B1) <= 2 - 2c,
/// c = 2(2^{1/4}-1)/(sqrt(2)-1). Carries an irrational bound, so it lives
/// outside the rational-coefficient representation.
struct ChTypeInequality {
    double c;

    double classical_bound() const { return 2.0 - 2.0 * c; }

    /// Bound seen by the detection-weighted expression after dividing by eta^2.
    double scaled_bound(double eta) const { return classical_bound() / (eta * eta); }

    /// Exact maximum over the 16 deterministic strategies (equals 2 - 2c).
    double deterministic_maximum() const {
        double best = 0;
        for (int mask = 0; mask < 16; ++mask) {
            const double a1 = (mask >> 0) & 1, a2 = (mask >> 1) & 1;
            const double b1 = (mask >> 2) & 1, b2 = (mask >> 3) & 1;
            const double v = a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2 - c * a1 - c * b1;
            best = std::max(best, v);
        }
        return best;
    }
};

inline ChTypeInequality preset_appendix_ch() {
    const double c = 2.0 * (std::pow(2.0, 0.25) - 1.0) / (std::sqrt(2.0) - 1.0);
    return ChTypeInequality{c};
}

} // namespace bellfam

#pragma once

#include "bellfam/family.hpp"
#include "bellfam/statevector.hpp"
#include "bellfam/util.hpp"

#include <cmath>
#include <vector>

namespace bellfam {

namespace detail {

inline double cot_half(const MeasurementOperator& op) {
    if (op.c_minus == 0.0)
        throw singular_angle_error("ratio s/c^- undefined at phi = 0");
    return op.s / op.c_minus; // equals -cot(phi/2), computed exactly from half-angle parts
}

} // namespace detail

/// Matrix elements of the symmetric-state calculation: S00 is the product of
/// c^- over parties 2..n (setting min(i, m)), and xi relates the W-overlap
/// element to it, S_W0 = S00 / xi.
struct AnalyticElements {
    int n = 0;
    int m = 0;
    std::vector<MeasurementOperator> ops;
    double S00 = 0;
    double xi = 0;

    /// Product of c^- over a full n-party tuple.
    double F00(const IndexTuple& t) const {
        require_full(t);
        double product = 1;
        for (int v : t) product *= ops[static_cast<std::size_t>(v - 1)].c_minus;
        return product;
    }

    /// F_W0 = F00 / chi with 1/chi = (1/sqrt(n)) sum_k s_{j_k} / c^-_{j_k}.
    double chi(const IndexTuple& t) const {
        require_full(t);
        double inv = 0;
        for (int v : t) inv += detail::cot_half(ops[static_cast<std::size_t>(v - 1)]);
        inv /= std::sqrt(static_cast<double>(n));
        return 1.0 / inv;
    }

private:
    void require_full(const IndexTuple& t) const {
        if (t.size() != n || t.nonzero_count() != n)
            throw std::invalid_argument("AnalyticElements: full n-party tuple required");
        for (int v : t)
            if (v > m) throw std::invalid_argument("AnalyticElements: index exceeds m");
    }
};

inline AnalyticElements analytic_elements(const std::vector<double>& phis, int n) {
    const int m = static_cast<int>(phis.size());
    if (m < 1 || n < m) throw std::invalid_argument("analytic_elements: need m >= 1 and n >= m");
    AnalyticElements el;
    el.n = n;
    el.m = m;
    el.ops.reserve(phis.size());
    for (double phi : phis) el.ops.emplace_back(phi);
    double product = 1;
    double inv_xi = 0;
    for (int i = 2; i <= n; ++i) {
        const auto& op = el.ops[static_cast<std::size_t>(std::min(i, m) - 1)];
        product *= op.c_minus;
        inv_xi += detail::cot_half(op);
    }
    inv_xi /= std::sqrt(static_cast<double>(n));
    el.S00 = product;
    el.xi = 1.0 / inv_xi;
    return el;
}

/// Mixing angle that cancels the leading term of the reference probability:
/// alpha = arctan(xi).
inline double mixing_angle_for_threshold(const std::vector<double>& phis, int n) {
    return std::atan(analytic_elements(phis, n).xi);
}

namespace detail {

/// <psi(alpha)| (x)_i op_i |psi(alpha)> evaluated from the three matrix
/// elements against |0...0> and |W>, with hole products instead of ratios, so
/// zero angles are exact. ops entries may be null (identity).
inline double symmetric_expectation_elements(double alpha, int n,
                                             const std::vector<const MeasurementOperator*>& ops) {
    std::vector<double> cm, sv, cp; // non-identity slots only
    int identity_slots = 0;
    for (const auto* op : ops) {
        if (!op) {
            ++identity_slots;
            continue;
        }
        cm.push_back(op->c_minus);
        sv.push_back(op->s);
        cp.push_back(op->c_plus);
    }
    const std::size_t k = cm.size();
    std::vector<double> prefix(k + 1, 1.0), suffix(k + 1, 1.0);
    for (std::size_t i = 0; i < k; ++i) prefix[i + 1] = prefix[i] * cm[i];
    for (std::size_t i = k; i-- > 0;) suffix[i] = suffix[i + 1] * cm[i];
    // range[a][b] = product of cm over [a, b); row a stored flat
    std::vector<std::vector<double>> range(k + 1, std::vector<double>(k + 1, 1.0));
    for (std::size_t a = 0; a <= k; ++a)
        for (std::size_t b = a; b < k; ++b) range[a][b + 1] = range[a][b] * cm[b];

    const double full = prefix[k];
    auto hole = [&](std::size_t i) { return prefix[i] * suffix[i + 1]; };

    double m00 = full;
    double mw0 = 0;
    double mww = identity_slots * full; // diagonal terms of identity slots
    for (std::size_t i = 0; i < k; ++i) {
        const double h = hole(i);
        mw0 += sv[i] * h;
        mww += cp[i] * h;
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            mww += 2.0 * sv[i] * sv[j] * prefix[i] * range[i + 1][j] * suffix[j + 1];

    const double root_n = std::sqrt(static_cast<double>(n));
    mw0 /= root_n;
    mww /= static_cast<double>(n);
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    return ca * ca * m00 - 2.0 * ca * sa * mw0 + sa * sa * mww;
}

} // namespace detail

/// Conditional probability on cos(alpha)|0..0> - sin(alpha)|W> for either the
/// reference (n-1)-party tuple or a full n-party tuple. Away from zero angles
/// the factored closed forms are used; when a participating angle is at or
/// near zero the hole-product limit takes over.
inline double analytic_conditional_probability(double alpha, const std::vector<double>& phis,
                                               int n, const IndexTuple& t) {
    const int m = static_cast<int>(phis.size());
    if (t.size() != n) throw std::invalid_argument("analytic probability: tuple length != n");
    for (int v : t)
        if (v > m) throw std::invalid_argument("analytic probability: index exceeds m");
    const int zeros = n - t.nonzero_count();
    const bool reference = (t == family_reference_tuple(n, m));
    if (zeros > 0 && !reference)
        throw std::invalid_argument(
            "analytic probability: subcorrelation tuples other than the reference are unsupported");

    std::vector<MeasurementOperator> ops;
    ops.reserve(phis.size());
    for (double phi : phis) ops.emplace_back(phi);

    double min_cm = 1.0;
    for (int v : t)
        if (v > 0) min_cm = std::min(min_cm, ops[static_cast<std::size_t>(v - 1)].c_minus);

    if (min_cm <= 1e-14) {
        std::vector<const MeasurementOperator*> slot(static_cast<std::size_t>(n), nullptr);
        for (int i = 0; i < n; ++i)
            if (t[i] > 0) slot[static_cast<std::size_t>(i)] = &ops[static_cast<std::size_t>(t[i] - 1)];
        return std::max(0.0, detail::symmetric_expectation_elements(alpha, n, slot));
    }

    const double root_n = std::sqrt(static_cast<double>(n));
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    if (reference) {
        double s00 = 1, inv_xi = 0;
        for (int v : t) {
            if (v == 0) continue;
            const auto& op = ops[static_cast<std::size_t>(v - 1)];
            s00 *= op.c_minus;
            inv_xi += detail::cot_half(op);
        }
        inv_xi /= root_n;
        const double residual = ca - sa * inv_xi;
        return s00 * (residual * residual + sa * sa / n);
    }
    double f00 = 1, inv_chi = 0;
    for (int v : t) {
        const auto& op = ops[static_cast<std::size_t>(v - 1)];
        f00 *= op.c_minus;
        inv_chi += detail::cot_half(op);
    }
    inv_chi /= root_n;
    const double residual = ca - sa * inv_chi;
    return f00 * residual * residual;
}

enum class EvalPath { Auto, BruteForce, Analytic };

namespace detail {

/// True when every stored tuple is the reference tuple or a full n-party
/// tuple, the shapes the analytic formulas cover.
inline bool analytic_supported(const BellInequality& ineq) {
    const int n = ineq.parties();
    const int m = ineq.settings();
    if (m < 2 || m > n) return false;
    const IndexTuple reference = family_reference_tuple(n, m);
    for (const auto& [tuple, value] : ineq.coefficients()) {
        (void)value;
        if (tuple.nonzero_count() == n) continue;
        if (tuple != reference) return false;
    }
    return true;
}

struct SymmetricTermSum {
    const BellInequality* ineq;
    bool analytic;

    double probability(double alpha, const std::vector<double>& phis,
                       const std::vector<MeasurementOperator>& ops, const StateVector* psi,
                       const IndexTuple& t) const {
        if (analytic) return analytic_conditional_probability(alpha, phis, ineq->parties(), t);
        return conditional_probability_bruteforce(*psi, ops, t);
    }
};

} // namespace detail

/// Detection-weighted quantum value: sum over canonical tuples of
/// pi * B * eta^l * P_Q, with l the number of measuring parties. Positive
/// values witness a detectable violation.
inline double quantum_bell_value(const BellInequality& ineq, double alpha,
                                 const std::vector<double>& phis, double eta,
                                 EvalPath path = EvalPath::Auto) {
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("quantum_bell_value: eta outside [0,1]");
    if (static_cast<int>(phis.size()) != ineq.settings())
        throw std::invalid_argument("quantum_bell_value: one angle per setting required");
    const int n = ineq.parties();
    bool analytic = false;
    if (path == EvalPath::Analytic) {
        if (!detail::analytic_supported(ineq))
            throw std::invalid_argument("quantum_bell_value: analytic path unsupported for this support");
        analytic = true;
    } else if (path == EvalPath::Auto) {
        analytic = detail::analytic_supported(ineq);
    }

    std::vector<MeasurementOperator> ops;
    StateVector psi;
    if (!analytic) {
        ops.reserve(phis.size());
        for (double phi : phis) ops.emplace_back(phi);
        psi = symmetric_state(n, alpha);
    }
    detail::SymmetricTermSum sum{&ineq, analytic};
    double total = 0;
    for (const auto& [tuple, coeff] : ineq.coefficients()) {
        const double p = sum.probability(alpha, phis, ops, &psi, tuple);
        const double weight = permutation_count(tuple).convert_to<double>() *
                              coeff.convert_to<double>() *
                              std::pow(eta, tuple.nonzero_count());
        total += weight * p;
    }
    return total;
}

/// Unweighted quantum value (eta = 1).
inline double quantum_bell_value(const BellInequality& ineq, double alpha,
                                 const std::vector<double>& phis, EvalPath path = EvalPath::Auto) {
    return quantum_bell_value(ineq, alpha, phis, 1.0, path);
}

/// Detection-stripped contributions of the (n-1)-party and n-party levels.
/// Requires a support living on exactly those two levels.
struct EtaContributions {
    double sub = 0;  // (n-1)-party sum, negative for a violable configuration
    double full = 0; // n-party sum, positive for a violable configuration
};

inline EtaContributions eta_contributions(const BellInequality& ineq, double alpha,
                                          const std::vector<double>& phis,
                                          EvalPath path = EvalPath::Auto) {
    const int n = ineq.parties();
    bool analytic = false;
    if (path == EvalPath::Analytic || path == EvalPath::Auto) {
        analytic = detail::analytic_supported(ineq);
        if (!analytic && path == EvalPath::Analytic)
            throw std::invalid_argument("eta_contributions: analytic path unsupported");
    }
    std::vector<MeasurementOperator> ops;
    StateVector psi;
    if (!analytic) {
        ops.reserve(phis.size());
        for (double phi : phis) ops.emplace_back(phi);
        psi = symmetric_state(n, alpha);
    }
    detail::SymmetricTermSum sum{&ineq, analytic};
    EtaContributions out;
    for (const auto& [tuple, coeff] : ineq.coefficients()) {
        const int level = tuple.nonzero_count();
        if (level != n && level != n - 1)
            throw std::invalid_argument("eta_contributions: support must hold only n- and (n-1)-party terms");
        const double p = sum.probability(alpha, phis, ops, &psi, tuple);
        const double weight =
            permutation_count(tuple).convert_to<double>() * coeff.convert_to<double>();
        (level == n ? out.full : out.sub) += weight * p;
    }
    return out;
}

/// eta_crit = -sub/full; requires sub < 0 < full.
inline double threshold_from_contributions(double sub, double full) {
    if (!(sub < 0.0) || !(full > 0.0))
        throw no_threshold_error("threshold_from_contributions: need sub < 0 and full > 0");
    return -sub / full;
}

/// Closed-form critical efficiency 2 / (2 + m - 2/(n-m+2)) as an exact rational.
inline Rational eta_crit_closed_form(int n, int m) {
    if (m < 2 || m > n) throw std::invalid_argument("eta_crit_closed_form: need 2 <= m <= n");
    return Rational(2 * (n - m + 2), (2 + m) * (n - m + 2) - 2);
}

/// Best known lower bound n / ((n-1) m + 1) from explicit local models.
inline Rational massar_pironio_lower_bound(int n, int m) {
    if (n < 2 || m < 2) throw std::invalid_argument("massar_pironio_lower_bound: need n, m >= 2");
    return Rational(n, (n - 1) * m + 1);
}

/// Robustness of nonlocality R = 1 - eta_crit.
inline double robustness(double eta_crit) {
    if (eta_crit < 0.0 || eta_crit > 1.0)
        throw std::invalid_argument("robustness: eta_crit outside [0,1]");
    return 1.0 - eta_crit;
}

struct EfficiencyReport {
    int n = 0;
    int m = 0;
    Rational eta_crit_closed;
    Rational lower_bound;
    Rational robustness_exact;
};

inline EfficiencyReport make_efficiency_report(int n, int m) {
    EfficiencyReport report;
    report.n = n;
    report.m = m;
    report.eta_crit_closed = eta_crit_closed_form(n, m);
    report.lower_bound = massar_pironio_lower_bound(n, m);
    report.robustness_exact = Rational(1) - report.eta_crit_closed;
    return report;
}

} // namespace bellfam

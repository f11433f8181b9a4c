#pragma once

#include "bellfam/classical.hpp"
#include "bellfam/family.hpp"

#include <cstdint>
#include <vector>

namespace bellfam {

struct GeneratorOptions {
    double hierarchy_base = 2.0; // e_j = base^(m-j); only the ordering matters
    int enumeration_cap_bits = 26;
    int threads = 0;
};

struct GeneratorResult {
    BellInequality inequality;
    Rational free_magnitude;          // -M placed on every assigned slot
    std::vector<IndexTuple> free_slots;
    std::vector<double> hierarchy_exponents;
};

namespace detail {

/// All canonical n-party tuples over settings 1..m, ascending lexicographic.
inline std::vector<IndexTuple> canonical_full_tuples(int n, int m) {
    std::vector<IndexTuple> out;
    std::vector<int> current(static_cast<std::size_t>(n), 1);
    while (true) {
        out.emplace_back(current);
        int pos = n - 1;
        while (pos >= 0 && current[static_cast<std::size_t>(pos)] == m) --pos;
        if (pos < 0) break;
        const int next = current[static_cast<std::size_t>(pos)] + 1;
        for (int i = pos; i < n; ++i) current[static_cast<std::size_t>(i)] = next;
    }
    return out;
}

} // namespace detail

/// Greedy repair loop: walk strategies in ascending bitmask order; when one
/// evaluates positive, drop -M (M = sum of pi * B over positive coefficients)
/// onto its lexicographically smallest negligible n-party tuple that still
/// has coefficient zero. Coefficients only decrease, so a single ascending
/// pass settles every strategy; a final full enumeration confirms the zero
/// bound before it is recorded.
inline GeneratorResult assign_free_coefficients(const BellInequality& partial,
                                                const GeneratorOptions& opts = {}) {
    const int n = partial.parties();
    const int m = partial.settings();
    const int bits = n * m;
    if (bits > opts.enumeration_cap_bits)
        throw resource_error("assign_free_coefficients: " + std::to_string(bits) +
                             " strategy bits exceed cap " +
                             std::to_string(opts.enumeration_cap_bits));

    const auto hierarchy = HierarchyExponents::geometric(m, opts.hierarchy_base);
    Rational magnitude(0);
    for (const auto& [tuple, coeff] : partial.coefficients())
        if (coeff > 0) magnitude += Rational(permutation_count(tuple)) * coeff;
    if (magnitude <= 0)
        throw construction_error("assign_free_coefficients: no positive coefficients");

    std::vector<IndexTuple> negligible;
    for (const auto& tuple : detail::canonical_full_tuples(n, m))
        if (term_class(tuple, n, m, hierarchy) == TermClass::Negligible)
            negligible.push_back(tuple);

    GeneratorResult result{partial, magnitude, {}, hierarchy.e};
    auto plan = detail::EvalPlan::build(result.inequality);
    const std::uint64_t total = std::uint64_t(1) << bits;
    for (std::uint64_t s = 0; s < total; ++s) {
        while (plan.value(s) > 0) {
            const IndexTuple* slot = nullptr;
            for (const auto& candidate : negligible) {
                if (result.inequality.coefficient(candidate) != 0) continue;
                bool realized = false;
                std::vector<int> perm = candidate.values();
                do {
                    bool all_one = true;
                    for (int i = 0; i < n && all_one; ++i)
                        all_one = ((s >> (i * m + perm[static_cast<std::size_t>(i)] - 1)) & 1u) != 0;
                    realized = all_one;
                } while (!realized && std::next_permutation(perm.begin(), perm.end()));
                if (realized) {
                    slot = &candidate;
                    break;
                }
            }
            if (!slot)
                throw construction_error(
                    "assign_free_coefficients: violating strategy has no negligible slot (mask " +
                    std::to_string(s) + ")");
            result.inequality.set_coefficient(*slot, -magnitude);
            result.free_slots.push_back(*slot);
            plan = detail::EvalPlan::build(result.inequality);
        }
    }

    ClassicalMaximumOptions check;
    check.enumeration_cap_bits = opts.enumeration_cap_bits;
    check.threads = opts.threads;
    const auto maximum = classical_maximum(result.inequality, check);
    if (maximum.maximum != 0)
        throw construction_error("assign_free_coefficients: repaired bound is " +
                                 rational_to_string(maximum.maximum) + ", expected 0");
    result.inequality.set_classical_bound(Rational(0));
    return result;
}

/// Significant coefficients plus the repair loop; classical bound verified 0.
inline GeneratorResult generate_family(int n, int m, const GeneratorOptions& opts = {}) {
    return assign_free_coefficients(significant_coefficients(n, m), opts);
}

} // namespace bellfam

#pragma once

#include "bellfam/inequality.hpp"
#include "bellfam/util.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace bellfam {

/// Real 2x2 operator, row-major.
struct Mat2 {
    double a00 = 0, a01 = 0, a10 = 0, a11 = 0;
};

/// Binary measurement in the X-Z plane: the rank-1 projector
/// [[c_minus, s], [s, c_plus]] with c_minus = (1-cos phi)/2,
/// c_plus = (1+cos phi)/2, s = -sin(phi)/2. Entries are built from the
/// half-angle so c_minus keeps full relative precision at small phi.
struct MeasurementOperator {
    double phi;
    double c_minus;
    double c_plus;
    double s;

    explicit MeasurementOperator(double angle) : phi(angle) {
        const double sh = std::sin(angle / 2.0);
        const double ch = std::cos(angle / 2.0);
        c_minus = sh * sh;
        c_plus = ch * ch;
        s = -sh * ch;
    }

    Mat2 matrix() const { return Mat2{c_minus, s, s, c_plus}; }
};

/// Dense real amplitudes of an n-qubit state; basis index bit i is party i.
using StateVector = std::vector<double>;

/// cos(alpha)|0...0> - sin(alpha)|W>.
inline StateVector symmetric_state(int n, double alpha) {
    if (n < 1 || n > 20) throw std::invalid_argument("symmetric_state: need 1 <= n <= 20");
    StateVector amps(std::size_t(1) << n, 0.0);
    amps[0] = std::cos(alpha);
    const double w = -std::sin(alpha) / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k) amps[std::size_t(1) << k] = w;
    return amps;
}

/// One in-place pass of a single-qubit operator over the amplitude vector.
inline void apply_single_qubit(StateVector& amps, int party, const Mat2& g) {
    const std::size_t bit = std::size_t(1) << party;
    for (std::size_t base = 0; base < amps.size(); ++base) {
        if (base & bit) continue;
        const double a0 = amps[base];
        const double a1 = amps[base | bit];
        amps[base] = g.a00 * a0 + g.a01 * a1;
        amps[base | bit] = g.a10 * a0 + g.a11 * a1;
    }
}

inline double inner(const StateVector& a, const StateVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("inner: size mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline int qubit_count(const StateVector& amps) {
    std::size_t size = amps.size();
    int n = 0;
    while (size > 1) {
        if (size & 1) throw std::invalid_argument("state length must be a power of two");
        size >>= 1;
        ++n;
    }
    if (n < 1) throw std::invalid_argument("state must hold at least one qubit");
    return n;
}

/// <psi| (x)_i op_i |psi> with nullptr meaning identity on that party.
inline double expectation(const StateVector& psi, const std::vector<const Mat2*>& ops) {
    const int n = qubit_count(psi);
    if (static_cast<int>(ops.size()) != n)
        throw std::invalid_argument("expectation: one operator slot per party required");
    StateVector work = psi;
    for (int i = 0; i < n; ++i)
        if (ops[static_cast<std::size_t>(i)]) apply_single_qubit(work, i, *ops[static_cast<std::size_t>(i)]);
    return inner(psi, work);
}

/// Joint outcome-one probability for the canonical tuple t under a shared
/// measurement set: party i performs settings[t_i - 1], index 0 is identity.
/// Contracts one party at a time, O(n 2^n). Clamped to [0, 1] within 1e-12.
inline double conditional_probability_bruteforce(const StateVector& psi,
                                                 const std::vector<MeasurementOperator>& settings,
                                                 const IndexTuple& t) {
    const int n = qubit_count(psi);
    if (t.size() != n) throw std::invalid_argument("conditional probability: tuple length != n");
    std::vector<Mat2> mats;
    mats.reserve(settings.size());
    for (const auto& op : settings) mats.push_back(op.matrix());
    std::vector<const Mat2*> ops(static_cast<std::size_t>(n), nullptr);
    for (int i = 0; i < n; ++i) {
        const int j = t[i];
        if (j == 0) continue;
        if (j > static_cast<int>(settings.size()))
            throw std::invalid_argument("conditional probability: tuple index exceeds settings");
        ops[static_cast<std::size_t>(i)] = &mats[static_cast<std::size_t>(j - 1)];
    }
    const double p = expectation(psi, ops);
    constexpr double tol = 1e-12;
    if (p < -tol || p > 1.0 + tol)
        throw std::runtime_error("conditional probability outside [0,1] beyond tolerance");
    return std::min(1.0, std::max(0.0, p));
}

inline double conditional_probability_bruteforce(int n, double alpha,
                                                 const std::vector<MeasurementOperator>& settings,
                                                 const IndexTuple& t) {
    return conditional_probability_bruteforce(symmetric_state(n, alpha), settings, t);
}

} // namespace bellfam

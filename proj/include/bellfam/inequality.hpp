#pragma once

#include "bellfam/rational.hpp"

#include <json.hpp>

#include <algorithm>
#include <compare>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bellfam {

/// Sorted multiset of measurement indices, one per party. Index 0 stands for
/// the always-one measurement assigned to parties absent from a term.
class IndexTuple {
public:
    IndexTuple() = default;

    IndexTuple(std::initializer_list<int> values) : IndexTuple(std::vector<int>(values)) {}

    explicit IndexTuple(std::vector<int> values) : idx_(std::move(values)) {
        for (int v : idx_)
            if (v < 0) throw std::invalid_argument("IndexTuple: negative index");
        std::sort(idx_.begin(), idx_.end());
    }

    static IndexTuple canonical(std::vector<int> values) { return IndexTuple(std::move(values)); }

    int size() const { return static_cast<int>(idx_.size()); }
    int operator[](int i) const { return idx_[static_cast<std::size_t>(i)]; }
    auto begin() const { return idx_.begin(); }
    auto end() const { return idx_.end(); }
    const std::vector<int>& values() const { return idx_; }

    /// Number of parties actually measuring, i.e. nonzero indices.
    int nonzero_count() const {
        return static_cast<int>(std::count_if(idx_.begin(), idx_.end(), [](int v) { return v != 0; }));
    }

    std::string str() const {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            if (i) os << ',';
            os << idx_[i];
        }
        os << ')';
        return os.str();
    }

    auto operator<=>(const IndexTuple&) const = default;

private:
    std::vector<int> idx_;
};

/// Number of distinct orderings of the tuple: n! over the factorials of the
/// multiplicities of each distinct value.
inline BigInt permutation_count(const IndexTuple& t) {
    BigInt count = factorial(t.size());
    int run = 1;
    for (int i = 1; i < t.size(); ++i) {
        if (t[i] == t[i - 1]) {
            ++run;
        } else {
            count /= factorial(run);
            run = 1;
        }
    }
    if (t.size() > 0) count /= factorial(run);
    return count;
}

/// Local deterministic assignment: outcome a[i][j] in {0,1} for party i
/// (0-based) and setting j (1-based); setting 0 always yields outcome 1.
/// Packed as an n*m-bit integer, bit i*m + (j-1).
class DeterministicStrategy {
public:
    DeterministicStrategy(int n, int m, std::uint64_t bits) : n_(n), m_(m), bits_(bits) {
        if (n < 1 || m < 1 || n * m > 63)
            throw std::invalid_argument("DeterministicStrategy: unsupported dimensions");
        if (n * m < 63 && (bits >> (n * m)) != 0)
            throw std::invalid_argument("DeterministicStrategy: stray bits beyond n*m");
    }

    static DeterministicStrategy from_matrix(const std::vector<std::vector<int>>& a) {
        if (a.empty() || a[0].empty()) throw std::invalid_argument("strategy matrix: empty");
        const int n = static_cast<int>(a.size());
        const int m = static_cast<int>(a[0].size());
        std::uint64_t bits = 0;
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(a[i].size()) != m)
                throw std::invalid_argument("strategy matrix: ragged rows");
            for (int j = 0; j < m; ++j) {
                if (a[i][j] != 0 && a[i][j] != 1)
                    throw std::invalid_argument("strategy matrix: entries must be 0 or 1");
                if (a[i][j]) bits |= std::uint64_t(1) << (i * m + j);
            }
        }
        return DeterministicStrategy(n, m, bits);
    }

    int parties() const { return n_; }
    int settings() const { return m_; }
    std::uint64_t bits() const { return bits_; }

    /// setting is 1-based; setting 0 reports the fixed outcome 1.
    int outcome(int party, int setting) const {
        if (party < 0 || party >= n_ || setting < 0 || setting > m_)
            throw std::invalid_argument("strategy outcome: index out of range");
        if (setting == 0) return 1;
        return static_cast<int>((bits_ >> (party * m_ + setting - 1)) & 1u);
    }

private:
    int n_;
    int m_;
    std::uint64_t bits_;
};

/// Permutationally symmetric probability-form Bell expression with exact
/// rational coefficients, keyed by canonical (sorted) index tuples.
class BellInequality {
public:
    BellInequality(int n, int m) : n_(n), m_(m) {
        if (n < 1 || m < 1) throw std::invalid_argument("BellInequality: n and m must be positive");
    }

    int parties() const { return n_; }
    int settings() const { return m_; }

    void set_coefficient(IndexTuple t, Rational value) {
        validate_tuple(t);
        if (value == 0)
            coeffs_.erase(t);
        else
            coeffs_[std::move(t)] = std::move(value);
    }

    /// Accepts indices in any order; returns 0 for absent tuples.
    Rational coefficient(const std::vector<int>& indices) const {
        return coefficient(IndexTuple::canonical(indices));
    }

    Rational coefficient(const IndexTuple& t) const {
        validate_tuple(t);
        auto it = coeffs_.find(t);
        return it == coeffs_.end() ? Rational(0) : it->second;
    }

    const std::map<IndexTuple, Rational>& coefficients() const { return coeffs_; }

    const std::optional<Rational>& classical_bound() const { return bound_; }
    void set_classical_bound(Rational bound) { bound_ = std::move(bound); }

    nlohmann::ordered_json to_json() const {
        if (!bound_) throw std::logic_error("BellInequality: classical bound not set");
        nlohmann::ordered_json j;
        j["n"] = n_;
        j["m"] = m_;
        j["classical_bound"] = rational_to_string(*bound_);
        auto coeffs = nlohmann::ordered_json::array();
        for (const auto& [tuple, value] : coeffs_) {
            nlohmann::ordered_json entry;
            entry["indices"] = tuple.values();
            entry["value"] = rational_to_string(value);
            coeffs.push_back(std::move(entry));
        }
        j["coefficients"] = std::move(coeffs);
        return j;
    }

    static BellInequality from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw std::invalid_argument("inequality JSON: not an object");
        for (const auto& [key, value] : j.items()) {
            (void)value;
            if (key != "n" && key != "m" && key != "classical_bound" && key != "coefficients")
                throw std::invalid_argument("inequality JSON: unknown field \"" + key + "\"");
        }
        if (!j.contains("n") || !j.contains("m") || !j.contains("classical_bound") ||
            !j.contains("coefficients"))
            throw std::invalid_argument("inequality JSON: missing required field");
        if (!j["n"].is_number_integer() || !j["m"].is_number_integer())
            throw std::invalid_argument("inequality JSON: n and m must be integers");
        BellInequality ineq(j["n"].get<int>(), j["m"].get<int>());
        ineq.set_classical_bound(parse_rational(j["classical_bound"].get<std::string>()));
        if (!j["coefficients"].is_array())
            throw std::invalid_argument("inequality JSON: coefficients must be an array");
        for (const auto& entry : j["coefficients"]) {
            if (!entry.is_object()) throw std::invalid_argument("inequality JSON: bad coefficient entry");
            for (const auto& [key, value] : entry.items()) {
                (void)value;
                if (key != "indices" && key != "value")
                    throw std::invalid_argument("inequality JSON: unknown coefficient field \"" + key + "\"");
            }
            if (!entry.contains("indices") || !entry.contains("value"))
                throw std::invalid_argument("inequality JSON: coefficient entry missing field");
            auto indices = entry["indices"].get<std::vector<int>>();
            if (!std::is_sorted(indices.begin(), indices.end()))
                throw std::invalid_argument("inequality JSON: indices must be sorted ascending");
            IndexTuple tuple(indices);
            if (ineq.coeffs_.count(tuple))
                throw std::invalid_argument("inequality JSON: duplicate tuple " + tuple.str());
            ineq.set_coefficient(std::move(tuple), parse_rational(entry["value"].get<std::string>()));
        }
        return ineq;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        out << to_json().dump(2) << '\n';
    }

    static BellInequality load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open for reading: " + path);
        return from_json(nlohmann::json::parse(in));
    }

private:
    void validate_tuple(const IndexTuple& t) const {
        if (t.size() != n_)
            throw std::invalid_argument("index tuple " + t.str() + ": expected length " +
                                        std::to_string(n_));
        for (int v : t)
            if (v > m_)
                throw std::invalid_argument("index tuple " + t.str() + ": index exceeds m=" +
                                            std::to_string(m_));
    }

    int n_;
    int m_;
    std::map<IndexTuple, Rational> coeffs_;
    std::optional<Rational> bound_;
};

} // namespace bellfam

#pragma once

#include <cassert>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cfder/semiring.hpp"

namespace cfder {

/// A word over nonterminal symbols, each given by its index in the owning
/// system's symbol list. The empty vector is the empty word.
using Monomial = std::vector<std::uint32_t>;

/// Length-lexicographic order on monomials: shorter words first, ties broken
/// by symbol index. This is the canonical printing and equality order.
struct LenLexLess {
    bool operator()(const Monomial& a, const Monomial& b) const {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    }
};

/// A polynomial in noncommuting variables: a finite map from monomials to
/// nonzero coefficients. Over the Boolean semiring this is exactly a finite
/// language of nonterminal words.
template <Semiring S>
class Polynomial {
public:
    using Value = typename S::Value;
    using Map = std::map<Monomial, Value, LenLexLess>;

    Polynomial() = default;

    static Polynomial zero() { return Polynomial(); }

    /// The multiplicative unit: the empty word with coefficient one.
    static Polynomial unit() { return monomial(Monomial{}); }

    static Polynomial monomial(Monomial m, Value coeff = S::one()) {
        Polynomial p;
        p.add_term(std::move(m), std::move(coeff));
        return p;
    }

    /// Adds `coeff * m`, merging with an existing term and erasing the entry
    /// if the merged coefficient is zero. Zero coefficients are never stored.
    void add_term(Monomial m, Value coeff) {
        if (is_zero<S>(coeff)) return;
        auto [it, inserted] = terms_.try_emplace(std::move(m), coeff);
        if (!inserted) {
            it->second = S::add(it->second, coeff);
            if (is_zero<S>(it->second)) terms_.erase(it);
        }
        assert(check_normal_form());
    }

    Polynomial plus(const Polynomial& other) const {
        Polynomial out = *this;
        for (const auto& [m, k] : other.terms_) out.add_term(m, k);
        return out;
    }

    /// Concatenation product: coefficients multiply, monomials concatenate.
    Polynomial times(const Polynomial& other) const {
        Polynomial out;
        for (const auto& [m1, k1] : terms_) {
            for (const auto& [m2, k2] : other.terms_) {
                Monomial m = m1;
                m.insert(m.end(), m2.begin(), m2.end());
                out.add_term(std::move(m), S::mul(k1, k2));
            }
        }
        return out;
    }

    Polynomial scaled(const Value& k) const {
        Polynomial out;
        if (is_zero<S>(k)) return out;
        for (const auto& [m, c] : terms_) out.add_term(m, S::mul(k, c));
        return out;
    }

    bool is_zero_poly() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }
    const Map& terms() const { return terms_; }

    /// Coefficient lookup; absent monomials have coefficient zero.
    Value coefficient_of(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? S::zero() : it->second;
    }

    /// Largest symbol index mentioned, or nullopt for constant polynomials.
    std::optional<std::uint32_t> max_symbol() const {
        std::optional<std::uint32_t> mx;
        for (const auto& [m, k] : terms_) {
            (void)k;
            for (auto s : m) {
                if (!mx || s > *mx) mx = s;
            }
        }
        return mx;
    }

    bool check_normal_form() const {
        for (const auto& [m, k] : terms_) {
            (void)m;
            if (is_zero<S>(k)) return false;
        }
        return true;
    }

    bool operator==(const Polynomial& other) const {
        if (terms_.size() != other.terms_.size()) return false;
        auto it = terms_.begin();
        auto jt = other.terms_.begin();
        for (; it != terms_.end(); ++it, ++jt) {
            if (it->first != jt->first || !S::eq(it->second, jt->second)) return false;
        }
        return true;
    }
    bool operator!=(const Polynomial& other) const { return !(*this == other); }

    bool operator<(const Polynomial& other) const {
        auto it = terms_.begin();
        auto jt = other.terms_.begin();
        LenLexLess less;
        for (; it != terms_.end() && jt != other.terms_.end(); ++it, ++jt) {
            if (less(it->first, jt->first)) return true;
            if (less(jt->first, it->first)) return false;
            if (S::less(it->second, jt->second)) return true;
            if (S::less(jt->second, it->second)) return false;
        }
        return it == terms_.end() && jt != other.terms_.end();
    }

private:
    Map terms_;
};

}  // namespace cfder

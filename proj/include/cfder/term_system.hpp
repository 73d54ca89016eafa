#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfder/expr.hpp"
#include "cfder/grammar.hpp"

namespace cfder {

template <Semiring S>
bool is_mu_free(const Expr<S>& e) {
    using Kind = typename Expr<S>::Kind;
    switch (e.kind()) {
        case Kind::Mu:
            return false;
        case Kind::Sum:
        case Kind::Prod:
            return is_mu_free(e.left()) && is_mu_free(e.right());
        default:
            return true;
    }
}

/// A system of behavioural differential equations whose derivatives are
/// terms: each nonterminal has an output value and, per letter, a mu-free
/// term over the system's nonterminals.
template <Semiring S>
struct TermSystem {
    using Value = typename S::Value;

    Alphabet alphabet;
    std::vector<std::string> nonterminals;
    std::vector<Value> outputs;
    std::vector<std::vector<Expr<S>>> derivatives;  // [nonterminal][letter index]

    std::optional<std::uint32_t> index_of(std::string_view name) const {
        for (std::uint32_t i = 0; i < nonterminals.size(); ++i) {
            if (nonterminals[i] == name) return i;
        }
        return std::nullopt;
    }

    void validate() const {
        if (outputs.size() != nonterminals.size() || derivatives.size() != nonterminals.size()) {
            throw Error("term system tables must cover every nonterminal");
        }
        for (const auto& row : derivatives) {
            if (row.size() != alphabet.size()) {
                throw Error("term system must define a derivative for every letter");
            }
            for (const auto& t : row) require_term(t);
        }
    }

    void require_term(const Expr<S>& t) const {
        using Kind = typename Expr<S>::Kind;
        switch (t.kind()) {
            case Kind::Mu:
                throw Error("term system derivatives must be mu-free terms");
            case Kind::Var:
                if (!index_of(t.name())) {
                    throw UnboundVariableError("variable '" + t.name() +
                                               "' is not a nonterminal of the system");
                }
                break;
            case Kind::Letter:
                alphabet.require(t.letter_value());
                break;
            case Kind::Sum:
            case Kind::Prod:
                require_term(t.left());
                require_term(t.right());
                break;
            default:
                break;
        }
    }
};

/// Memoized output and derivative of the term extension. Derivative chains
/// share subtrees heavily, so both maps key on node identity; results are the
/// exact table shapes, memoization only avoids recomputation.
template <Semiring S>
class TermCache {
public:
    using Value = typename S::Value;
    using Kind = typename Expr<S>::Kind;

    explicit TermCache(std::shared_ptr<const TermSystem<S>> sys) : sys_(std::move(sys)) {}

    const TermSystem<S>& system() const { return *sys_; }

    /// Constants give their value, letters zero, variables the system output,
    /// sum and product the semiring operations.
    Value output(const Expr<S>& t) {
        auto it = out_.find(t);
        if (it != out_.end()) return it->second;
        Value v = S::zero();
        switch (t.kind()) {
            case Kind::Constant:
                v = t.value();
                break;
            case Kind::Letter:
                v = S::zero();
                break;
            case Kind::Var:
                v = sys_->outputs[var_index(t)];
                break;
            case Kind::Sum:
                v = S::add(output(t.left()), output(t.right()));
                break;
            case Kind::Prod:
                v = S::mul(output(t.left()), output(t.right()));
                break;
            case Kind::Mu:
                throw Error("term extension does not apply to mu-expressions");
        }
        out_.emplace(t, v);
        return v;
    }

    /// The exact table shape with no simplification; in particular the
    /// product rule always produces the two-summand form.
    Expr<S> derivative(const Expr<S>& t, char a) {
        std::size_t ai = sys_->alphabet.require(a);
        auto key = std::make_pair(t, a);
        auto it = der_.find(key);
        if (it != der_.end()) return it->second;
        Expr<S> d = Expr<S>::zero();
        switch (t.kind()) {
            case Kind::Constant:
                d = Expr<S>::zero();
                break;
            case Kind::Letter:
                d = Expr<S>::indicator(t.letter_value() == a);
                break;
            case Kind::Var:
                d = sys_->derivatives[var_index(t)][ai];
                break;
            case Kind::Sum:
                d = Expr<S>::sum(derivative(t.left(), a), derivative(t.right(), a));
                break;
            case Kind::Prod:
                d = Expr<S>::sum(
                    Expr<S>::prod(derivative(t.left(), a), t.right()),
                    Expr<S>::prod(Expr<S>::constant(output(t.left())),
                                  derivative(t.right(), a)));
                break;
            case Kind::Mu:
                throw Error("term extension does not apply to mu-expressions");
        }
        der_.emplace(std::move(key), d);
        return d;
    }

    Expr<S> word_derivative(Expr<S> t, std::string_view w) {
        for (char a : w) t = derivative(t, a);
        return t;
    }

    Value coefficient(const Expr<S>& t, std::string_view w) {
        return output(word_derivative(t, w));
    }

private:
    std::uint32_t var_index(const Expr<S>& t) {
        auto i = sys_->index_of(t.name());
        if (!i) throw UnboundVariableError("unbound variable '" + t.name() + "'");
        return *i;
    }

    struct KeyHash {
        std::size_t operator()(const std::pair<Expr<S>, char>& k) const {
            return std::hash<const void*>{}(k.first.id()) * 131 +
                   static_cast<unsigned char>(k.second);
        }
    };
    std::shared_ptr<const TermSystem<S>> sys_;
    std::unordered_map<Expr<S>, Value, ExprPtrHash<S>> out_;
    std::unordered_map<std::pair<Expr<S>, char>, Expr<S>, KeyHash> der_;
};

namespace detail {

template <Semiring S>
TermCache<S> borrow_cache(const TermSystem<S>& sys) {
    return TermCache<S>(std::shared_ptr<const TermSystem<S>>(&sys, [](const TermSystem<S>*) {}));
}

}  // namespace detail

template <Semiring S>
typename S::Value term_output(const TermSystem<S>& sys, const Expr<S>& t) {
    auto cache = detail::borrow_cache(sys);
    return cache.output(t);
}

template <Semiring S>
Expr<S> term_derivative(const TermSystem<S>& sys, const Expr<S>& t, char a) {
    auto cache = detail::borrow_cache(sys);
    return cache.derivative(t, a);
}

template <Semiring S>
Expr<S> term_word_derivative(const TermSystem<S>& sys, const Expr<S>& t, std::string_view w) {
    auto cache = detail::borrow_cache(sys);
    return cache.word_derivative(t, w);
}

template <Semiring S>
typename S::Value term_coefficient(const TermSystem<S>& sys, const Expr<S>& t,
                                   std::string_view w) {
    auto cache = detail::borrow_cache(sys);
    return cache.coefficient(t, w);
}

/// The disjoint symbol set used when a term system is turned into a grammar
/// system: one fresh nonterminal per original nonterminal and one per letter.
/// Ids 0..|X|-1 are the hatted nonterminals, |X|.. the hatted letters.
struct ExtendedSymbols {
    std::vector<std::string> base_nonterminals;
    Alphabet alphabet;

    std::size_t count() const { return base_nonterminals.size() + alphabet.size(); }
    std::uint32_t of_var(std::uint32_t x) const { return x; }
    std::uint32_t of_letter(std::size_t a) const {
        return static_cast<std::uint32_t>(base_nonterminals.size() + a);
    }
    bool is_var(std::uint32_t id) const { return id < base_nonterminals.size(); }
    char letter_of(std::uint32_t id) const {
        return alphabet.letter(id - base_nonterminals.size());
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(count());
        for (const auto& x : base_nonterminals) out.push_back(x + "^");
        for (char c : alphabet.letters()) out.push_back(std::string(1, c) + "^");
        return out;
    }
};

/// The polynomial image of a term: variables and letters map to their hatted
/// symbols, constants to scaled empty words, sum to polynomial sum, product
/// to concatenation product.
template <Semiring S>
Polynomial<S> translate_f(const ExtendedSymbols& ext, const Expr<S>& t) {
    using Kind = typename Expr<S>::Kind;
    switch (t.kind()) {
        case Kind::Constant:
            return Polynomial<S>::monomial(Monomial{}, t.value());
        case Kind::Letter:
            return Polynomial<S>::monomial(
                Monomial{ext.of_letter(ext.alphabet.require(t.letter_value()))});
        case Kind::Var: {
            for (std::uint32_t i = 0; i < ext.base_nonterminals.size(); ++i) {
                if (ext.base_nonterminals[i] == t.name()) {
                    return Polynomial<S>::monomial(Monomial{ext.of_var(i)});
                }
            }
            throw UnboundVariableError("variable '" + t.name() + "' has no hatted symbol");
        }
        case Kind::Sum:
            return translate_f(ext, t.left()).plus(translate_f(ext, t.right()));
        case Kind::Prod:
            return translate_f(ext, t.left()).times(translate_f(ext, t.right()));
        case Kind::Mu:
            throw Error("translate_f applies to mu-free terms only");
    }
    throw Error("unreachable term kind");
}

template <Semiring S>
ExtendedSymbols extended_symbols(const TermSystem<S>& sys) {
    return ExtendedSymbols{sys.nonterminals, sys.alphabet};
}

/// Builds the grammar system over the hatted symbols that makes the term
/// translation a homomorphism: hatted nonterminals keep their output and take
/// the polynomial image of their derivative; a hatted letter outputs zero and
/// derives to the empty word exactly on its own letter.
template <Semiring S>
GrammarSystem<S> induced_grammar_system(const TermSystem<S>& sys) {
    sys.validate();
    ExtendedSymbols ext = extended_symbols(sys);
    GrammarSystem<S> out{sys.alphabet, ext.names(), {}, {}};
    out.outputs.resize(ext.count(), S::zero());
    out.derivatives.assign(ext.count(), std::vector<Polynomial<S>>(sys.alphabet.size()));
    for (std::uint32_t x = 0; x < sys.nonterminals.size(); ++x) {
        out.outputs[ext.of_var(x)] = sys.outputs[x];
        for (std::size_t a = 0; a < sys.alphabet.size(); ++a) {
            out.derivatives[ext.of_var(x)][a] = translate_f(ext, sys.derivatives[x][a]);
        }
    }
    for (std::size_t b = 0; b < sys.alphabet.size(); ++b) {
        for (std::size_t a = 0; a < sys.alphabet.size(); ++a) {
            out.derivatives[ext.of_letter(b)][a] =
                (a == b) ? Polynomial<S>::unit() : Polynomial<S>::zero();
        }
    }
    out.validate();
    return out;
}

/// Rebuilds a term from a polynomial given an interpretation of each symbol
/// id as an atomic term. Monomials become right-nested products (the empty
/// word becomes the unit constant, non-unit coefficients a constant prefix),
/// and the polynomial becomes a right-nested sum of its monomial terms in
/// descending length-lexicographic order. The zero polynomial becomes the
/// zero constant.
template <Semiring S>
Expr<S> poly_to_term(const Polynomial<S>& p,
                     const std::function<Expr<S>(std::uint32_t)>& atom) {
    if (p.is_zero_poly()) return Expr<S>::zero();
    std::vector<Expr<S>> parts;
    for (const auto& [m, k] : p.terms()) {
        Expr<S> t = Expr<S>::one();
        if (!m.empty()) {
            t = atom(m.back());
            for (std::size_t i = m.size() - 1; i-- > 0;) {
                t = Expr<S>::prod(atom(m[i]), t);
            }
        }
        if (!is_one<S>(k)) t = Expr<S>::prod(Expr<S>::constant(k), t);
        parts.push_back(t);
    }
    Expr<S> out = parts.front();  // map order is ascending; fold to descending
    for (std::size_t i = 1; i < parts.size(); ++i) {
        out = Expr<S>::sum(parts[i], out);
    }
    return out;
}

/// A section of the term-to-polynomial translation: hatted nonterminals map
/// back to variables and hatted letters to letters, so translating the result
/// forward returns the input polynomial exactly.
template <Semiring S>
Expr<S> translate_g(const ExtendedSymbols& ext, const Polynomial<S>& p) {
    return poly_to_term<S>(p, [&ext](std::uint32_t id) {
        if (ext.is_var(id)) return Expr<S>::var(ext.base_nonterminals[id]);
        return Expr<S>::letter(ext.letter_of(id));
    });
}

}  // namespace cfder

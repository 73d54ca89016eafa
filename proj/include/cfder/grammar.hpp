#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cfder/alphabet.hpp"
#include "cfder/errors.hpp"
#include "cfder/polynomial.hpp"
#include "cfder/semiring.hpp"

namespace cfder {

/// A symbol of a mixed word: either a nonterminal (by index) or a letter.
using MixedSym = std::variant<std::uint32_t, char>;
using MixedWord = std::vector<MixedSym>;

inline MixedSym nt_sym(std::uint32_t id) { return MixedSym(std::in_place_index<0>, id); }
inline MixedSym letter_sym(char c) { return MixedSym(std::in_place_index<1>, c); }
inline bool sym_is_letter(const MixedSym& s) { return s.index() == 1; }
inline std::uint32_t sym_nt(const MixedSym& s) { return std::get<0>(s); }
inline char sym_letter(const MixedSym& s) { return std::get<1>(s); }

/// A context-free grammar with named nonterminals. Bodies are arbitrary mixed
/// words; the normal-form checks live in the conversion functions below.
struct CFGrammar {
    Alphabet alphabet;
    std::vector<std::string> nonterminals;
    std::vector<std::set<MixedWord>> productions;  // indexed like nonterminals

    std::optional<std::uint32_t> index_of(std::string_view name) const {
        for (std::uint32_t i = 0; i < nonterminals.size(); ++i) {
            if (nonterminals[i] == name) return i;
        }
        return std::nullopt;
    }
};

inline std::string describe_body(const CFGrammar& g, const MixedWord& body) {
    if (body.empty()) return "_";
    std::string out;
    for (const auto& s : body) {
        if (!out.empty()) out += ' ';
        if (sym_is_letter(s)) {
            out += sym_letter(s);
        } else {
            out += g.nonterminals[sym_nt(s)];
        }
    }
    return out;
}

/// True iff the body is empty or a letter followed by nonterminals only.
inline bool body_is_gnf(const MixedWord& body) {
    if (body.empty()) return true;
    if (!sym_is_letter(body[0])) return false;
    for (std::size_t i = 1; i < body.size(); ++i) {
        if (sym_is_letter(body[i])) return false;
    }
    return true;
}

/// True iff the body is empty or starts with a letter (tail may mix letters
/// and nonterminals).
inline bool body_is_weak_gnf(const MixedWord& body) {
    return body.empty() || sym_is_letter(body[0]);
}

/// An automaton structure on nonterminals: one output value and one
/// polynomial derivative per letter. Read as a system of behavioural
/// differential equations, the nonterminal x satisfies o(x) = outputs[x] and
/// x_a = derivatives[x][a].
template <Semiring S>
struct GrammarSystem {
    using Value = typename S::Value;

    Alphabet alphabet;
    std::vector<std::string> nonterminals;
    std::vector<Value> outputs;                          // per nonterminal
    std::vector<std::vector<Polynomial<S>>> derivatives; // [nonterminal][letter index]

    std::optional<std::uint32_t> index_of(std::string_view name) const {
        for (std::uint32_t i = 0; i < nonterminals.size(); ++i) {
            if (nonterminals[i] == name) return i;
        }
        return std::nullopt;
    }

    /// Totality and symbol-range checks; throws on malformed systems.
    void validate() const {
        if (outputs.size() != nonterminals.size() || derivatives.size() != nonterminals.size()) {
            throw Error("grammar system tables must cover every nonterminal");
        }
        for (const auto& row : derivatives) {
            if (row.size() != alphabet.size()) {
                throw Error("grammar system must define a derivative for every letter");
            }
            for (const auto& p : row) require_poly(p);
        }
    }

    /// Checks that a polynomial only mentions this system's nonterminals.
    void require_poly(const Polynomial<S>& p) const {
        auto mx = p.max_symbol();
        if (mx && *mx >= nonterminals.size()) {
            throw UnknownNonterminalError("polynomial mentions nonterminal #" +
                                          std::to_string(*mx) + " outside the system");
        }
    }

    bool operator==(const GrammarSystem& other) const {
        return alphabet == other.alphabet && nonterminals == other.nonterminals &&
               outputs_equal(other) && derivatives == other.derivatives;
    }

private:
    bool outputs_equal(const GrammarSystem& other) const {
        if (outputs.size() != other.outputs.size()) return false;
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            if (!S::eq(outputs[i], other.outputs[i])) return false;
        }
        return true;
    }
};

/// Reads a grammar in Greibach normal form as an automaton on nonterminals:
/// the output marks nullability and the a-derivative collects the tails of
/// a-productions. Weighted instances give every production multiplicity one.
template <Semiring S>
GrammarSystem<S> grammar_to_coalgebra(const CFGrammar& g) {
    GrammarSystem<S> sys{g.alphabet, g.nonterminals, {}, {}};
    sys.outputs.resize(g.nonterminals.size(), S::zero());
    sys.derivatives.assign(g.nonterminals.size(),
                           std::vector<Polynomial<S>>(g.alphabet.size()));
    for (std::uint32_t x = 0; x < g.nonterminals.size(); ++x) {
        for (const MixedWord& body : g.productions[x]) {
            if (!body_is_gnf(body)) {
                throw NotGnfError("production " + g.nonterminals[x] + " -> " +
                                  describe_body(g, body) + " is not in Greibach normal form");
            }
            if (body.empty()) {
                sys.outputs[x] = S::one();
                continue;
            }
            std::size_t a = g.alphabet.require(sym_letter(body[0]));
            Monomial tail;
            tail.reserve(body.size() - 1);
            for (std::size_t i = 1; i < body.size(); ++i) tail.push_back(sym_nt(body[i]));
            sys.derivatives[x][a].add_term(std::move(tail), S::one());
        }
    }
    sys.validate();
    return sys;
}

/// Rebuilds the grammar whose coalgebra reading is exactly `sys`: an empty
/// production when the output is one, and a production a·w for every monomial
/// w of the a-derivative. Only meaningful over the Boolean semiring.
inline CFGrammar coalgebra_to_grammar(const GrammarSystem<BoolSemiring>& sys) {
    sys.validate();
    CFGrammar g{sys.alphabet, sys.nonterminals, {}};
    g.productions.resize(sys.nonterminals.size());
    for (std::uint32_t x = 0; x < sys.nonterminals.size(); ++x) {
        if (sys.outputs[x]) g.productions[x].insert(MixedWord{});
        for (std::size_t a = 0; a < sys.alphabet.size(); ++a) {
            for (const auto& [m, k] : sys.derivatives[x][a].terms()) {
                (void)k;
                MixedWord body;
                body.reserve(m.size() + 1);
                body.push_back(letter_sym(sys.alphabet.letter(a)));
                for (auto id : m) body.push_back(nt_sym(id));
                g.productions[x].insert(std::move(body));
            }
        }
    }
    return g;
}

template <Semiring S>
typename S::Value monomial_output(const GrammarSystem<S>& sys, const Monomial& m) {
    typename S::Value out = S::one();
    for (auto id : m) {
        out = S::mul(out, sys.outputs[id]);
        if (is_zero<S>(out)) break;  // sound: zero annihilates
    }
    return out;
}

/// Output of the automaton extension at a polynomial state: linear in the
/// monomials, with the output of a monomial the product of its symbols'
/// outputs (the empty word outputs one).
template <Semiring S>
typename S::Value poly_output(const GrammarSystem<S>& sys, const Polynomial<S>& p) {
    sys.require_poly(p);
    typename S::Value out = S::zero();
    for (const auto& [m, k] : p.terms()) {
        out = S::add(out, S::mul(k, monomial_output(sys, m)));
    }
    return out;
}

template <Semiring S>
Polynomial<S> monomial_derivative(const GrammarSystem<S>& sys, const Monomial& m,
                                  std::size_t letter_index) {
    if (m.empty()) return Polynomial<S>::zero();
    std::uint32_t head = m[0];
    Monomial tail(m.begin() + 1, m.end());
    // (x w)_a = x_a · w + o(x) · w_a
    Polynomial<S> out = sys.derivatives[head][letter_index].times(Polynomial<S>::monomial(tail));
    const auto& ox = sys.outputs[head];
    if (!is_zero<S>(ox)) {
        out = out.plus(monomial_derivative(sys, tail, letter_index).scaled(ox));
    }
    return out;
}

/// Letter derivative of a polynomial state, linear in the monomials.
template <Semiring S>
Polynomial<S> poly_derivative(const GrammarSystem<S>& sys, const Polynomial<S>& p, char a) {
    sys.require_poly(p);
    std::size_t ai = sys.alphabet.require(a);
    Polynomial<S> out;
    for (const auto& [m, k] : p.terms()) {
        out = out.plus(monomial_derivative(sys, m, ai).scaled(k));
    }
    return out;
}

/// Iterated letter derivative; the empty word is the identity.
template <Semiring S>
Polynomial<S> word_derivative(const GrammarSystem<S>& sys, Polynomial<S> p, std::string_view w) {
    for (char a : w) p = poly_derivative(sys, p, a);
    return p;
}

/// The coefficient of `w` in the series denoted by the state `p`: the output
/// after the word derivative. Over the Boolean semiring this is membership.
template <Semiring S>
typename S::Value coefficient(const GrammarSystem<S>& sys, const Polynomial<S>& p,
                              std::string_view w) {
    return poly_output(sys, word_derivative(sys, p, w));
}

/// All words of length at most `maxlen` with nonzero coefficient, in
/// length-then-alphabet order.
template <Semiring S>
std::vector<std::pair<std::string, typename S::Value>> enumerate_series(
    const GrammarSystem<S>& sys, const Polynomial<S>& p, int maxlen) {
    std::vector<std::pair<std::string, typename S::Value>> out;
    std::vector<std::pair<std::string, Polynomial<S>>> level{{std::string(), p}};
    for (int len = 0; len <= maxlen; ++len) {
        std::vector<std::pair<std::string, Polynomial<S>>> next;
        for (const auto& [w, q] : level) {
            auto o = poly_output(sys, q);
            if (!is_zero<S>(o)) out.emplace_back(w, o);
            if (len == maxlen) continue;
            for (std::size_t a = 0; a < sys.alphabet.size(); ++a) {
                Polynomial<S> d = poly_derivative(sys, q, sys.alphabet.letter(a));
                if (d.is_zero_poly()) continue;  // dead state, nothing reachable
                next.emplace_back(w + sys.alphabet.letter(a), std::move(d));
            }
        }
        level = std::move(next);
    }
    return out;
}

/// Renders a polynomial with named symbols: monomials in storage order
/// (ascending length-lex), symbols space-separated, `_` for the empty word,
/// a `k *` prefix for non-unit coefficients, `0` for the zero polynomial.
template <Semiring S>
std::string to_string(const Polynomial<S>& p, const std::vector<std::string>& names) {
    if (p.is_zero_poly()) return "0";
    std::string out;
    for (const auto& [m, k] : p.terms()) {
        if (!out.empty()) out += " + ";
        if (!is_one<S>(k)) {
            out += S::to_string(k);
            out += " * ";
        }
        if (m.empty()) {
            out += '_';
        } else {
            for (std::size_t i = 0; i < m.size(); ++i) {
                if (i > 0) out += ' ';
                out += names[m[i]];
            }
        }
    }
    return out;
}

enum class OracleAnswer { Yes, NoWithinBound };

/// The documented default step bound for the derivation oracle.
inline int default_oracle_steps(std::size_t word_length, std::size_t nonterminal_count) {
    return static_cast<int>(4 * (word_length + 1) * nonterminal_count);
}

/// Bounded breadth-first search over leftmost derivations of a GNF grammar.
/// A sentential form reached from `start` is a consumed prefix of `w` plus a
/// word of nonterminals; forms whose prefix deviates from `w` are pruned.
/// Yes means some derivation of `w` takes at most `max_steps` steps; the
/// negative answer is only "not within the bound".
inline OracleAnswer derivation_oracle(const CFGrammar& g, const Monomial& start,
                                      std::string_view w, int max_steps) {
    for (const auto& prods : g.productions) {
        for (const auto& body : prods) {
            if (!body_is_gnf(body)) {
                throw NotGnfError("derivation oracle requires a grammar in Greibach normal form");
            }
        }
    }
    for (auto id : start) {
        if (id >= g.nonterminals.size()) {
            throw UnknownNonterminalError("start word mentions nonterminal #" + std::to_string(id));
        }
    }

    struct Form {
        std::size_t pos;   // how much of w has been produced
        Monomial rest;     // remaining nonterminals
        int steps;
    };
    auto key = [](const Form& f) { return std::make_pair(f.pos, f.rest); };

    std::set<std::pair<std::size_t, Monomial>> seen;
    std::deque<Form> queue;
    queue.push_back({0, start, 0});
    seen.insert(key(queue.front()));

    while (!queue.empty()) {
        Form f = std::move(queue.front());
        queue.pop_front();
        if (f.pos == w.size() && f.rest.empty()) return OracleAnswer::Yes;
        if (f.steps >= max_steps) continue;
        if (f.rest.empty()) continue;

        std::uint32_t head = f.rest[0];
        for (const MixedWord& body : g.productions[head]) {
            Form next;
            next.steps = f.steps + 1;
            if (body.empty()) {
                next.pos = f.pos;
                next.rest.assign(f.rest.begin() + 1, f.rest.end());
            } else {
                char a = sym_letter(body[0]);
                if (f.pos >= w.size() || w[f.pos] != a) continue;
                next.pos = f.pos + 1;
                next.rest.reserve(body.size() - 1 + f.rest.size() - 1);
                for (std::size_t i = 1; i < body.size(); ++i) next.rest.push_back(sym_nt(body[i]));
                next.rest.insert(next.rest.end(), f.rest.begin() + 1, f.rest.end());
            }
            if (seen.insert(key(next)).second) queue.push_back(std::move(next));
        }
    }
    return OracleAnswer::NoWithinBound;
}

}  // namespace cfder

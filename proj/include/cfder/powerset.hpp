#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cfder/grammar.hpp"

namespace cfder {

/// A finite language of mixed words over nonterminals and letters.
using MixedLang = std::set<MixedWord>;

/// A weak-GNF system: outputs mark nullability, and each (nonterminal,
/// letter) derivative is a finite language of mixed words (production tails
/// may mix letters and nonterminals).
struct WeakGnfSystem {
    Alphabet alphabet;
    std::vector<std::string> nonterminals;
    std::vector<bool> outputs;
    std::vector<std::vector<MixedLang>> derivatives;  // [nonterminal][letter index]

    void validate() const {
        if (outputs.size() != nonterminals.size() || derivatives.size() != nonterminals.size()) {
            throw Error("weak-GNF system tables must cover every nonterminal");
        }
        for (const auto& row : derivatives) {
            if (row.size() != alphabet.size()) {
                throw Error("weak-GNF system must define a derivative for every letter");
            }
            for (const auto& lang : row) {
                for (const auto& w : lang) require_word(w);
            }
        }
    }

    void require_word(const MixedWord& w) const {
        for (const auto& s : w) {
            if (sym_is_letter(s)) {
                if (!alphabet.contains(sym_letter(s))) {
                    throw UnknownSymbolError(std::string("unknown letter '") + sym_letter(s) +
                                             "' in mixed word");
                }
            } else if (sym_nt(s) >= nonterminals.size()) {
                throw UnknownSymbolError("unknown nonterminal #" + std::to_string(sym_nt(s)) +
                                         " in mixed word");
            }
        }
    }
};

inline WeakGnfSystem weak_gnf_from_grammar(const CFGrammar& g) {
    WeakGnfSystem sys{g.alphabet, g.nonterminals, {}, {}};
    sys.outputs.assign(g.nonterminals.size(), false);
    sys.derivatives.assign(g.nonterminals.size(), std::vector<MixedLang>(g.alphabet.size()));
    for (std::uint32_t x = 0; x < g.nonterminals.size(); ++x) {
        for (const MixedWord& body : g.productions[x]) {
            if (!body_is_weak_gnf(body)) {
                throw NotGnfError("production " + g.nonterminals[x] + " -> " +
                                  describe_body(g, body) + " is not in weak Greibach normal form");
            }
            if (body.empty()) {
                sys.outputs[x] = true;
                continue;
            }
            std::size_t a = g.alphabet.require(sym_letter(body[0]));
            sys.derivatives[x][a].insert(MixedWord(body.begin() + 1, body.end()));
        }
    }
    sys.validate();
    return sys;
}

inline WeakGnfSystem weak_gnf_from_system(const GrammarSystem<BoolSemiring>& s) {
    s.validate();
    WeakGnfSystem sys{s.alphabet, s.nonterminals, {}, {}};
    sys.outputs.assign(s.nonterminals.size(), false);
    sys.derivatives.assign(s.nonterminals.size(), std::vector<MixedLang>(s.alphabet.size()));
    for (std::uint32_t x = 0; x < s.nonterminals.size(); ++x) {
        sys.outputs[x] = s.outputs[x];
        for (std::size_t a = 0; a < s.alphabet.size(); ++a) {
            for (const auto& [m, k] : s.derivatives[x][a].terms()) {
                (void)k;
                MixedWord w;
                w.reserve(m.size());
                for (auto id : m) w.push_back(nt_sym(id));
                sys.derivatives[x][a].insert(std::move(w));
            }
        }
    }
    sys.validate();
    return sys;
}

inline MixedLang lang_indicator(bool b) {
    return b ? MixedLang{MixedWord{}} : MixedLang{};
}

inline MixedLang lang_union(const MixedLang& a, const MixedLang& b) {
    MixedLang out = a;
    out.insert(b.begin(), b.end());
    return out;
}

inline MixedLang lang_concat(const MixedLang& a, const MixedLang& b) {
    MixedLang out;
    for (const auto& u : a) {
        for (const auto& v : b) {
            MixedWord w = u;
            w.insert(w.end(), v.begin(), v.end());
            out.insert(std::move(w));
        }
    }
    return out;
}

inline MixedLang lang_prepend(const MixedSym& s, const MixedLang& l) {
    MixedLang out;
    for (const auto& v : l) {
        MixedWord w;
        w.reserve(v.size() + 1);
        w.push_back(s);
        w.insert(w.end(), v.begin(), v.end());
        out.insert(std::move(w));
    }
    return out;
}

inline bool mixed_word_output(const WeakGnfSystem& sys, const MixedWord& w) {
    for (const auto& s : w) {
        if (sym_is_letter(s)) return false;
        if (!sys.outputs[sym_nt(s)]) return false;
    }
    return true;
}

inline bool weak_output(const WeakGnfSystem& sys, const MixedLang& l) {
    for (const auto& w : l) {
        if (mixed_word_output(sys, w)) return true;
    }
    return false;
}

inline MixedLang weak_word_derivative(const WeakGnfSystem& sys, const MixedWord& w, char a);

/// The decomposition of a single word into output plus letter-headed
/// derivatives: i(output) with one {b}-prefixed block per letter.
inline MixedLang re_expand(const WeakGnfSystem& sys, const MixedWord& w) {
    MixedLang out = lang_indicator(mixed_word_output(sys, w));
    for (char b : sys.alphabet.letters()) {
        out = lang_union(out, lang_prepend(letter_sym(b), weak_word_derivative(sys, w, b)));
    }
    return out;
}

/// Letter derivative of a singleton mixed word per the weak-GNF scheme. The
/// tail is re-expanded into its output and letter blocks so that the result
/// stays within mixed words.
inline MixedLang weak_word_derivative(const WeakGnfSystem& sys, const MixedWord& w, char a) {
    std::size_t ai = sys.alphabet.require(a);
    if (w.empty()) return MixedLang{};
    MixedWord tail(w.begin() + 1, w.end());
    if (sym_is_letter(w[0])) {
        char b = sym_letter(w[0]);
        if (b != a) return MixedLang{};
        return re_expand(sys, tail);
    }
    std::uint32_t x = sym_nt(w[0]);
    MixedLang out = lang_concat(sys.derivatives[x][ai], re_expand(sys, tail));
    if (sys.outputs[x]) out = lang_union(out, weak_word_derivative(sys, tail, a));
    return out;
}

inline MixedLang weak_derivative(const WeakGnfSystem& sys, const MixedLang& l, char a) {
    MixedLang out;
    for (const auto& w : l) {
        MixedLang d = weak_word_derivative(sys, w, a);
        out.insert(d.begin(), d.end());
    }
    return out;
}

/// One output bit plus one finite mixed language per letter: an element of
/// the function space the weak-GNF extension lands in.
struct BehaviourPair {
    bool out = false;
    std::vector<MixedLang> der;  // indexed by letter

    bool operator==(const BehaviourPair& other) const {
        return out == other.out && der == other.der;
    }
    bool operator!=(const BehaviourPair& other) const { return !(*this == other); }
};

inline BehaviourPair pair_zero(const Alphabet& alphabet) {
    return BehaviourPair{false, std::vector<MixedLang>(alphabet.size())};
}

inline BehaviourPair pair_one(const Alphabet& alphabet) {
    return BehaviourPair{true, std::vector<MixedLang>(alphabet.size())};
}

inline BehaviourPair embed_nonterminal(const WeakGnfSystem& sys, std::uint32_t x) {
    return BehaviourPair{sys.outputs[x], sys.derivatives[x]};
}

inline BehaviourPair embed_letter(const Alphabet& alphabet, char b) {
    BehaviourPair p{false, std::vector<MixedLang>(alphabet.size())};
    p.der[alphabet.require(b)] = lang_indicator(true);
    return p;
}

inline void require_compatible(const BehaviourPair& p, const BehaviourPair& q) {
    if (p.der.size() != q.der.size()) {
        throw AlphabetMismatchError("behaviour pairs live over different alphabets");
    }
}

/// Componentwise join: outputs disjoin, derivative languages unite.
inline BehaviourPair oplus(const BehaviourPair& p, const BehaviourPair& q) {
    require_compatible(p, q);
    BehaviourPair out{p.out || q.out, std::vector<MixedLang>(p.der.size())};
    for (std::size_t a = 0; a < p.der.size(); ++a) {
        out.der[a] = lang_union(p.der[a], q.der[a]);
    }
    return out;
}

/// The product: the left derivative is post-composed with the decomposition
/// of the right operand into its output and letter blocks, and the right
/// derivative passes through when the left output is set.
inline BehaviourPair otimes(const Alphabet& alphabet, const BehaviourPair& p,
                            const BehaviourPair& q) {
    require_compatible(p, q);
    if (p.der.size() != alphabet.size()) {
        throw AlphabetMismatchError("behaviour pair does not match the alphabet");
    }
    MixedLang q_expanded = lang_indicator(q.out);
    for (std::size_t b = 0; b < alphabet.size(); ++b) {
        q_expanded = lang_union(q_expanded, lang_prepend(letter_sym(alphabet.letter(b)), q.der[b]));
    }
    BehaviourPair out{p.out && q.out, std::vector<MixedLang>(p.der.size())};
    for (std::size_t a = 0; a < p.der.size(); ++a) {
        out.der[a] = lang_concat(p.der[a], q_expanded);
        if (p.out) out.der[a] = lang_union(out.der[a], q.der[a]);
    }
    return out;
}

/// The semiring-morphism image of a finite mixed language: fold the product
/// over each word's symbols (left to right, empty word to the unit) and join
/// the results (empty language to zero).
inline BehaviourPair morphism_image(const WeakGnfSystem& sys, const MixedLang& l) {
    BehaviourPair acc = pair_zero(sys.alphabet);
    for (const auto& w : l) {
        BehaviourPair word = pair_one(sys.alphabet);
        for (const auto& s : w) {
            BehaviourPair atom = sym_is_letter(s) ? embed_letter(sys.alphabet, sym_letter(s))
                                                  : embed_nonterminal(sys, sym_nt(s));
            word = otimes(sys.alphabet, word, atom);
        }
        acc = oplus(acc, word);
    }
    return acc;
}

/// The same behaviour computed directly by the weak-GNF extension.
inline BehaviourPair extension_behaviour(const WeakGnfSystem& sys, const MixedLang& l) {
    BehaviourPair out{weak_output(sys, l), std::vector<MixedLang>(sys.alphabet.size())};
    for (std::size_t a = 0; a < sys.alphabet.size(); ++a) {
        out.der[a] = weak_derivative(sys, l, sys.alphabet.letter(a));
    }
    return out;
}

struct SemiringCheckReport {
    int law_checks = 0;
    int agreement_checks = 0;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

namespace detail {

inline std::string show_mixed_word(const WeakGnfSystem& sys, const MixedWord& w) {
    if (w.empty()) return "_";
    std::string out;
    for (const auto& s : w) {
        if (!out.empty()) out += ' ';
        if (sym_is_letter(s)) {
            out += sym_letter(s);
        } else {
            out += sys.nonterminals[sym_nt(s)];
        }
    }
    return out;
}

inline std::string show_lang(const WeakGnfSystem& sys, const MixedLang& l) {
    std::string out = "{";
    bool first = true;
    for (const auto& w : l) {
        if (!first) out += ", ";
        first = false;
        out += show_mixed_word(sys, w);
    }
    return out + "}";
}

inline std::string show_pair(const WeakGnfSystem& sys, const BehaviourPair& p) {
    std::string out = p.out ? "(1" : "(0";
    for (std::size_t a = 0; a < p.der.size(); ++a) {
        out += ", ";
        out += sys.alphabet.letter(a);
        out += " -> ";
        out += show_lang(sys, p.der[a]);
    }
    return out + ")";
}

inline MixedWord random_mixed_word(std::mt19937_64& rng, const WeakGnfSystem& sys,
                                   std::size_t max_len) {
    MixedWord w;
    std::size_t len = rng() % (max_len + 1);
    for (std::size_t i = 0; i < len; ++i) {
        if (!sys.nonterminals.empty() && rng() % 2 == 0) {
            w.push_back(nt_sym(static_cast<std::uint32_t>(rng() % sys.nonterminals.size())));
        } else {
            w.push_back(letter_sym(sys.alphabet.letter(rng() % sys.alphabet.size())));
        }
    }
    return w;
}

inline MixedLang random_lang(std::mt19937_64& rng, const WeakGnfSystem& sys, std::size_t max_words,
                             std::size_t max_len) {
    MixedLang l;
    std::size_t n = rng() % (max_words + 1);
    for (std::size_t i = 0; i < n; ++i) l.insert(random_mixed_word(rng, sys, max_len));
    return l;
}

inline BehaviourPair random_pair(std::mt19937_64& rng, const WeakGnfSystem& sys) {
    BehaviourPair p{rng() % 2 == 0, std::vector<MixedLang>(sys.alphabet.size())};
    for (std::size_t a = 0; a < sys.alphabet.size(); ++a) {
        p.der[a] = random_lang(rng, sys, 3, 3);
    }
    return p;
}

}  // namespace detail

/// Randomized exact check of the idempotent-semiring laws for the pair
/// operations, plus the agreement between the morphism image and the
/// extension behaviour on random finite mixed languages. All objects are
/// finite, so every check is an exact structural equality.
inline SemiringCheckReport check_semiring_agreement(const WeakGnfSystem& sys,
                                                    std::uint64_t seed, int samples) {
    sys.validate();
    std::mt19937_64 rng(seed);
    SemiringCheckReport report;
    const Alphabet& ab = sys.alphabet;

    auto fail = [&](const std::string& law, const BehaviourPair& lhs, const BehaviourPair& rhs) {
        report.violations.push_back(law + ": " + detail::show_pair(sys, lhs) +
                                    " != " + detail::show_pair(sys, rhs));
    };

    for (int i = 0; i < samples; ++i) {
        BehaviourPair p = detail::random_pair(rng, sys);
        BehaviourPair q = detail::random_pair(rng, sys);
        BehaviourPair r = detail::random_pair(rng, sys);
        BehaviourPair zero = pair_zero(ab);
        BehaviourPair one = pair_one(ab);

        struct Law {
            const char* name;
            BehaviourPair lhs;
            BehaviourPair rhs;
        };
        const Law laws[] = {
            {"zero + p = p", oplus(zero, p), p},
            {"p + zero = p", oplus(p, zero), p},
            {"p + q = q + p", oplus(p, q), oplus(q, p)},
            {"(p + q) + r = p + (q + r)", oplus(oplus(p, q), r), oplus(p, oplus(q, r))},
            {"one * p = p", otimes(ab, one, p), p},
            {"p * one = p", otimes(ab, p, one), p},
            {"(p * q) * r = p * (q * r)", otimes(ab, otimes(ab, p, q), r),
             otimes(ab, p, otimes(ab, q, r))},
            {"(p + q) * r = p * r + q * r", otimes(ab, oplus(p, q), r),
             oplus(otimes(ab, p, r), otimes(ab, q, r))},
            {"p * (q + r) = p * q + p * r", otimes(ab, p, oplus(q, r)),
             oplus(otimes(ab, p, q), otimes(ab, p, r))},
            {"zero * p = zero", otimes(ab, zero, p), zero},
            {"p * zero = zero", otimes(ab, p, zero), zero},
            {"p + p = p", oplus(p, p), p},
        };
        for (const Law& law : laws) {
            ++report.law_checks;
            if (!(law.lhs == law.rhs)) fail(law.name, law.lhs, law.rhs);
        }

        ++report.agreement_checks;
        MixedLang l = detail::random_lang(rng, sys, 3, 3);
        BehaviourPair via_morphism = morphism_image(sys, l);
        BehaviourPair via_extension = extension_behaviour(sys, l);
        if (!(via_morphism == via_extension)) {
            report.violations.push_back("morphism image disagrees with extension on " +
                                        detail::show_lang(sys, l) + ": " +
                                        detail::show_pair(sys, via_morphism) + " != " +
                                        detail::show_pair(sys, via_extension));
        }
    }
    return report;
}

}  // namespace cfder

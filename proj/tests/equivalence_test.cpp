#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfder/equivalence.hpp"
#include "support/gen.hpp"

using namespace cfder;
using B = BoolSemiring;
using EB = Expr<B>;

namespace {

State<B> running_grammar_state() {
    auto sys = std::make_shared<const GrammarSystem<B>>(
        grammar_to_coalgebra<B>(testgen::make_running_grammar()));
    return State<B>::of_grammar(sys, Polynomial<B>::monomial({0}));
}

State<B> worked_closure_state() {
    EB closed = close_term(EB::var("x"), canonical_assignment(testgen::make_running_terms()));
    return State<B>::of_mu(Alphabet({'a', 'b'}), closed);
}

EB anbn_expr() {
    return EB::mu("x", EB::sum(EB::one(), EB::prod(EB::letter('a'),
                                                   EB::prod(EB::var("x"), EB::letter('b')))));
}

/// x -> eps | a x | b y ; y -> eps | b y. Language of x: a^n b^m.
State<B> anbm_grammar_state() {
    CFGrammar g{Alphabet({'a', 'b'}), {"x", "y"}, {}};
    g.productions.resize(2);
    g.productions[0].insert(MixedWord{});
    g.productions[0].insert({letter_sym('a'), nt_sym(0)});
    g.productions[0].insert({letter_sym('b'), nt_sym(1)});
    g.productions[1].insert(MixedWord{});
    g.productions[1].insert({letter_sym('b'), nt_sym(1)});
    auto sys = std::make_shared<const GrammarSystem<B>>(grammar_to_coalgebra<B>(g));
    return State<B>::of_grammar(sys, Polynomial<B>::monomial({0}));
}

/// Exhaustive shortest-difference search, independent of the engines.
std::optional<std::string> shortest_difference(const State<B>& a, const State<B>& b, int maxlen) {
    for (const auto& w : testgen::all_words(a.alphabet(), maxlen)) {
        if (a.coefficient(w) != b.coefficient(w)) return w;
    }
    return std::nullopt;
}

State<B> random_state(testgen::Rng& rng, const Alphabet& alphabet) {
    switch (testgen::pick(rng, 3)) {
        case 0: {
            auto sys = std::make_shared<const GrammarSystem<B>>(
                testgen::random_grammar_system<B>(rng, 3, alphabet.size()));
            // regenerate until the alphabet matches
            if (sys->alphabet != alphabet) return random_state(rng, alphabet);
            return State<B>::of_grammar(
                sys, testgen::random_polynomial<B>(rng, sys->nonterminals.size(), 2, 2));
        }
        case 1: {
            auto sys = std::make_shared<const TermSystem<B>>(
                testgen::random_term_system<B>(rng, 3, alphabet.size(), 2));
            if (sys->alphabet != alphabet) return random_state(rng, alphabet);
            return State<B>::of_term(
                sys, testgen::random_term<B>(rng, sys->alphabet, sys->nonterminals, 3));
        }
        default:
            return State<B>::of_mu(alphabet, testgen::random_closed_expr<B>(rng, alphabet, 4));
    }
}

}  // namespace

TEST_CASE("word equivalence across representations on the worked example") {
    EquivResult<B> r = word_equiv(running_grammar_state(), worked_closure_state(), 10);
    CHECK(r.equivalent());
    CHECK(r.checked_to == 10);
}

TEST_CASE("word equivalence separates by output immediately") {
    State<B> e = State<B>::of_mu(Alphabet({'a', 'b'}), anbn_expr());
    State<B> ab = State<B>::of_mu(Alphabet({'a', 'b'}),
                                  EB::prod(EB::letter('a'), EB::letter('b')));
    EquivResult<B> r = word_equiv(e, ab, 6);
    REQUIRE(r.inequivalent());
    CHECK(r.witness == "");
}

TEST_CASE("every state is word-equivalent to itself") {
    testgen::Rng rng(51);
    Alphabet alphabet({'a', 'b'});
    for (int i = 0; i < 30; ++i) {
        State<B> s = random_state(rng, alphabet);
        CHECK(word_equiv(s, s, 5).equivalent());
        CHECK(bisim_upto(s, s, 1000).equivalent());
    }
}

TEST_CASE("word equivalence returns a shortest witness") {
    testgen::Rng rng(52);
    Alphabet alphabet({'a', 'b'});
    int found = 0;
    for (int i = 0; i < 120; ++i) {
        State<B> a = random_state(rng, alphabet);
        State<B> b = random_state(rng, alphabet);
        EquivResult<B> r = word_equiv(a, b, 5);
        auto expected = shortest_difference(a, b, 5);
        if (r.inequivalent()) {
            ++found;
            REQUIRE(expected.has_value());
            CHECK(r.witness == *expected);  // length and alphabet-order tie-break
            CHECK(a.coefficient(r.witness) != b.coefficient(r.witness));
        } else {
            CHECK_FALSE(expected.has_value());
        }
    }
    CHECK(found > 10);  // the sample should contain plenty of inequivalent pairs
}

TEST_CASE("alphabet mismatch is reported") {
    State<B> a = State<B>::of_mu(Alphabet({'a', 'b'}), EB::one());
    State<B> b = State<B>::of_mu(Alphabet({'a'}), EB::one());
    CHECK_THROWS_AS(word_equiv(a, b, 3), AlphabetMismatchError);
    CHECK_THROWS_AS(bisim_upto(a, b, 10), AlphabetMismatchError);
}

TEST_CASE("bisimulation discharges unit and distributivity laws instantly") {
    testgen::Rng rng(53);
    Alphabet alphabet({'a', 'b'});
    for (int i = 0; i < 40; ++i) {
        EB t = testgen::random_closed_expr<B>(rng, alphabet, 3);
        EB s = testgen::random_closed_expr<B>(rng, alphabet, 3);
        EB u = testgen::random_closed_expr<B>(rng, alphabet, 3);

        State<B> zt = State<B>::of_mu(alphabet, EB::sum(EB::zero(), t));
        State<B> st = State<B>::of_mu(alphabet, t);
        EquivResult<B> r1 = bisim_upto(zt, st, 1000);
        REQUIRE(r1.equivalent());
        CHECK(r1.relation.size() <= 1);

        State<B> lhs = State<B>::of_mu(alphabet, EB::prod(s, EB::sum(t, u)));
        State<B> rhs = State<B>::of_mu(alphabet,
                                       EB::sum(EB::prod(s, t), EB::prod(s, u)));
        EquivResult<B> r2 = bisim_upto(lhs, rhs, 2000);
        CHECK(r2.equivalent());
    }
}

TEST_CASE("bisimulation proves equivalence of a duplicated grammar") {
    // two disjoint right-linear copies inside one system: (ab)* twice
    CFGrammar g{Alphabet({'a', 'b'}), {"x", "y", "x2", "y2"}, {}};
    g.productions.resize(4);
    g.productions[0].insert(MixedWord{});
    g.productions[0].insert({letter_sym('a'), nt_sym(1)});
    g.productions[1].insert({letter_sym('b'), nt_sym(0)});
    g.productions[2].insert(MixedWord{});
    g.productions[2].insert({letter_sym('a'), nt_sym(3)});
    g.productions[3].insert({letter_sym('b'), nt_sym(2)});
    auto sys = std::make_shared<const GrammarSystem<B>>(grammar_to_coalgebra<B>(g));
    State<B> s1 = State<B>::of_grammar(sys, Polynomial<B>::monomial({0}));
    State<B> s2 = State<B>::of_grammar(sys, Polynomial<B>::monomial({2}));
    EquivResult<B> r = bisim_upto(s1, s2, 10000);
    REQUIRE(r.equivalent());
    CHECK(verify_up_to_relation<B>(r.relation));
    CHECK(r.relation.size() >= 2);
    CHECK(r.relation.size() <= 4);
}

TEST_CASE("infinite pair families exhaust the budget rather than lie") {
    // a^n b^n against a disjoint copy of itself: the polynomial states x y^n
    // never repeat, so the up-to-sum engine cannot close the relation
    CFGrammar g{Alphabet({'a', 'b'}), {"x", "y", "x2", "y2"}, {}};
    g.productions.resize(4);
    g.productions[0].insert(MixedWord{});
    g.productions[0].insert({letter_sym('a'), nt_sym(0), nt_sym(1)});
    g.productions[1].insert({letter_sym('b')});
    g.productions[2].insert(MixedWord{});
    g.productions[2].insert({letter_sym('a'), nt_sym(2), nt_sym(3)});
    g.productions[3].insert({letter_sym('b')});
    auto sys = std::make_shared<const GrammarSystem<B>>(grammar_to_coalgebra<B>(g));
    State<B> s1 = State<B>::of_grammar(sys, Polynomial<B>::monomial({0}));
    State<B> s2 = State<B>::of_grammar(sys, Polynomial<B>::monomial({2}));
    EquivResult<B> r = bisim_upto(s1, s2, 2000);
    CHECK(r.unknown());
}

TEST_CASE("bisimulation finds concrete differences across representations") {
    State<B> e = State<B>::of_mu(Alphabet({'a', 'b'}), anbn_expr());
    State<B> g = anbm_grammar_state();
    EquivResult<B> r = bisim_upto(e, g, 20000);
    REQUIRE(r.inequivalent());
    CHECK(r.witness.size() <= 3);  // "b" or another short separator
    CHECK(e.coefficient(r.witness) != g.coefficient(r.witness));
}

TEST_CASE("bisimulation respects its node budget") {
    State<B> e = State<B>::of_mu(Alphabet({'a', 'b'}), anbn_expr());
    State<B> g = running_grammar_state();
    EquivResult<B> r = bisim_upto(e, g, 3);
    CHECK(r.unknown());
}

TEST_CASE("the searches never contradict each other") {
    testgen::Rng rng(54);
    Alphabet alphabet({'a', 'b'});
    for (int i = 0; i < 200; ++i) {
        State<B> a = random_state(rng, alphabet);
        State<B> b = random_state(rng, alphabet);
        EquivResult<B> w = word_equiv(a, b, 8);
        EquivResult<B> s = bisim_upto(a, b, 400);
        if (s.equivalent()) CHECK_FALSE(w.inequivalent());
        if (s.inequivalent()) {
            CHECK_FALSE(w.equivalent());
            CHECK(a.coefficient(s.witness) != b.coefficient(s.witness));
        }
        // Unknown is always acceptable
    }
}

TEST_CASE("constructed relations pass the post-hoc check") {
    testgen::Rng rng(55);
    Alphabet alphabet({'a', 'b'});
    int proved = 0;
    for (int i = 0; i < 120; ++i) {
        EB t = testgen::random_closed_expr<B>(rng, alphabet, 3);
        State<B> lhs = State<B>::of_mu(alphabet, EB::sum(t, EB::zero()));
        State<B> rhs = State<B>::of_mu(alphabet, EB::prod(EB::one(), t));
        EquivResult<B> r = bisim_upto(lhs, rhs, 2000);
        if (r.equivalent()) {
            ++proved;
            CHECK(verify_up_to_relation<B>(r.relation));
        }
    }
    CHECK(proved > 100);
}

TEST_CASE("term states and grammar states agree through the translation") {
    testgen::Rng rng(56);
    for (int i = 0; i < 30; ++i) {
        TermSystem<B> tsys = testgen::random_term_system<B>(rng, 3, 2, 2);
        auto shared_t = std::make_shared<const TermSystem<B>>(tsys);
        auto shared_g = std::make_shared<const GrammarSystem<B>>(induced_grammar_system(tsys));
        ExtendedSymbols ext = extended_symbols(tsys);
        EB t = testgen::random_term<B>(rng, tsys.alphabet, tsys.nonterminals, 3);
        State<B> ts = State<B>::of_term(shared_t, t);
        State<B> gs = State<B>::of_grammar(shared_g, translate_f(ext, t));
        CHECK(word_equiv(ts, gs, 7).equivalent());
    }
}

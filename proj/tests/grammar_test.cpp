#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfder/grammar.hpp"
#include "support/gen.hpp"

using namespace cfder;
using B = BoolSemiring;
using N = NatSemiring;

namespace {

Polynomial<B> lang(std::initializer_list<Monomial> monomials) {
    Polynomial<B> p;
    for (const auto& m : monomials) p.add_term(m, true);
    return p;
}

}  // namespace

TEST_CASE("grammar coalgebra of the three-nonterminal example") {
    CFGrammar g = testgen::make_running_grammar();
    GrammarSystem<B> sys = grammar_to_coalgebra<B>(g);

    CHECK(sys.outputs[0] == true);   // x -> eps
    CHECK(sys.outputs[1] == true);   // y -> eps
    CHECK(sys.outputs[2] == false);  // z has no empty production
    CHECK(sys.derivatives[0][0] == lang({{0, 2}}));  // x_a = {xz}
    CHECK(sys.derivatives[0][1] == lang({{1, 2}}));  // x_b = {yz}
    CHECK(sys.derivatives[1][0] == lang({}));        // y_a = 0
    CHECK(sys.derivatives[1][1] == lang({{1, 2}}));  // y_b = {yz}
    CHECK(sys.derivatives[2][0] == lang({{}}));      // z_a = {eps}
    CHECK(sys.derivatives[2][1] == lang({}));
}

TEST_CASE("grammar with only an empty production has empty derivatives") {
    CFGrammar g{Alphabet({'a', 'b'}), {"x"}, {}};
    g.productions.resize(1);
    g.productions[0].insert(MixedWord{});
    GrammarSystem<B> sys = grammar_to_coalgebra<B>(g);
    CHECK(sys.outputs[0] == true);
    CHECK(sys.derivatives[0][0].is_zero_poly());
    CHECK(sys.derivatives[0][1].is_zero_poly());
}

TEST_CASE("non-normal-form bodies are rejected") {
    CFGrammar g{Alphabet({'a'}), {"x"}, {}};
    g.productions.resize(1);
    // body "x a": does not start with a letter
    g.productions[0].insert(MixedWord{nt_sym(0), letter_sym('a')});
    CHECK_THROWS_AS(grammar_to_coalgebra<B>(g), NotGnfError);
}

TEST_CASE("coalgebra and grammar round-trip on the worked example") {
    CFGrammar g = testgen::make_running_grammar();
    GrammarSystem<B> sys = grammar_to_coalgebra<B>(g);
    CFGrammar back = coalgebra_to_grammar(sys);
    CHECK(back.nonterminals == g.nonterminals);
    CHECK(back.productions == g.productions);
}

TEST_CASE("all-zero system maps to the grammar with no productions") {
    GrammarSystem<B> sys{Alphabet({'a'}), {"x"}, {false}, {{Polynomial<B>::zero()}}};
    CFGrammar g = coalgebra_to_grammar(sys);
    CHECK(g.productions[0].empty());
}

TEST_CASE("random boolean systems round-trip through the grammar exactly") {
    testgen::Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        GrammarSystem<B> sys = testgen::random_grammar_system<B>(rng, 4, 3);
        GrammarSystem<B> back = grammar_to_coalgebra<B>(coalgebra_to_grammar(sys));
        CHECK(back == sys);
    }
}

TEST_CASE("polynomial output on the worked example") {
    GrammarSystem<B> sys = grammar_to_coalgebra<B>(testgen::make_running_grammar());
    CHECK(poly_output(sys, lang({{0, 2}})) == false);  // o(x) and o(z) = 1 and 0
    CHECK(poly_output(sys, lang({{}})) == true);       // the empty word outputs 1
    CHECK(poly_output(sys, Polynomial<B>::zero()) == false);
    CHECK_THROWS_AS(poly_output(sys, lang({{7}})), UnknownNonterminalError);
}

TEST_CASE("weighted polynomial output is linear with coefficients") {
    GrammarSystem<N> sys = testgen::make_catalan_system();
    // 3*xx outputs 3 * (o(x) * o(x)) = 3
    Polynomial<N> p = Polynomial<N>::monomial({0, 0}, 3);
    CHECK(poly_output(sys, p) == 3);
}

TEST_CASE("letter derivative on the a^n b^n system") {
    GrammarSystem<B> sys = testgen::make_anbn_system();
    Polynomial<B> x = Polynomial<B>::monomial({0});
    CHECK(poly_derivative(sys, x, 'a') == lang({{0, 1}}));  // {x}_a = {xy}
    CHECK(poly_derivative(sys, lang({{}}), 'a').is_zero_poly());  // {eps}_a = 0
    CHECK_THROWS_AS(poly_derivative(sys, x, 'c'), UnknownLetterError);
}

TEST_CASE("weighted derivative of the convolution-square monomial") {
    GrammarSystem<N> sys = testgen::make_catalan_system();
    // (xx)_a = x' x + o(x) x' = xxx + xx
    Polynomial<N> sq = Polynomial<N>::monomial({0, 0});
    Polynomial<N> expected;
    expected.add_term({0, 0, 0}, 1);
    expected.add_term({0, 0}, 1);
    CHECK(poly_derivative(sys, sq, 'a') == expected);
}

TEST_CASE("word derivatives") {
    GrammarSystem<B> sys = grammar_to_coalgebra<B>(testgen::make_running_grammar());
    Polynomial<B> x = Polynomial<B>::monomial({0});

    SUBCASE("the empty word is the identity") {
        testgen::Rng rng(3);
        for (int i = 0; i < 20; ++i) {
            Polynomial<B> p = testgen::random_polynomial<B>(rng, 3, 3, 3);
            CHECK(word_derivative(sys, p, "") == p);
        }
    }
    SUBCASE("after 'ba' the state accepts") {
        // ba = a^0 b^1 a^1 is in the language of x
        Polynomial<B> d = word_derivative(sys, x, "ba");
        CHECK(poly_output(sys, d) == true);
        CHECK(derivation_oracle(testgen::make_running_grammar(), {0}, "ba", 10) ==
              OracleAnswer::Yes);
    }
    SUBCASE("a^n b^n progress") {
        GrammarSystem<B> anbn = testgen::make_anbn_system();
        Polynomial<B> s = Polynomial<B>::monomial({0});
        CHECK(poly_output(anbn, word_derivative(anbn, s, "ab")) == true);
        CHECK(poly_output(anbn, word_derivative(anbn, s, "aab")) == false);
    }
}

TEST_CASE("coefficients against the membership predicates") {
    GrammarSystem<B> sys = grammar_to_coalgebra<B>(testgen::make_running_grammar());
    Polynomial<B> x = Polynomial<B>::monomial({0});
    Polynomial<B> y = Polynomial<B>::monomial({1});
    CHECK(coefficient(sys, x, "abaa") == true);
    CHECK(coefficient(sys, y, "ab") == false);
    for (const auto& w : testgen::all_words(sys.alphabet, 7)) {
        CHECK(coefficient(sys, x, w) == testgen::is_anbmamn(w));
        CHECK(coefficient(sys, y, w) == testgen::is_bnan(w));
    }
}

TEST_CASE("catalan coefficients") {
    GrammarSystem<N> sys = testgen::make_catalan_system();
    Polynomial<N> x = Polynomial<N>::monomial({0});
    CHECK(coefficient(sys, x, "aaa") == 5);

    // independent recurrence: C(0)=1, C(n+1) = sum C(i) C(n-i)
    std::vector<N::Value> catalan{1};
    for (int n = 0; n < 11; ++n) {
        N::Value next = 0;
        for (int i = 0; i <= n; ++i) next += catalan[i] * catalan[n - i];
        catalan.push_back(next);
    }
    std::string w;
    for (int n = 0; n <= 11; ++n) {
        CHECK(coefficient(sys, x, w) == catalan[n]);
        w += 'a';
    }
}

TEST_CASE("series enumeration") {
    SUBCASE("a^n b^n up to length 4") {
        GrammarSystem<B> sys = testgen::make_anbn_system();
        auto series = enumerate_series(sys, Polynomial<B>::monomial({0}), 4);
        REQUIRE(series.size() == 3);
        CHECK(series[0].first == "");
        CHECK(series[1].first == "ab");
        CHECK(series[2].first == "aabb");
    }
    SUBCASE("maxlen zero keeps only a nonzero empty-word output") {
        GrammarSystem<B> sys = testgen::make_anbn_system();
        auto series = enumerate_series(sys, Polynomial<B>::monomial({0}), 0);
        REQUIRE(series.size() == 1);
        CHECK(series[0].first == "");
        auto none = enumerate_series(sys, Polynomial<B>::monomial({1}), 0);
        CHECK(none.empty());
    }
    SUBCASE("catalan prefix") {
        GrammarSystem<N> sys = testgen::make_catalan_system();
        auto series = enumerate_series(sys, Polynomial<N>::monomial({0}), 3);
        REQUIRE(series.size() == 4);
        CHECK(series[0].second == 1);
        CHECK(series[1].second == 1);
        CHECK(series[2].second == 2);
        CHECK(series[3].second == 5);
    }
}

TEST_CASE("derivation oracle") {
    CFGrammar g = testgen::make_running_grammar();
    SUBCASE("finds short derivations") {
        CHECK(derivation_oracle(g, {0}, "ba", 10) == OracleAnswer::Yes);
    }
    SUBCASE("rejects within the bound") {
        CHECK(derivation_oracle(g, {0}, "ab", 50) == OracleAnswer::NoWithinBound);
    }
    SUBCASE("empty start derives the empty word in zero steps") {
        CHECK(derivation_oracle(g, {}, "", 0) == OracleAnswer::Yes);
    }
    SUBCASE("nonempty target needs steps") {
        CHECK(derivation_oracle(g, {0}, "a", 0) == OracleAnswer::NoWithinBound);
    }
}

TEST_CASE("product rule for single words") {
    testgen::Rng rng(21);
    for (int i = 0; i < 300; ++i) {
        GrammarSystem<B> sys = testgen::random_grammar_system<B>(rng, 3, 2);
        Monomial s = testgen::random_monomial(rng, sys.nonterminals.size(), 5);
        Monomial t = testgen::random_monomial(rng, sys.nonterminals.size(), 5);
        Monomial st = s;
        st.insert(st.end(), t.begin(), t.end());
        Polynomial<B> ps = Polynomial<B>::monomial(s);
        Polynomial<B> pt = Polynomial<B>::monomial(t);
        Polynomial<B> pst = Polynomial<B>::monomial(st);

        CHECK(poly_output(sys, pst) == (poly_output(sys, ps) && poly_output(sys, pt)));
        for (char a : sys.alphabet.letters()) {
            Polynomial<B> lhs = poly_derivative(sys, pst, a);
            Polynomial<B> rhs = poly_derivative(sys, ps, a).times(pt);
            if (poly_output(sys, ps)) rhs = rhs.plus(poly_derivative(sys, pt, a));
            CHECK(lhs == rhs);
        }
    }
}

TEST_CASE("product rule for finite languages, boolean and weighted") {
    testgen::Rng rng(22);
    for (int i = 0; i < 250; ++i) {
        GrammarSystem<B> sys = testgen::random_grammar_system<B>(rng, 3, 2);
        Polynomial<B> ps = testgen::random_polynomial<B>(rng, sys.nonterminals.size(), 3, 3);
        Polynomial<B> pt = testgen::random_polynomial<B>(rng, sys.nonterminals.size(), 3, 3);
        Polynomial<B> prod = ps.times(pt);
        CHECK(poly_output(sys, prod) == (poly_output(sys, ps) && poly_output(sys, pt)));
        for (char a : sys.alphabet.letters()) {
            Polynomial<B> lhs = poly_derivative(sys, prod, a);
            Polynomial<B> rhs = poly_derivative(sys, ps, a).times(pt);
            if (poly_output(sys, ps)) rhs = rhs.plus(poly_derivative(sys, pt, a));
            CHECK(lhs == rhs);
        }
    }
    for (int i = 0; i < 250; ++i) {
        GrammarSystem<N> sys = testgen::random_grammar_system<N>(rng, 3, 2);
        Polynomial<N> ps = testgen::random_polynomial<N>(rng, sys.nonterminals.size(), 3, 3);
        Polynomial<N> pt = testgen::random_polynomial<N>(rng, sys.nonterminals.size(), 3, 3);
        Polynomial<N> prod = ps.times(pt);
        CHECK(poly_output(sys, prod) == poly_output(sys, ps) * poly_output(sys, pt));
        for (char a : sys.alphabet.letters()) {
            Polynomial<N> lhs = poly_derivative(sys, prod, a);
            Polynomial<N> rhs = poly_derivative(sys, ps, a).times(pt);
            rhs = rhs.plus(poly_derivative(sys, pt, a).scaled(poly_output(sys, ps)));
            CHECK(lhs == rhs);
        }
    }
}

TEST_CASE("word-derivative output is linear in the state") {
    testgen::Rng rng(23);
    for (int i = 0; i < 100; ++i) {
        GrammarSystem<B> sys = testgen::random_grammar_system<B>(rng, 3, 2);
        Polynomial<B> p = testgen::random_polynomial<B>(rng, sys.nonterminals.size(), 4, 3);
        for (const auto& w : testgen::all_words(sys.alphabet, 4)) {
            bool whole = poly_output(sys, word_derivative(sys, p, w));
            bool split = false;
            for (const auto& [m, k] : p.terms()) {
                (void)k;
                split = split || poly_output(sys, word_derivative(sys, Polynomial<B>::monomial(m), w));
            }
            CHECK(whole == split);
        }
    }
    for (int i = 0; i < 50; ++i) {
        GrammarSystem<N> sys = testgen::random_grammar_system<N>(rng, 2, 2);
        Polynomial<N> p = testgen::random_polynomial<N>(rng, sys.nonterminals.size(), 3, 2);
        for (const auto& w : testgen::all_words(sys.alphabet, 3)) {
            N::Value whole = poly_output(sys, word_derivative(sys, p, w));
            N::Value split = 0;
            for (const auto& [m, k] : p.terms()) {
                split += k * poly_output(sys, word_derivative(sys, Polynomial<N>::monomial(m), w));
            }
            CHECK(whole == split);
        }
    }
}

TEST_CASE("oracle agrees with derivative membership on random grammars") {
    testgen::Rng rng(24);
    for (int i = 0; i < 30; ++i) {
        CFGrammar g = testgen::random_gnf_grammar(rng, 4, 2);
        GrammarSystem<B> sys = grammar_to_coalgebra<B>(g);
        Monomial start{static_cast<std::uint32_t>(testgen::pick(rng, g.nonterminals.size()))};
        Polynomial<B> p = Polynomial<B>::monomial(start);
        for (const auto& w : testgen::all_words(g.alphabet, 5)) {
            bool member = coefficient(sys, p, w);
            int bound = default_oracle_steps(w.size(), g.nonterminals.size());
            OracleAnswer ans = derivation_oracle(g, start, w, bound);
            CHECK(member == (ans == OracleAnswer::Yes));
        }
    }
}

TEST_CASE("polynomials never store zero coefficients") {
    testgen::Rng rng(25);
    for (int i = 0; i < 100; ++i) {
        GrammarSystem<N> sys = testgen::random_grammar_system<N>(rng, 3, 2);
        Polynomial<N> p = testgen::random_polynomial<N>(rng, sys.nonterminals.size(), 4, 3);
        Polynomial<N> q = testgen::random_polynomial<N>(rng, sys.nonterminals.size(), 4, 3);
        CHECK(p.plus(q).check_normal_form());
        CHECK(p.times(q).check_normal_form());
        CHECK(p.scaled(testgen::random_value<N>(rng)).check_normal_form());
        for (char a : sys.alphabet.letters()) {
            CHECK(poly_derivative(sys, p, a).check_normal_form());
        }
    }
}

TEST_CASE("polynomial printing") {
    GrammarSystem<N> sys = testgen::make_catalan_system();
    Polynomial<N> p;
    p.add_term({}, 3);
    p.add_term({0, 0}, 1);
    CHECK(to_string(p, sys.nonterminals) == "3 * _ + x x");
    CHECK(to_string(Polynomial<N>::zero(), sys.nonterminals) == "0");
}

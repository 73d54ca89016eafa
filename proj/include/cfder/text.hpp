#pragma once

#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfder/equivalence.hpp"
#include "cfder/grammar.hpp"
#include "cfder/muexpr.hpp"
#include "cfder/powerset.hpp"
#include "cfder/term_system.hpp"

namespace cfder {

inline bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)); }
inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '~' || c == '^';
}

namespace detail {

/// Maps positions in a parsed chunk back to (line, column) in the source.
using Locator = std::function<std::pair<std::size_t, std::size_t>(std::size_t)>;

inline Locator line_locator(std::size_t line, std::size_t start_col) {
    return [line, start_col](std::size_t pos) { return std::make_pair(line, start_col + pos); };
}

[[noreturn]] inline void fail_at(const Locator& locate, std::size_t pos, const std::string& msg) {
    auto [line, col] = locate(pos);
    throw ParseError(line, col, msg);
}

class Cursor {
public:
    Cursor(std::string_view text, Locator locate) : text_(text), locate_(std::move(locate)) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool eof() {
        skip_ws();
        return pos_ >= text_.size();
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool try_consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c, const std::string& what) {
        if (!try_consume(c)) fail(std::string("expected '") + c + "' " + what);
    }

    std::string ident() {
        skip_ws();
        if (pos_ >= text_.size() || !is_ident_start(text_[pos_])) fail("expected an identifier");
        std::size_t start = pos_;
        while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string digits() {
        skip_ws();
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            fail("expected a number");
        }
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    bool at_ident() {
        skip_ws();
        return pos_ < text_.size() && is_ident_start(text_[pos_]);
    }

    bool at_digit() {
        skip_ws();
        return pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]));
    }

    std::size_t pos() {
        skip_ws();
        return pos_;
    }

    void reset(std::size_t p) { pos_ = p; }

    [[noreturn]] void fail(const std::string& msg) { fail_at(locate_, pos_, msg); }
    [[noreturn]] void fail_from(std::size_t pos, const std::string& msg) {
        fail_at(locate_, pos, msg);
    }

private:
    std::string_view text_;
    Locator locate_;
    std::size_t pos_ = 0;
};

template <Semiring S>
typename S::Value parse_value(Cursor& cur) {
    std::size_t at = cur.pos();
    std::string text = cur.digits();
    bool ok = false;
    typename S::Value v = S::parse(text, ok);
    if (!ok) {
        cur.fail_from(at, "'" + text + "' is not a valid " + std::string(S::name()) +
                              " coefficient");
    }
    return v;
}

}  // namespace detail

/// Recursive-descent parser for terms and mu-expressions.
///
/// Grammar (product binds tighter than sum, both left-associative; the
/// canonical printer always emits full parentheses):
///   expr    := product ('+' product)*
///   product := postfix ('*' postfix)*      -- '*' not followed by an atom
///   postfix := atom '*'*                   --   is the iteration sugar
///   atom    := '0' | '1' | '#' digits | letter | variable
///            | '(' expr ')' | 'mu' variable '.' expr
/// A single-character identifier naming an alphabet letter is a letter; any
/// other identifier is a variable. The iteration sugar t* expands immediately
/// into a fresh fixed point and requires a closed operand.
template <Semiring S>
class ExprParser {
public:
    ExprParser(std::string_view text, const Alphabet& alphabet, bool allow_mu,
               detail::Locator locate)
        : cur_(text, std::move(locate)), alphabet_(alphabet), allow_mu_(allow_mu) {}

    Expr<S> parse() {
        Expr<S> e = parse_expr();
        if (!cur_.eof()) cur_.fail("unexpected trailing input after expression");
        return e;
    }

private:
    Expr<S> parse_expr() {
        Expr<S> acc = parse_product();
        while (cur_.try_consume('+')) acc = Expr<S>::sum(acc, parse_product());
        return acc;
    }

    Expr<S> parse_product() {
        Expr<S> acc = parse_factor();
        while (true) {
            std::size_t at = cur_.pos();
            if (!cur_.try_consume('*')) break;
            if (!at_atom()) cur_.fail_from(at, "expected an operand after '*'");
            acc = Expr<S>::prod(acc, parse_factor());
        }
        return acc;
    }

    /// An atom with its postfix stars. A '*' followed by an atom is the
    /// binary product and is left for parse_product (backtrack one token).
    Expr<S> parse_factor() {
        Expr<S> e = parse_atom();
        while (true) {
            std::size_t at = cur_.pos();
            if (!cur_.try_consume('*')) break;
            if (at_atom()) {
                cur_.reset(at);
                break;
            }
            e = expand_star(e, at);
        }
        return e;
    }

    bool at_atom() {
        char c = cur_.peek();
        return c == '(' || c == '#' || cur_.at_digit() || cur_.at_ident();
    }

    Expr<S> parse_atom() {
        std::size_t at = cur_.pos();
        if (cur_.try_consume('(')) {
            Expr<S> e = parse_expr();
            cur_.expect(')', "to close the parenthesis");
            return e;
        }
        if (cur_.try_consume('#')) {
            return Expr<S>::constant(detail::parse_value<S>(cur_));
        }
        if (cur_.at_digit()) {
            std::string d = cur_.digits();
            if (d == "0") return Expr<S>::zero();
            if (d == "1") return Expr<S>::one();
            cur_.fail_from(at, "bare numbers other than 0 and 1 must be written as #" + d);
        }
        std::string name = cur_.ident();
        if (name == "mu") {
            if (!allow_mu_) cur_.fail_from(at, "fixed-point binders are not allowed here");
            std::size_t name_at = cur_.pos();
            std::string binder = cur_.ident();
            if (binder.find('~') != std::string::npos) {
                cur_.fail_from(name_at, "binder names may not contain '~'");
            }
            if (binder.size() == 1 && alphabet_.contains(binder[0])) {
                cur_.fail_from(name_at, "binder '" + binder + "' would shadow a letter");
            }
            cur_.expect('.', "between the binder and its body");
            Expr<S> body = parse_expr();
            if (!check_guarded(body)) {
                cur_.fail_from(at, "body of 'mu " + binder +
                                       "' is not guarded (it must be a sum of constants "
                                       "and letter-headed products)");
            }
            return Expr<S>::mu(binder, body);
        }
        if (name.size() == 1 && alphabet_.contains(name[0])) return Expr<S>::letter(name[0]);
        return Expr<S>::var(name);
    }

    /// t* becomes mu f . (1 + sum over letters a of a * (t_a * f)) with a
    /// fresh binder f; the derivatives t_a require t to be closed.
    Expr<S> expand_star(const Expr<S>& t, std::size_t at) {
        if (!allow_mu_) cur_.fail_from(at, "iteration is not allowed here");
        if (!is_closed(t)) {
            cur_.fail_from(at, "the operand of '*' (iteration) must be closed");
        }
        std::string binder = "star~" + std::to_string(++star_counter_);
        Expr<S> f = Expr<S>::var(binder);
        MuCache<S> cache;
        std::size_t n = alphabet_.size();
        Expr<S> acc = Expr<S>::prod(
            Expr<S>::letter(alphabet_.letter(n - 1)),
            Expr<S>::prod(cache.derivative(t, alphabet_.letter(n - 1)), f));
        for (std::size_t i = n - 1; i-- > 0;) {
            acc = Expr<S>::sum(
                Expr<S>::prod(Expr<S>::letter(alphabet_.letter(i)),
                              Expr<S>::prod(cache.derivative(t, alphabet_.letter(i)), f)),
                acc);
        }
        return Expr<S>::mu(binder, Expr<S>::sum(Expr<S>::one(), acc));
    }

    detail::Cursor cur_;
    const Alphabet& alphabet_;
    bool allow_mu_;
    int star_counter_ = 0;
};

template <Semiring S>
Expr<S> parse_term_text(std::string_view text, const Alphabet& alphabet, bool allow_mu,
                        detail::Locator locate = detail::line_locator(1, 1)) {
    ExprParser<S> parser(text, alphabet, allow_mu, std::move(locate));
    return parser.parse();
}

/// Polynomial syntax: `0` for the zero polynomial, otherwise `+`-separated
/// terms `[k *] monomial` where a monomial is `_` or space-separated
/// nonterminal names.
template <Semiring S>
Polynomial<S> parse_polynomial_text(std::string_view text,
                                    const std::function<std::optional<std::uint32_t>(
                                        const std::string&)>& resolve,
                                    detail::Locator locate = detail::line_locator(1, 1)) {
    detail::Cursor cur(text, std::move(locate));
    Polynomial<S> out;
    if (cur.peek() == '0') {
        cur.try_consume('0');
        if (!cur.eof()) cur.fail("unexpected input after the zero polynomial");
        return out;
    }
    while (true) {
        typename S::Value coeff = S::one();
        if (cur.at_digit()) {
            coeff = detail::parse_value<S>(cur);
            cur.expect('*', "between the coefficient and its monomial");
        }
        Monomial m;
        if (cur.try_consume('_')) {
            // empty word
        } else {
            if (!cur.at_ident()) cur.fail("expected a monomial ('_' or nonterminal names)");
            while (cur.at_ident()) {
                std::size_t at = cur.pos();
                std::string name = cur.ident();
                auto id = resolve(name);
                if (!id) cur.fail_from(at, "unknown nonterminal '" + name + "'");
                m.push_back(*id);
            }
        }
        out.add_term(std::move(m), std::move(coeff));
        if (!cur.try_consume('+')) break;
    }
    if (!cur.eof()) cur.fail("unexpected trailing input after polynomial");
    return out;
}

/// A parsed input file in one of the three representations.
template <Semiring S>
struct LoadedInput {
    enum class Form { Grammar, Terms, Mu };

    Form form;
    Alphabet alphabet;

    // Grammar form. The raw grammar is kept when the file used productions,
    // so strictness (GNF vs weak GNF) is the consuming command's choice.
    std::optional<CFGrammar> raw_grammar;
    std::shared_ptr<const GrammarSystem<S>> grammar;
    std::optional<Polynomial<S>> grammar_start;

    // Terms form.
    std::shared_ptr<const TermSystem<S>> terms;
    std::optional<Expr<S>> term_start;

    // Mu form.
    std::optional<Expr<S>> mu;

    static const char* form_name(Form f) {
        switch (f) {
            case Form::Grammar:
                return "grammar";
            case Form::Terms:
                return "terms";
            case Form::Mu:
                return "mu";
        }
        return "?";
    }

    State<S> start_state() const {
        switch (form) {
            case Form::Grammar: {
                if (!grammar) {
                    // weak-normal-form file: produce the precise rejection
                    (void)grammar_to_coalgebra<S>(*raw_grammar);
                    throw NotGnfError("grammar is not in Greibach normal form");
                }
                Polynomial<S> p = grammar_start
                                      ? *grammar_start
                                      : Polynomial<S>::monomial(Monomial{0});
                return State<S>::of_grammar(grammar, p);
            }
            case Form::Terms: {
                Expr<S> t = term_start ? *term_start : Expr<S>::var(terms->nonterminals[0]);
                return State<S>::of_term(terms, t);
            }
            case Form::Mu:
                return State<S>::of_mu(alphabet, *mu);
        }
        throw Error("unreachable input form");
    }
};

namespace detail {

struct SourceLine {
    std::size_t number;  // 1-based
    std::string text;
};

/// Splits the input into lines, dropping `//` comments and blank lines.
inline std::vector<SourceLine> significant_lines(const std::string& text) {
    std::vector<SourceLine> out;
    std::size_t line_no = 1;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        std::string line = text.substr(
            start, end == std::string::npos ? std::string::npos : end - start);
        if (auto c = line.find("//"); c != std::string::npos) line = line.substr(0, c);
        bool blank = true;
        for (char ch : line) {
            if (!std::isspace(static_cast<unsigned char>(ch))) {
                blank = false;
                break;
            }
        }
        if (!blank) out.push_back({line_no, line});
        if (end == std::string::npos) break;
        start = end + 1;
        ++line_no;
    }
    return out;
}

inline Alphabet parse_alphabet_line(const SourceLine& line) {
    Cursor cur(line.text, line_locator(line.number, 1));
    std::size_t at = cur.pos();
    std::string kw = cur.ident();
    if (kw != "alphabet") cur.fail_from(at, "expected an 'alphabet:' line");
    cur.expect(':', "after 'alphabet'");
    std::vector<char> letters;
    while (!cur.eof()) {
        std::size_t lat = cur.pos();
        std::string tok = cur.ident();
        if (tok.size() != 1) cur.fail_from(lat, "letters must be single characters");
        for (char c : letters) {
            if (c == tok[0]) cur.fail_from(lat, "duplicate letter '" + tok + "'");
        }
        letters.push_back(tok[0]);
    }
    if (letters.empty()) {
        fail_at(line_locator(line.number, 1), line.text.size(), "alphabet must be nonempty");
    }
    return Alphabet(letters);
}

/// Reads one declaration head of an equation line: `name.out`, `name.<letter>`
/// or `start`, followed by `=`. Returns (name, selector) with selector empty
/// for start lines.
struct EquationHead {
    std::string name;      // empty for "start"
    std::string selector;  // "out" or a single letter
    std::size_t rhs_col;   // 1-based column where the right-hand side begins
};

inline std::optional<EquationHead> parse_equation_head(const SourceLine& line) {
    Cursor cur(line.text, line_locator(line.number, 1));
    if (!cur.at_ident()) return std::nullopt;
    EquationHead head;
    std::size_t at = cur.pos();
    std::string name = cur.ident();
    if (name == "start") {
        cur.expect('=', "after 'start'");
        head.rhs_col = cur.pos() + 1;
        return head;
    }
    if (!cur.try_consume('.')) {
        cur.fail_from(at, "expected 'name.out', 'name.<letter>' or 'start' on an equation line");
    }
    head.name = name;
    head.selector = cur.ident();
    cur.expect('=', "after the equation head");
    head.rhs_col = cur.pos() + 1;
    return head;
}

}  // namespace detail

/// Parses a source file in any of the three formats, chosen by the header
/// line `#grammar`, `#terms` or `#mu`.
template <Semiring S>
LoadedInput<S> parse_input(const std::string& text) {
    using detail::Cursor;
    using detail::SourceLine;

    std::vector<SourceLine> lines = detail::significant_lines(text);
    if (lines.empty()) throw ParseError(1, 1, "empty input");

    std::string header = lines[0].text;
    while (!header.empty() && std::isspace(static_cast<unsigned char>(header.back()))) {
        header.pop_back();
    }
    std::size_t lead = 0;
    while (lead < header.size() && std::isspace(static_cast<unsigned char>(header[lead]))) ++lead;
    header = header.substr(lead);

    typename LoadedInput<S>::Form form;
    if (header == "#grammar") {
        form = LoadedInput<S>::Form::Grammar;
    } else if (header == "#terms") {
        form = LoadedInput<S>::Form::Terms;
    } else if (header == "#mu") {
        form = LoadedInput<S>::Form::Mu;
    } else {
        throw ParseError(lines[0].number, 1,
                         "expected a '#grammar', '#terms' or '#mu' header line");
    }

    if (lines.size() < 2) {
        throw ParseError(lines[0].number, 1, "missing 'alphabet:' line after the header");
    }
    Alphabet alphabet = detail::parse_alphabet_line(lines[1]);
    std::vector<SourceLine> body(lines.begin() + 2, lines.end());

    LoadedInput<S> out{form, alphabet, {}, {}, {}, {}, {}, {}};

    auto reject_letter_name = [&](const std::string& name, const SourceLine& line) {
        if (name.size() == 1 && alphabet.contains(name[0])) {
            throw ParseError(line.number, 1,
                             "nonterminal '" + name + "' collides with an alphabet letter");
        }
    };

    switch (form) {
        case LoadedInput<S>::Form::Grammar: {
            bool has_productions = false;
            bool has_equations = false;
            for (const auto& line : body) {
                if (line.text.find("->") != std::string::npos) {
                    has_productions = true;
                } else {
                    has_equations = true;
                }
            }
            auto head_of = [](const SourceLine& line) {
                Cursor cur(line.text, detail::line_locator(line.number, 1));
                return cur.ident();
            };
            if (has_productions && has_equations) {
                // `start =` lines are fine next to productions; anything else is
                // an ambiguous mix of the two sub-formats.
                for (const auto& line : body) {
                    if (line.text.find("->") == std::string::npos && head_of(line) != "start") {
                        throw ParseError(line.number, 1,
                                         "cannot mix '->' productions with equation lines");
                    }
                }
            }

            if (has_productions) {
                CFGrammar g{alphabet, {}, {}};
                std::vector<std::pair<SourceLine, std::size_t>> prod_lines;  // line, lhs id
                for (const auto& line : body) {
                    if (line.text.find("->") == std::string::npos) continue;  // start line
                    Cursor cur(line.text, detail::line_locator(line.number, 1));
                    std::size_t at = cur.pos();
                    std::string name = cur.ident();
                    reject_letter_name(name, line);
                    if (g.index_of(name)) {
                        cur.fail_from(at, "duplicate productions for nonterminal '" + name +
                                              "' (write alternatives with '|')");
                    }
                    g.nonterminals.push_back(name);
                    g.productions.emplace_back();
                    prod_lines.emplace_back(line, g.nonterminals.size() - 1);
                }
                if (g.nonterminals.empty()) {
                    throw ParseError(body.empty() ? lines[1].number : body[0].number, 1,
                                     "grammar has no productions");
                }
                for (const auto& [line, id] : prod_lines) {
                    Cursor cur(line.text, detail::line_locator(line.number, 1));
                    cur.ident();
                    cur.expect('-', "in '->'");
                    cur.expect('>', "in '->'");
                    if (cur.eof()) continue;  // declared with no productions
                    while (true) {
                        MixedWord bodyw;
                        if (cur.try_consume('_')) {
                            if (cur.at_ident()) cur.fail("'_' must stand alone as a body");
                        } else {
                            if (!cur.at_ident()) cur.fail("expected a production body");
                            while (cur.at_ident()) {
                                std::size_t at = cur.pos();
                                std::string sym = cur.ident();
                                if (sym.size() == 1 && alphabet.contains(sym[0])) {
                                    bodyw.push_back(letter_sym(sym[0]));
                                } else if (auto nt = g.index_of(sym)) {
                                    bodyw.push_back(nt_sym(*nt));
                                } else {
                                    cur.fail_from(at, "unknown symbol '" + sym + "'");
                                }
                            }
                        }
                        g.productions[id].insert(std::move(bodyw));
                        if (!cur.try_consume('|')) break;
                    }
                    if (!cur.eof()) cur.fail("unexpected trailing input after productions");
                }
                out.raw_grammar = g;
                // Weak-normal-form files stay loadable (the powerset checks
                // accept them); the automaton view exists only when every
                // body is in strict normal form.
                bool strict = true;
                for (const auto& prods : g.productions) {
                    for (const auto& b : prods) strict = strict && body_is_gnf(b);
                }
                if (strict) {
                    out.grammar = std::make_shared<GrammarSystem<S>>(grammar_to_coalgebra<S>(g));
                }
            } else {
                // Equation form: collect nonterminals in first-appearance order.
                std::vector<std::string> names;
                for (const auto& line : body) {
                    auto head = detail::parse_equation_head(line);
                    if (!head || head->name.empty()) continue;
                    reject_letter_name(head->name, line);
                    bool known = false;
                    for (const auto& n : names) known = known || n == head->name;
                    if (!known) names.push_back(head->name);
                }
                if (names.empty()) {
                    throw ParseError(body.empty() ? lines[1].number : body[0].number, 1,
                                     "grammar system defines no nonterminals");
                }
                GrammarSystem<S> sys{alphabet, names, {}, {}};
                sys.outputs.assign(names.size(), S::zero());
                sys.derivatives.assign(names.size(),
                                       std::vector<Polynomial<S>>(alphabet.size()));
                auto resolve = [&sys](const std::string& n) { return sys.index_of(n); };
                std::set<std::pair<std::string, std::string>> assigned;
                for (const auto& line : body) {
                    auto head = detail::parse_equation_head(line);
                    if (!head) {
                        throw ParseError(line.number, 1, "expected an equation line");
                    }
                    std::string_view rhs = std::string_view(line.text).substr(head->rhs_col - 1);
                    auto locate = detail::line_locator(line.number, head->rhs_col);
                    if (head->name.empty()) {
                        if (out.grammar_start) {
                            throw ParseError(line.number, 1, "duplicate 'start' line");
                        }
                        out.grammar_start = parse_polynomial_text<S>(rhs, resolve, locate);
                        continue;
                    }
                    if (!assigned.emplace(head->name, head->selector).second) {
                        throw ParseError(line.number, 1,
                                         "duplicate assignment to " + head->name + "." +
                                             head->selector);
                    }
                    std::uint32_t id = *sys.index_of(head->name);
                    if (head->selector == "out") {
                        Cursor cur(rhs, locate);
                        sys.outputs[id] = detail::parse_value<S>(cur);
                        if (!cur.eof()) cur.fail("unexpected trailing input after the output");
                    } else if (head->selector.size() == 1 && alphabet.contains(head->selector[0])) {
                        sys.derivatives[id][alphabet.require(head->selector[0])] =
                            parse_polynomial_text<S>(rhs, resolve, locate);
                    } else {
                        throw ParseError(line.number, 1,
                                         "unknown selector '" + head->selector +
                                             "' (use 'out' or a letter)");
                    }
                }
                sys.validate();
                out.grammar = std::make_shared<GrammarSystem<S>>(std::move(sys));
            }

            // A production-form file may carry a start polynomial too.
            if (out.raw_grammar) {
                for (const auto& line : body) {
                    if (line.text.find("->") != std::string::npos) continue;
                    auto head = detail::parse_equation_head(line);
                    if (!head || !head->name.empty()) {
                        throw ParseError(line.number, 1, "expected a 'start =' line");
                    }
                    if (out.grammar_start) {
                        throw ParseError(line.number, 1, "duplicate 'start' line");
                    }
                    auto resolve = [&out](const std::string& n) {
                        return out.raw_grammar->index_of(n);
                    };
                    out.grammar_start = parse_polynomial_text<S>(
                        std::string_view(line.text).substr(head->rhs_col - 1), resolve,
                        detail::line_locator(line.number, head->rhs_col));
                }
            }
            if (out.grammar_start && out.grammar) {
                out.grammar->require_poly(*out.grammar_start);
            }
            return out;
        }

        case LoadedInput<S>::Form::Terms: {
            std::vector<std::string> names;
            for (const auto& line : body) {
                auto head = detail::parse_equation_head(line);
                if (!head || head->name.empty()) continue;
                reject_letter_name(head->name, line);
                bool known = false;
                for (const auto& n : names) known = known || n == head->name;
                if (!known) names.push_back(head->name);
            }
            if (names.empty()) {
                throw ParseError(body.empty() ? lines[1].number : body[0].number, 1,
                                 "term system defines no nonterminals");
            }
            TermSystem<S> sys{alphabet, names, {}, {}};
            sys.outputs.assign(names.size(), S::zero());
            sys.derivatives.assign(names.size(),
                                   std::vector<Expr<S>>(alphabet.size(), Expr<S>::zero()));
            std::set<std::pair<std::string, std::string>> assigned;
            for (const auto& line : body) {
                auto head = detail::parse_equation_head(line);
                if (!head) throw ParseError(line.number, 1, "expected an equation line");
                std::string_view rhs = std::string_view(line.text).substr(head->rhs_col - 1);
                auto locate = detail::line_locator(line.number, head->rhs_col);
                if (head->name.empty()) {
                    if (out.term_start) throw ParseError(line.number, 1, "duplicate 'start' line");
                    out.term_start = parse_term_text<S>(rhs, alphabet, false, locate);
                    continue;
                }
                if (!assigned.emplace(head->name, head->selector).second) {
                    throw ParseError(line.number, 1, "duplicate assignment to " + head->name +
                                                         "." + head->selector);
                }
                std::uint32_t id = *sys.index_of(head->name);
                if (head->selector == "out") {
                    Cursor cur(rhs, locate);
                    sys.outputs[id] = detail::parse_value<S>(cur);
                    if (!cur.eof()) cur.fail("unexpected trailing input after the output");
                } else if (head->selector.size() == 1 && alphabet.contains(head->selector[0])) {
                    sys.derivatives[id][alphabet.require(head->selector[0])] =
                        parse_term_text<S>(rhs, alphabet, false, locate);
                } else {
                    throw ParseError(line.number, 1, "unknown selector '" + head->selector +
                                                         "' (use 'out' or a letter)");
                }
            }
            sys.validate();
            out.terms = std::make_shared<TermSystem<S>>(std::move(sys));
            if (out.term_start) out.terms->require_term(*out.term_start);
            return out;
        }

        case LoadedInput<S>::Form::Mu: {
            if (body.empty()) {
                throw ParseError(lines[1].number, 1, "missing mu-expression");
            }
            // Join the remaining lines; a segment table maps positions back.
            std::string joined;
            std::vector<std::pair<std::size_t, std::size_t>> segments;  // (start, line number)
            for (const auto& line : body) {
                if (!joined.empty()) joined += ' ';
                segments.emplace_back(joined.size(), line.number);
                joined += line.text;
            }
            auto locate = [segments](std::size_t pos) {
                std::size_t line = segments.front().second;
                std::size_t start = 0;
                for (const auto& [s, n] : segments) {
                    if (s <= pos) {
                        line = n;
                        start = s;
                    }
                }
                return std::make_pair(line, pos - start + 1);
            };
            out.mu = parse_term_text<S>(joined, alphabet, true, locate);
            auto fv = free_variables(*out.mu);
            if (!fv.empty()) {
                std::string names;
                for (const auto& v : fv) {
                    if (!names.empty()) names += ", ";
                    names += v;
                }
                throw ParseError(body.front().number, 1,
                                 "mu-expression has free variables: " + names);
            }
            return out;
        }
    }
    throw Error("unreachable input form");
}

// ---------------------------------------------------------------------------
// Canonical printers. Files produced here parse back to equal objects, and
// re-printing a parsed canonical file reproduces it byte for byte.
// ---------------------------------------------------------------------------

inline std::string print_alphabet_line(const Alphabet& alphabet) {
    std::string out = "alphabet:";
    for (char c : alphabet.letters()) {
        out += ' ';
        out += c;
    }
    out += '\n';
    return out;
}

/// Production order for printing: letter-headed bodies by alphabet index of
/// the head, then length, then symbols (nonterminals before letters); the
/// empty body last.
inline std::string print_grammar(const CFGrammar& g) {
    std::string out = "#grammar\n" + print_alphabet_line(g.alphabet);
    auto sym_rank = [&g](const MixedSym& s) {
        if (sym_is_letter(s)) {
            return std::make_pair(1, static_cast<std::size_t>(g.alphabet.require(sym_letter(s))));
        }
        return std::make_pair(0, static_cast<std::size_t>(sym_nt(s)));
    };
    auto body_less = [&](const MixedWord& a, const MixedWord& b) {
        std::size_t ha = g.alphabet.require(sym_letter(a[0]));
        std::size_t hb = g.alphabet.require(sym_letter(b[0]));
        if (ha != hb) return ha < hb;
        if (a.size() != b.size()) return a.size() < b.size();
        for (std::size_t i = 1; i < a.size(); ++i) {
            auto ra = sym_rank(a[i]);
            auto rb = sym_rank(b[i]);
            if (ra != rb) return ra < rb;
        }
        return false;
    };
    for (std::uint32_t x = 0; x < g.nonterminals.size(); ++x) {
        std::vector<MixedWord> bodies;
        bool has_empty = false;
        for (const auto& b : g.productions[x]) {
            if (b.empty()) {
                has_empty = true;
            } else {
                bodies.push_back(b);
            }
        }
        std::sort(bodies.begin(), bodies.end(), body_less);
        out += g.nonterminals[x];
        out += " ->";
        bool first = true;
        for (const auto& b : bodies) {
            out += first ? " " : " | ";
            first = false;
            out += describe_body(g, b);
        }
        if (has_empty) {
            out += first ? " _" : " | _";
        }
        // a nonterminal without productions prints as a bare "x ->"
        out += '\n';
    }
    return out;
}

/// Equation form: one `.out` line per nonterminal with nonzero output and one
/// `.letter` line per nonzero derivative. A nonterminal whose lines are all
/// zero still gets a `.out = 0` line so that its declaration survives a
/// round trip.
template <Semiring S>
std::string print_grammar_system(const GrammarSystem<S>& sys,
                                 const std::optional<Polynomial<S>>& start = std::nullopt) {
    std::string out = "#grammar\n" + print_alphabet_line(sys.alphabet);
    for (std::uint32_t x = 0; x < sys.nonterminals.size(); ++x) {
        bool emitted = false;
        if (!is_zero<S>(sys.outputs[x])) {
            out += sys.nonterminals[x] + ".out = " + S::to_string(sys.outputs[x]) + "\n";
            emitted = true;
        }
        for (std::size_t a = 0; a < sys.alphabet.size(); ++a) {
            const auto& p = sys.derivatives[x][a];
            if (p.is_zero_poly()) continue;
            out += sys.nonterminals[x];
            out += '.';
            out += sys.alphabet.letter(a);
            out += " = " + to_string(p, sys.nonterminals) + "\n";
            emitted = true;
        }
        if (!emitted) out += sys.nonterminals[x] + ".out = 0\n";
    }
    if (start) out += "start = " + to_string(*start, sys.nonterminals) + "\n";
    return out;
}

template <Semiring S>
std::string print_term_system(const TermSystem<S>& sys,
                              const std::optional<Expr<S>>& start = std::nullopt) {
    std::string out = "#terms\n" + print_alphabet_line(sys.alphabet);
    for (std::uint32_t x = 0; x < sys.nonterminals.size(); ++x) {
        bool emitted = false;
        if (!is_zero<S>(sys.outputs[x])) {
            out += sys.nonterminals[x] + ".out = " + S::to_string(sys.outputs[x]) + "\n";
            emitted = true;
        }
        for (std::size_t a = 0; a < sys.alphabet.size(); ++a) {
            const auto& t = sys.derivatives[x][a];
            if (t.is_zero_const()) continue;
            out += sys.nonterminals[x];
            out += '.';
            out += sys.alphabet.letter(a);
            out += " = " + to_string(t) + "\n";
            emitted = true;
        }
        if (!emitted) out += sys.nonterminals[x] + ".out = 0\n";
    }
    if (start) out += "start = " + to_string(*start) + "\n";
    return out;
}

template <Semiring S>
std::string print_mu_file(const Alphabet& alphabet, const Expr<S>& e) {
    return "#mu\n" + print_alphabet_line(alphabet) + to_string(e) + "\n";
}

/// Reprints a loaded input in its own canonical form.
template <Semiring S>
std::string print_input(const LoadedInput<S>& in) {
    switch (in.form) {
        case LoadedInput<S>::Form::Grammar:
            if (in.raw_grammar) {
                std::string out = print_grammar(*in.raw_grammar);
                if (in.grammar_start) {
                    out += "start = " +
                           to_string(*in.grammar_start, in.raw_grammar->nonterminals) + "\n";
                }
                return out;
            }
            return print_grammar_system(*in.grammar, in.grammar_start);
        case LoadedInput<S>::Form::Terms:
            return print_term_system(*in.terms, in.term_start);
        case LoadedInput<S>::Form::Mu:
            return print_mu_file(in.alphabet, *in.mu);
    }
    throw Error("unreachable input form");
}

}  // namespace cfder

#include "cfder/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cfder/text.hpp"

namespace cfder {

namespace {

constexpr const char* kAnbnText =
    "#grammar\n"
    "alphabet: a b\n"
    "x -> a x y | _\n"
    "y -> b\n";

constexpr const char* kRunningGrammarText =
    "#grammar\n"
    "alphabet: a b\n"
    "x -> a x z | b y z | _\n"
    "y -> b y z | _\n"
    "z -> a\n";

constexpr const char* kCatalanText =
    "#grammar\n"
    "alphabet: a\n"
    "x.out = 1\n"
    "x.a = x x\n";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <Semiring S>
LoadedInput<S> load_input(const std::string& path) {
    std::string text = read_file(path);
    try {
        return parse_input<S>(text);
    } catch (const ParseError& e) {
        throw Error(path + ":" + e.what());
    }
}

std::string decode_word(const std::string& w) { return w == "_" ? std::string() : w; }
std::string show_word(const std::string& w) { return w.empty() ? std::string("_") : w; }

template <Semiring S>
State<S> make_state(const LoadedInput<S>& in, const std::optional<std::string>& start_text) {
    using Form = typename LoadedInput<S>::Form;
    if (!start_text) return in.start_state();
    switch (in.form) {
        case Form::Grammar: {
            if (!in.grammar) return in.start_state();  // throws the normal-form rejection
            auto resolve = [&in](const std::string& n) { return in.grammar->index_of(n); };
            Polynomial<S> p = parse_polynomial_text<S>(*start_text, resolve);
            return State<S>::of_grammar(in.grammar, std::move(p));
        }
        case Form::Terms: {
            Expr<S> t = parse_term_text<S>(*start_text, in.alphabet, false);
            return State<S>::of_term(in.terms, std::move(t));
        }
        case Form::Mu:
            throw Error("a mu-expression input already denotes a single state; "
                        "--start does not apply");
    }
    throw Error("unreachable input form");
}

template <Semiring S>
bool state_is_dead(const State<S>& s) {
    State<S> n = s.normalized();
    return n.summands().empty();
}

/// Words of length <= maxlen with nonzero coefficient at the given state, in
/// length-then-alphabet order.
template <Semiring S>
std::vector<std::pair<std::string, typename S::Value>> state_series(const State<S>& start,
                                                                    int maxlen) {
    std::vector<std::pair<std::string, typename S::Value>> out;
    std::vector<std::pair<std::string, State<S>>> level{{std::string(), start}};
    for (int len = 0; len <= maxlen; ++len) {
        std::vector<std::pair<std::string, State<S>>> next;
        for (auto& [w, s] : level) {
            auto o = s.output();
            if (!is_zero<S>(o)) out.emplace_back(w, o);
            if (len == maxlen) continue;
            for (char a : s.alphabet().letters()) {
                State<S> d = s.derivative(a);
                if (state_is_dead(d)) continue;
                next.emplace_back(w + a, std::move(d));
            }
        }
        level = std::move(next);
    }
    return out;
}

template <Semiring S>
TermSystem<S> grammar_to_term_system(const GrammarSystem<S>& g) {
    TermSystem<S> sys{g.alphabet, g.nonterminals, g.outputs, {}};
    auto atom = [&g](std::uint32_t id) { return Expr<S>::var(g.nonterminals[id]); };
    sys.derivatives.reserve(g.nonterminals.size());
    for (std::uint32_t x = 0; x < g.nonterminals.size(); ++x) {
        std::vector<Expr<S>> row;
        row.reserve(g.alphabet.size());
        for (std::size_t a = 0; a < g.alphabet.size(); ++a) {
            row.push_back(poly_to_term<S>(g.derivatives[x][a], atom));
        }
        sys.derivatives.push_back(std::move(row));
    }
    sys.validate();
    return sys;
}

/// The (term system, start term) view of any loaded input; the bridge used by
/// the translate command.
template <Semiring S>
std::pair<TermSystem<S>, std::optional<Expr<S>>> as_term_system(const LoadedInput<S>& in) {
    using Form = typename LoadedInput<S>::Form;
    switch (in.form) {
        case Form::Grammar: {
            if (!in.grammar) {
                (void)grammar_to_coalgebra<S>(*in.raw_grammar);
                throw Error("grammar is not in Greibach normal form");
            }
            TermSystem<S> sys = grammar_to_term_system(*in.grammar);
            std::optional<Expr<S>> start;
            if (in.grammar_start) {
                auto atom = [&in](std::uint32_t id) {
                    return Expr<S>::var(in.grammar->nonterminals[id]);
                };
                start = poly_to_term<S>(*in.grammar_start, atom);
            }
            return {std::move(sys), std::move(start)};
        }
        case Form::Terms:
            return {*in.terms, in.term_start};
        case Form::Mu: {
            auto [sys, start] = deconstruct(alpha_unique(*in.mu), in.alphabet);
            return {std::move(sys), std::move(start)};
        }
    }
    throw Error("unreachable input form");
}

template <Semiring S>
std::string translate_input(const LoadedInput<S>& in, const std::string& to) {
    using Form = typename LoadedInput<S>::Form;
    Form target;
    if (to == "grammar") {
        target = Form::Grammar;
    } else if (to == "terms") {
        target = Form::Terms;
    } else if (to == "mu") {
        target = Form::Mu;
    } else {
        throw Error("unknown target representation '" + to + "'");
    }

    if (target == in.form) return print_input(in);

    if (target == Form::Terms) {
        auto [sys, start] = as_term_system(in);
        if (in.form == Form::Mu) {
            // deconstruction always names its start term
            return print_term_system(sys, start);
        }
        return print_term_system(sys, start);
    }

    if (target == Form::Grammar) {
        auto [sys, start] = as_term_system(in);
        GrammarSystem<S> induced = induced_grammar_system(sys);
        ExtendedSymbols ext = extended_symbols(sys);
        std::optional<Polynomial<S>> poly_start;
        if (start) {
            poly_start = translate_f(ext, *start);
        } else if (in.form == Form::Mu) {
            throw Error("internal error: mu deconstruction lost its start term");
        }
        return print_grammar_system(induced, poly_start);
    }

    // target == Form::Mu
    auto [sys, start] = as_term_system(in);
    if (sys.nonterminals.empty() && !start) {
        throw Error("cannot pick a start nonterminal in an empty system");
    }
    Expr<S> t = start ? *start : Expr<S>::var(sys.nonterminals[0]);
    Expr<S> closed = close_term(t, canonical_assignment(sys));
    return print_mu_file(sys.alphabet, closed);
}

struct CommonOptions {
    std::string input;
    std::string semiring = "bool";
    std::string start;
    bool has_start = false;
};

template <Semiring S>
int cmd_derive(const CommonOptions& opt, const std::string& word, std::ostream& out) {
    LoadedInput<S> in = load_input<S>(opt.input);
    State<S> s = make_state(in, opt.has_start ? std::optional<std::string>(opt.start)
                                              : std::nullopt);
    for (char a : decode_word(word)) s = s.derivative(a);
    out << s.describe() << "\n";
    return 0;
}

template <Semiring S>
int cmd_member(const CommonOptions& opt, const std::string& word, std::ostream& out) {
    LoadedInput<S> in = load_input<S>(opt.input);
    State<S> s = make_state(in, opt.has_start ? std::optional<std::string>(opt.start)
                                              : std::nullopt);
    auto k = s.coefficient(decode_word(word));
    out << S::to_string(k) << "\n";
    return is_zero<S>(k) ? 1 : 0;
}

template <Semiring S>
int cmd_series(const CommonOptions& opt, int maxlen, std::ostream& out) {
    LoadedInput<S> in = load_input<S>(opt.input);
    State<S> s = make_state(in, opt.has_start ? std::optional<std::string>(opt.start)
                                              : std::nullopt);
    for (const auto& [w, k] : state_series(s, maxlen)) {
        out << show_word(w) << " " << S::to_string(k) << "\n";
    }
    return 0;
}

template <Semiring S>
int cmd_translate(const CommonOptions& opt, const std::string& from, const std::string& to,
                  std::ostream& out) {
    LoadedInput<S> in = load_input<S>(opt.input);
    if (opt.has_start) {
        State<S> ignored = make_state(in, std::optional<std::string>(opt.start));
        (void)ignored;  // validates the start text against the input
        using Form = typename LoadedInput<S>::Form;
        if (in.form == Form::Grammar) {
            auto resolve = [&in](const std::string& n) { return in.grammar->index_of(n); };
            in.grammar_start = parse_polynomial_text<S>(opt.start, resolve);
        } else if (in.form == Form::Terms) {
            in.term_start = parse_term_text<S>(opt.start, in.alphabet, false);
        }
    }
    if (!from.empty() && from != LoadedInput<S>::form_name(in.form)) {
        throw Error("input is a " + std::string(LoadedInput<S>::form_name(in.form)) +
                    " file, not " + from);
    }
    out << translate_input(in, to);
    return 0;
}

template <Semiring S>
int cmd_equiv(const std::string& input1, const std::string& input2, const std::string& mode,
              int bound, const std::string& semiring, std::ostream& out) {
    (void)semiring;
    LoadedInput<S> in1 = load_input<S>(input1);
    LoadedInput<S> in2 = load_input<S>(input2);
    State<S> s1 = in1.start_state();
    State<S> s2 = in2.start_state();
    EquivResult<S> r = mode == "bisim" ? bisim_upto(s1, s2, bound) : word_equiv(s1, s2, bound);
    switch (r.kind) {
        case EquivResult<S>::Kind::Equivalent:
            if (mode == "bisim") {
                out << "equivalent (bisimulation up to sum with " << r.relation.size()
                    << " pairs)\n";
            } else {
                out << "equivalent up to length " << r.checked_to << "\n";
            }
            return 0;
        case EquivResult<S>::Kind::Inequivalent:
            out << "inequivalent, witness: " << show_word(r.witness) << "\n";
            return 1;
        case EquivResult<S>::Kind::Unknown:
            out << "unknown: " << r.note << "\n";
            return 2;
    }
    return 3;
}

int cmd_check_semiring(const std::string& input, std::uint64_t seed, int samples,
                       std::ostream& out) {
    WeakGnfSystem sys = [&] {
        if (input.empty()) {
            LoadedInput<BoolSemiring> in = parse_input<BoolSemiring>(kRunningGrammarText);
            return weak_gnf_from_grammar(*in.raw_grammar);
        }
        LoadedInput<BoolSemiring> in = load_input<BoolSemiring>(input);
        if (in.form != LoadedInput<BoolSemiring>::Form::Grammar) {
            throw Error("check-semiring expects a grammar input");
        }
        return in.raw_grammar ? weak_gnf_from_grammar(*in.raw_grammar)
                              : weak_gnf_from_system(*in.grammar);
    }();
    SemiringCheckReport report = check_semiring_agreement(sys, seed, samples);
    out << "semiring law checks: " << report.law_checks << "\n";
    out << "morphism agreement checks: " << report.agreement_checks << "\n";
    for (const auto& v : report.violations) out << "violation: " << v << "\n";
    out << (report.ok() ? "OK" : "FAILED") << "\n";
    return report.ok() ? 0 : 1;
}

int cmd_demo(const std::string& name, int n, int maxlen, std::ostream& out) {
    if (name == "catalan") {
        LoadedInput<NatSemiring> in = parse_input<NatSemiring>(kCatalanText);
        Polynomial<NatSemiring> p = Polynomial<NatSemiring>::monomial(Monomial{0});
        for (int i = 0; i < n; ++i) {
            if (i > 0) {
                p = poly_derivative(*in.grammar, p, 'a');
                out << " ";
            }
            out << NatSemiring::to_string(poly_output(*in.grammar, p));
        }
        out << "\n";
        return 0;
    }
    const char* text = demo_input_text(name);
    if (!text) throw Error("unknown demo '" + name + "' (try anbn, anbmam+n, catalan)");
    LoadedInput<BoolSemiring> in = parse_input<BoolSemiring>(text);
    for (const auto& [w, k] : state_series(in.start_state(), maxlen)) {
        out << show_word(w) << " " << BoolSemiring::to_string(k) << "\n";
    }
    return 0;
}

template <class F>
int with_semiring(const std::string& semiring, F&& f) {
    if (semiring == "bool") return f(BoolSemiring{});
    if (semiring == "nat") return f(NatSemiring{});
    throw Error("unknown semiring '" + semiring + "' (use bool or nat)");
}

}  // namespace

const char* demo_input_text(const std::string& name) {
    if (name == "anbn") return kAnbnText;
    if (name == "anbmam+n" || name == "anbman") return kRunningGrammarText;
    if (name == "catalan") return kCatalanText;
    return nullptr;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"derivative toolkit for context-free languages and power series"};
    app.require_subcommand(1);

    CommonOptions opt;
    std::string word;
    int maxlen = 8;
    std::string from;
    std::string to;
    std::string input1, input2;
    std::string mode = "word";
    int bound = -1;
    std::string check_input;
    std::uint64_t seed = 1;
    int samples = 1000;
    std::string demo_name;
    int demo_n = 9;
    int demo_maxlen = 12;

    auto add_common = [&opt](CLI::App* cmd, bool with_start = true) {
        cmd->add_option("--input", opt.input, "input file (#grammar, #terms or #mu)")->required();
        cmd->add_option("--semiring", opt.semiring, "coefficient semiring (bool or nat)")
            ->check(CLI::IsMember({"bool", "nat"}));
        if (with_start) {
            cmd->add_option("--start", opt.start, "start state (polynomial or term)");
        }
    };

    CLI::App* derive = app.add_subcommand("derive", "word derivative of the start state");
    add_common(derive);
    derive->add_option("--word", word, "input word ('_' for the empty word)")->required();

    CLI::App* member = app.add_subcommand("member", "coefficient of a word (membership)");
    add_common(member);
    member->add_option("--word", word, "input word ('_' for the empty word)")->required();

    CLI::App* series = app.add_subcommand("series", "all nonzero coefficients up to a length");
    add_common(series);
    series->add_option("--maxlen", maxlen, "maximum word length")->check(CLI::NonNegativeNumber);

    CLI::App* translate = app.add_subcommand("translate", "convert between representations");
    add_common(translate);
    translate->add_option("--from", from, "expected input representation")
        ->check(CLI::IsMember({"grammar", "terms", "mu"}));
    translate->add_option("--to", to, "target representation")
        ->required()
        ->check(CLI::IsMember({"grammar", "terms", "mu"}));

    CLI::App* equiv = app.add_subcommand("equiv", "bounded equivalence of two inputs");
    equiv->add_option("input1", input1, "first input file")->required();
    equiv->add_option("input2", input2, "second input file")->required();
    equiv->add_option("--mode", mode, "word (bounded search) or bisim (up-to engine)")
        ->check(CLI::IsMember({"word", "bisim"}));
    equiv->add_option("--bound", bound, "word length bound or node budget");
    equiv->add_option("--semiring", opt.semiring, "coefficient semiring (bool or nat)")
        ->check(CLI::IsMember({"bool", "nat"}));

    CLI::App* checks = app.add_subcommand("check-semiring",
                                          "idempotent-semiring laws and morphism agreement");
    checks->add_option("--input", check_input, "grammar file (defaults to a built-in grammar)");
    checks->add_option("--seed", seed, "random seed");
    checks->add_option("--samples", samples, "number of random samples")
        ->check(CLI::PositiveNumber);

    CLI::App* demo = app.add_subcommand("demo", "built-in examples");
    demo->add_option("name", demo_name, "anbn, anbmam+n or catalan")->required();
    demo->add_option("--n", demo_n, "how many coefficients (catalan)")
        ->check(CLI::PositiveNumber);
    demo->add_option("--maxlen", demo_maxlen, "maximum word length (language demos)")
        ->check(CLI::NonNegativeNumber);

    std::vector<std::string> argv_storage;
    argv_storage.push_back("cfder");
    for (const auto& a : args) argv_storage.push_back(a);
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 3;
    }

    opt.has_start = derive->count("--start") > 0 || member->count("--start") > 0 ||
                    series->count("--start") > 0 || translate->count("--start") > 0;

    try {
        if (derive->parsed()) {
            return with_semiring(opt.semiring, [&](auto s) {
                return cmd_derive<decltype(s)>(opt, word, out);
            });
        }
        if (member->parsed()) {
            return with_semiring(opt.semiring, [&](auto s) {
                return cmd_member<decltype(s)>(opt, word, out);
            });
        }
        if (series->parsed()) {
            return with_semiring(opt.semiring, [&](auto s) {
                return cmd_series<decltype(s)>(opt, maxlen, out);
            });
        }
        if (translate->parsed()) {
            return with_semiring(opt.semiring, [&](auto s) {
                return cmd_translate<decltype(s)>(opt, from, to, out);
            });
        }
        if (equiv->parsed()) {
            if (bound < 0) bound = mode == "bisim" ? 10000 : 8;
            return with_semiring(opt.semiring, [&](auto s) {
                return cmd_equiv<decltype(s)>(input1, input2, mode, bound, opt.semiring, out);
            });
        }
        if (checks->parsed()) return cmd_check_semiring(check_input, seed, samples, out);
        if (demo->parsed()) return cmd_demo(demo_name, demo_n, demo_maxlen, out);
        err << "error: no command given\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace cfder

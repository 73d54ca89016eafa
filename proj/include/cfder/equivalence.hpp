#pragma once

#include <algorithm>
#include <deque>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cfder/grammar.hpp"
#include "cfder/muexpr.hpp"
#include "cfder/term_system.hpp"

namespace cfder {

namespace detail {

struct NormalizeOverflow : Error {
    using Error::Error;
};

/// Rewrites an expression to a sum of products of atoms using the unit,
/// annihilation, associativity, commutativity and distributivity laws, each
/// oriented left to right. Binders are atoms: nothing is rewritten under a
/// binder. Products are left-nested, summands sorted structurally,
/// left-nested. Every step preserves behavioural equivalence.
///
/// The summand budget also bounds the sum-spine depth of anything this
/// produces; the recursive walkers elsewhere rely on that staying modest.
template <Semiring S>
Expr<S> normalize_expr(const Expr<S>& e, std::size_t max_summands = 512) {
    using Kind = typename Expr<S>::Kind;
    using Product = std::vector<Expr<S>>;  // atom factors; empty product is the unit

    struct Rec {
        std::size_t cap;
        // per-node memo: derivative chains share subterms heavily
        std::map<const void*, std::vector<Product>> memo;
        const std::vector<Product>& run(const Expr<S>& x) {
            auto it = memo.find(x.id());
            if (it != memo.end()) return it->second;
            std::vector<Product> out;
            switch (x.kind()) {
                case Kind::Constant:
                    if (is_one<S>(x.value())) {
                        out.push_back(Product{});
                    } else if (!is_zero<S>(x.value())) {
                        out.push_back(Product{x});
                    }
                    break;
                case Kind::Letter:
                case Kind::Var:
                case Kind::Mu:
                    out.push_back(Product{x});
                    break;
                case Kind::Sum: {
                    out = run(x.left());
                    const std::vector<Product>& r = run(x.right());
                    out.insert(out.end(), r.begin(), r.end());
                    check(out.size());
                    break;
                }
                case Kind::Prod: {
                    const std::vector<Product>& l = run(x.left());
                    const std::vector<Product>& r = run(x.right());
                    check(l.size() * r.size());
                    out.reserve(l.size() * r.size());
                    for (const Product& p : l) {
                        for (const Product& q : r) {
                            Product pq = p;
                            pq.insert(pq.end(), q.begin(), q.end());
                            out.push_back(std::move(pq));
                        }
                    }
                    break;
                }
            }
            return memo.emplace(x.id(), std::move(out)).first->second;
        }
        void check(std::size_t n) const {
            if (n > cap) throw NormalizeOverflow("normal form exceeds summand budget");
        }
    } rec{max_summands, {}};

    std::vector<Product> summands = rec.run(e);
    auto product_less = [](const Product& a, const Product& b) {
        std::size_t n = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < n; ++i) {
            int c = Expr<S>::compare(a[i], b[i]);
            if (c != 0) return c < 0;
        }
        return a.size() < b.size();
    };
    std::sort(summands.begin(), summands.end(), product_less);

    auto rebuild_product = [](const Product& p) {
        if (p.empty()) return Expr<S>::one();
        Expr<S> acc = p[0];
        for (std::size_t i = 1; i < p.size(); ++i) acc = Expr<S>::prod(acc, p[i]);
        return acc;
    };
    if (summands.empty()) return Expr<S>::zero();
    Expr<S> acc = rebuild_product(summands[0]);
    for (std::size_t i = 1; i < summands.size(); ++i) {
        acc = Expr<S>::sum(acc, rebuild_product(summands[i]));
    }
    return acc;
}

template <Semiring S>
void flatten_sum(const Expr<S>& e, std::vector<Expr<S>>& out) {
    using Kind = typename Expr<S>::Kind;
    if (e.is(Kind::Sum)) {
        flatten_sum(e.left(), out);
        flatten_sum(e.right(), out);
    } else {
        out.push_back(e);
    }
}

}  // namespace detail

/// A state of any of the three derivative structures, exposing one output
/// value and one successor per letter. Copies are cheap and share the
/// underlying system and memo tables.
template <Semiring S>
class State {
public:
    using Value = typename S::Value;

    static State of_grammar(std::shared_ptr<const GrammarSystem<S>> sys, Polynomial<S> p) {
        sys->validate();
        sys->require_poly(p);
        return State(GrammarSt{std::move(sys), std::move(p)});
    }

    static State of_term(std::shared_ptr<const TermSystem<S>> sys, Expr<S> t) {
        sys->validate();
        sys->require_term(t);
        auto cache = std::make_shared<TermCache<S>>(sys);
        return State(TermSt{std::move(sys), std::move(cache), std::move(t)});
    }

    static State of_mu(Alphabet alphabet, Expr<S> e) {
        auto cache = std::make_shared<MuCache<S>>();
        cache->output(e);  // validates closedness and guardedness up front
        return State(MuSt{std::make_shared<Alphabet>(std::move(alphabet)), std::move(cache),
                          std::move(e)});
    }

    const Alphabet& alphabet() const {
        if (auto* g = std::get_if<GrammarSt>(&v_)) return g->sys->alphabet;
        if (auto* t = std::get_if<TermSt>(&v_)) return t->sys->alphabet;
        return *std::get<MuSt>(v_).alphabet;
    }

    Value output() const {
        if (auto* g = std::get_if<GrammarSt>(&v_)) return poly_output(*g->sys, g->poly);
        if (auto* t = std::get_if<TermSt>(&v_)) return t->cache->output(t->term);
        const MuSt& m = std::get<MuSt>(v_);
        return m.cache->output(m.expr);
    }

    State derivative(char a) const {
        if (auto* g = std::get_if<GrammarSt>(&v_)) {
            return State(GrammarSt{g->sys, poly_derivative(*g->sys, g->poly, a)});
        }
        if (auto* t = std::get_if<TermSt>(&v_)) {
            return State(TermSt{t->sys, t->cache, t->cache->derivative(t->term, a)});
        }
        const MuSt& m = std::get<MuSt>(v_);
        m.alphabet->require(a);
        return State(MuSt{m.alphabet, m.cache, m.cache->derivative(m.expr, a)});
    }

    Value coefficient(std::string_view w) const {
        State s = *this;
        for (char a : w) s = s.derivative(a);
        return s.output();
    }

    std::string describe() const {
        if (auto* g = std::get_if<GrammarSt>(&v_)) return to_string(g->poly, g->sys->nonterminals);
        if (auto* t = std::get_if<TermSt>(&v_)) return to_string(t->term);
        return to_string(std::get<MuSt>(v_).expr);
    }

    bool operator==(const State& other) const { return cmp(other) == 0; }
    bool operator!=(const State& other) const { return cmp(other) != 0; }
    bool operator<(const State& other) const { return cmp(other) < 0; }

    /// The same state with its expression rewritten to sum-of-products normal
    /// form (polynomial states are already normal). On overflow of the
    /// summand budget the state is returned unchanged, which is always sound.
    State normalized() const {
        if (auto* t = std::get_if<TermSt>(&v_)) {
            try {
                return State(TermSt{t->sys, t->cache, detail::normalize_expr(t->term)});
            } catch (const detail::NormalizeOverflow&) {
                return *this;
            }
        }
        if (auto* m = std::get_if<MuSt>(&v_)) {
            try {
                return State(MuSt{m->alphabet, m->cache, detail::normalize_expr(m->expr)});
            } catch (const detail::NormalizeOverflow&) {
                return *this;
            }
        }
        return *this;
    }

    /// Splits the state into its sum components: monomials of a polynomial
    /// state, flattened summands of an expression state. A zero state has no
    /// summands.
    std::vector<State> summands() const {
        std::vector<State> out;
        if (auto* g = std::get_if<GrammarSt>(&v_)) {
            for (const auto& [m, k] : g->poly.terms()) {
                out.push_back(State(GrammarSt{g->sys, Polynomial<S>::monomial(m, k)}));
            }
            return out;
        }
        std::vector<Expr<S>> parts;
        if (auto* t = std::get_if<TermSt>(&v_)) {
            detail::flatten_sum(t->term, parts);
            for (const auto& p : parts) {
                if (p.is_zero_const()) continue;
                out.push_back(State(TermSt{t->sys, t->cache, p}));
            }
            return out;
        }
        const MuSt& m = std::get<MuSt>(v_);
        detail::flatten_sum(m.expr, parts);
        for (const auto& p : parts) {
            if (p.is_zero_const()) continue;
            out.push_back(State(MuSt{m.alphabet, m.cache, p}));
        }
        return out;
    }

    /// Rebuilds a state of the same representation from summand states.
    State recombine(const std::vector<State>& parts) const {
        if (auto* g = std::get_if<GrammarSt>(&v_)) {
            Polynomial<S> p;
            for (const auto& part : parts) p = p.plus(std::get<GrammarSt>(part.v_).poly);
            return State(GrammarSt{g->sys, std::move(p)});
        }
        if (auto* t = std::get_if<TermSt>(&v_)) {
            return State(TermSt{t->sys, t->cache, rebuild(parts)});
        }
        const MuSt& m = std::get<MuSt>(v_);
        return State(MuSt{m.alphabet, m.cache, rebuild(parts)});
    }

private:
    struct GrammarSt {
        std::shared_ptr<const GrammarSystem<S>> sys;
        Polynomial<S> poly;
    };
    struct TermSt {
        std::shared_ptr<const TermSystem<S>> sys;
        std::shared_ptr<TermCache<S>> cache;
        Expr<S> term;
    };
    struct MuSt {
        std::shared_ptr<Alphabet> alphabet;
        std::shared_ptr<MuCache<S>> cache;
        Expr<S> expr;
    };

    explicit State(GrammarSt s) : v_(std::move(s)) {}
    explicit State(TermSt s) : v_(std::move(s)) {}
    explicit State(MuSt s) : v_(std::move(s)) {}

    Expr<S> rebuild(const std::vector<State>& parts) const {
        if (parts.empty()) return Expr<S>::zero();
        Expr<S> acc = expr_of(parts[0]);
        for (std::size_t i = 1; i < parts.size(); ++i) {
            acc = Expr<S>::sum(acc, expr_of(parts[i]));
        }
        return acc;
    }

    static Expr<S> expr_of(const State& s) {
        if (auto* t = std::get_if<TermSt>(&s.v_)) return t->term;
        return std::get<MuSt>(s.v_).expr;
    }

    int cmp(const State& other) const {
        if (v_.index() != other.v_.index()) return v_.index() < other.v_.index() ? -1 : 1;
        if (auto* g = std::get_if<GrammarSt>(&v_)) {
            const auto& h = std::get<GrammarSt>(other.v_);
            if (g->sys != h.sys) return g->sys < h.sys ? -1 : 1;
            if (g->poly == h.poly) return 0;
            return g->poly < h.poly ? -1 : 1;
        }
        if (auto* t = std::get_if<TermSt>(&v_)) {
            const auto& u = std::get<TermSt>(other.v_);
            if (t->sys != u.sys) return t->sys < u.sys ? -1 : 1;
            return Expr<S>::compare(t->term, u.term);
        }
        const MuSt& m = std::get<MuSt>(v_);
        const MuSt& n = std::get<MuSt>(other.v_);
        if (*m.alphabet != *n.alphabet) {
            return m.alphabet->letters() < n.alphabet->letters() ? -1 : 1;
        }
        return Expr<S>::compare(m.expr, n.expr);
    }

    std::variant<GrammarSt, TermSt, MuSt> v_;
};

template <Semiring S>
struct EquivResult {
    enum class Kind { Equivalent, Inequivalent, Unknown };

    Kind kind;
    int checked_to = 0;   // Equivalent from word search: the exhausted bound
    std::string witness;  // Inequivalent: a word whose coefficients differ
    std::string note;     // Unknown: why the search gave up
    std::vector<std::pair<State<S>, State<S>>> relation;  // Equivalent from bisimulation

    bool equivalent() const { return kind == Kind::Equivalent; }
    bool inequivalent() const { return kind == Kind::Inequivalent; }
    bool unknown() const { return kind == Kind::Unknown; }
};

template <Semiring S>
void require_same_alphabet(const State<S>& a, const State<S>& b) {
    if (a.alphabet() != b.alphabet()) {
        throw AlphabetMismatchError("states live over different alphabets");
    }
}

/// Breadth-first comparison of coefficients over all words up to `maxlen`.
/// Returns the shortest witness on a mismatch (alphabet order breaks ties);
/// otherwise the two states agree on every word up to the bound.
template <Semiring S>
EquivResult<S> word_equiv(const State<S>& s1, const State<S>& s2, int maxlen) {
    require_same_alphabet(s1, s2);
    const Alphabet& alphabet = s1.alphabet();

    struct Item {
        State<S> a;
        State<S> b;
        std::string word;
    };
    std::vector<Item> level{{s1, s2, ""}};
    for (int len = 0; len <= maxlen; ++len) {
        std::vector<Item> next;
        for (const Item& it : level) {
            if (!S::eq(it.a.output(), it.b.output())) {
                return EquivResult<S>{EquivResult<S>::Kind::Inequivalent, len, it.word, "", {}};
            }
            if (len == maxlen) continue;
            for (char a : alphabet.letters()) {
                next.push_back(Item{it.a.derivative(a), it.b.derivative(a), it.word + a});
            }
        }
        level = std::move(next);
    }
    return EquivResult<S>{EquivResult<S>::Kind::Equivalent, maxlen, "", "", {}};
}

namespace detail {

/// Discharge step shared by the search and the post-hoc verifier: normalize
/// both derivatives, cancel equal summands pairwise, and reduce to one
/// remaining pair (or nothing).
template <Semiring S>
std::optional<std::pair<State<S>, State<S>>> reduce_pair(const State<S>& dp, const State<S>& dq) {
    State<S> np = dp.normalized();
    State<S> nq = dq.normalized();
    std::vector<State<S>> ps = np.summands();
    std::vector<State<S>> qs = nq.summands();
    std::sort(ps.begin(), ps.end());
    std::sort(qs.begin(), qs.end());
    std::vector<State<S>> pr, qr;
    std::size_t i = 0, j = 0;
    while (i < ps.size() && j < qs.size()) {
        if (ps[i] == qs[j]) {
            ++i;
            ++j;
        } else if (ps[i] < qs[j]) {
            pr.push_back(ps[i++]);
        } else {
            qr.push_back(qs[j++]);
        }
    }
    for (; i < ps.size(); ++i) pr.push_back(ps[i]);
    for (; j < qs.size(); ++j) qr.push_back(qs[j]);
    if (pr.empty() && qr.empty()) return std::nullopt;
    State<S> rp = np.recombine(pr);
    State<S> rq = nq.recombine(qr);
    if (rp == rq) return std::nullopt;
    return std::make_pair(std::move(rp), std::move(rq));
}

}  // namespace detail

/// Checks that a relation is a bisimulation up to sum decomposition and
/// cancellation: every pair has equal outputs and every derivative pair
/// reduces to nothing or to a pair inside the relation.
template <Semiring S>
bool verify_up_to_relation(const std::vector<std::pair<State<S>, State<S>>>& relation) {
    std::set<std::pair<State<S>, State<S>>> rel(relation.begin(), relation.end());
    for (const auto& [p, q] : relation) {
        if (!S::eq(p.output(), q.output())) return false;
        for (char a : p.alphabet().letters()) {
            auto reduced = detail::reduce_pair(p.derivative(a), q.derivative(a));
            if (!reduced) continue;
            if (!rel.count(*reduced)) return false;
        }
    }
    return true;
}

/// Bisimulation search up to sum decomposition, over normalized states.
/// Equivalent results carry the constructed relation (verified before
/// returning): a proof, not a bound. Inequivalent results carry a witness
/// word re-verified against the original states. Unknown is returned when
/// the budget runs out or when a mismatching pair cannot be confirmed on the
/// originals (the sum decomposition is a heuristic and may overshoot).
template <Semiring S>
EquivResult<S> bisim_upto(const State<S>& s1, const State<S>& s2, int node_budget) {
    require_same_alphabet(s1, s2);
    const Alphabet& alphabet = s1.alphabet();

    struct Item {
        State<S> p;
        State<S> q;
        std::string word;
    };
    std::deque<Item> queue;
    std::set<std::pair<State<S>, State<S>>> scheduled;  // budget counts distinct pairs
    std::set<std::pair<State<S>, State<S>>> in_relation;
    std::vector<std::pair<State<S>, State<S>>> relation;

    int enqueued = 1;
    queue.push_back(Item{s1.normalized(), s2.normalized(), ""});
    scheduled.emplace(queue.front().p, queue.front().q);

    while (!queue.empty()) {
        Item item = std::move(queue.front());
        queue.pop_front();
        if (item.p == item.q) continue;
        auto key = std::make_pair(item.p, item.q);
        if (in_relation.count(key)) continue;

        if (!S::eq(item.p.output(), item.q.output())) {
            // The decomposition steps that led here are heuristic, so confirm
            // the witness on the original states before claiming a difference.
            if (!S::eq(s1.coefficient(item.word), s2.coefficient(item.word))) {
                return EquivResult<S>{EquivResult<S>::Kind::Inequivalent, 0, item.word, "", {}};
            }
            return EquivResult<S>{EquivResult<S>::Kind::Unknown, 0, "",
                                  "sum decomposition produced an unconfirmed mismatch after \"" +
                                      item.word + "\"",
                                  {}};
        }
        in_relation.insert(key);
        relation.push_back(key);

        for (char a : alphabet.letters()) {
            auto reduced = detail::reduce_pair(item.p.derivative(a), item.q.derivative(a));
            if (!reduced) continue;
            if (reduced->first == reduced->second) continue;
            if (!scheduled.insert(*reduced).second) continue;
            if (++enqueued > node_budget) {
                return EquivResult<S>{EquivResult<S>::Kind::Unknown, 0, "",
                                      "node budget exhausted", {}};
            }
            queue.push_back(Item{reduced->first, reduced->second, item.word + a});
        }
    }

    if (!verify_up_to_relation<S>(relation)) {
        throw Error("internal error: constructed relation failed verification");
    }
    EquivResult<S> out{EquivResult<S>::Kind::Equivalent, 0, "", "", {}};
    out.relation = std::move(relation);
    return out;
}

}  // namespace cfder

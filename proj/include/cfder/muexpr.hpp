#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cfder/expr.hpp"
#include "cfder/term_system.hpp"

namespace cfder {

/// True iff the expression matches the guarded grammar
///   g ::= a * t | k | g + g
/// i.e. it is a sum of constants and letter-headed products. Only such bodies
/// may appear directly under a binder: the letter guard is what makes the
/// unfolding derivative well-founded.
template <Semiring S>
bool check_guarded(const Expr<S>& e) {
    using Kind = typename Expr<S>::Kind;
    switch (e.kind()) {
        case Kind::Constant:
            return true;
        case Kind::Sum:
            return check_guarded(e.left()) && check_guarded(e.right());
        case Kind::Prod:
            return e.left().is(Kind::Letter);
        default:
            return false;
    }
}

/// Free variables, memoized per shared node (the set is context-free: a
/// binder removes its own name from its body's set).
template <Semiring S>
std::set<std::string> free_variables(const Expr<S>& e) {
    using Kind = typename Expr<S>::Kind;
    std::map<const void*, std::set<std::string>> memo;
    struct Rec {
        std::map<const void*, std::set<std::string>>& memo;
        const std::set<std::string>& run(const Expr<S>& x) {
            auto it = memo.find(x.id());
            if (it != memo.end()) return it->second;
            std::set<std::string> out;
            switch (x.kind()) {
                case Kind::Var:
                    out.insert(x.name());
                    break;
                case Kind::Mu:
                    out = run(x.body());
                    out.erase(x.name());
                    break;
                case Kind::Sum:
                case Kind::Prod: {
                    std::set<std::string> l = run(x.left());
                    const std::set<std::string>& r = run(x.right());
                    l.insert(r.begin(), r.end());
                    out = std::move(l);
                    break;
                }
                default:
                    break;
            }
            return memo.emplace(x.id(), std::move(out)).first->second;
        }
    } rec{memo};
    return rec.run(e);
}

template <Semiring S>
bool is_closed(const Expr<S>& e) {
    return free_variables(e).empty();
}

/// Throws unless `e` is closed and every binder body is guarded.
template <Semiring S>
void require_closed_guarded(const Expr<S>& e) {
    using Kind = typename Expr<S>::Kind;
    if (!is_closed(e)) {
        throw NotClosedError("expression has free variables: " + [&] {
            std::string s;
            for (const auto& v : free_variables(e)) {
                if (!s.empty()) s += ", ";
                s += v;
            }
            return s;
        }());
    }
    struct Walk {
        std::unordered_set<const void*> seen;
        void run(const Expr<S>& x) {
            if (!seen.insert(x.id()).second) return;
            switch (x.kind()) {
                case Kind::Mu:
                    if (!check_guarded(x.body())) {
                        throw UnguardedError("body of 'mu " + x.name() + "' is not guarded");
                    }
                    run(x.body());
                    return;
                case Kind::Sum:
                case Kind::Prod:
                    run(x.left());
                    run(x.right());
                    return;
                default:
                    return;
            }
        }
    } walk;
    walk.run(e);
}

/// Substitutes `replacement` for free occurrences of `name`, skipping scopes
/// where `name` is rebound. Callers only ever substitute closed expressions,
/// so no renaming is required.
template <Semiring S>
Expr<S> substitute(const Expr<S>& e, const std::string& name, const Expr<S>& replacement) {
    using Kind = typename Expr<S>::Kind;
    std::unordered_map<const void*, Expr<S>> memo;
    struct Rec {
        const std::string& name;
        const Expr<S>& replacement;
        std::unordered_map<const void*, Expr<S>>& memo;
        Expr<S> run(const Expr<S>& x) {
            auto it = memo.find(x.id());
            if (it != memo.end()) return it->second;
            Expr<S> out = x;
            switch (x.kind()) {
                case Kind::Var:
                    if (x.name() == name) out = replacement;
                    break;
                case Kind::Mu:
                    if (x.name() != name) out = Expr<S>::mu(x.name(), run(x.body()));
                    break;
                case Kind::Sum:
                    out = Expr<S>::sum(run(x.left()), run(x.right()));
                    break;
                case Kind::Prod:
                    out = Expr<S>::prod(run(x.left()), run(x.right()));
                    break;
                default:
                    break;
            }
            memo.emplace(x.id(), out);
            return out;
        }
    } rec{name, replacement, memo};
    return rec.run(e);
}

/// One unfolding step of a binder: body with the whole expression substituted
/// for the bound variable.
template <Semiring S>
Expr<S> mu_unfold(const Expr<S>& e) {
    using Kind = typename Expr<S>::Kind;
    if (!e.is(Kind::Mu)) throw Error("mu_unfold expects a binder");
    return substitute(e.body(), e.name(), e);
}

/// Output and derivative of closed mu-expressions, memoized per node.
///
/// A binder evaluates through its unfolding. In the product rows, a factor
/// with output zero absorbs its cofactor's derivative (the summand becomes
/// the zero constant): without this the unfolding recursion would not be
/// well-founded, since the guard letters themselves have output zero.
template <Semiring S>
class MuCache {
public:
    using Value = typename S::Value;
    using Kind = typename Expr<S>::Kind;

    Value output(const Expr<S>& e) {
        validate(e);
        return out(e);
    }

    Expr<S> derivative(const Expr<S>& e, char a) {
        validate(e);
        return der(e, a);
    }

    Expr<S> word_derivative(Expr<S> e, std::string_view w) {
        validate(e);
        for (char a : w) e = der(e, a);
        return e;
    }

    Value coefficient(const Expr<S>& e, std::string_view w) {
        return out(word_derivative(e, w));
    }

private:
    void validate(const Expr<S>& e) {
        if (validated_.insert(e.id()).second) {
            validated_keepalive_.push_back(e);
            require_closed_guarded(e);
        }
    }

    Value out(const Expr<S>& e) {
        auto it = out_.find(e);
        if (it != out_.end()) return it->second;
        Value v = S::zero();
        switch (e.kind()) {
            case Kind::Constant:
                v = e.value();
                break;
            case Kind::Letter:
                v = S::zero();
                break;
            case Kind::Var:
                throw NotClosedError("free variable '" + e.name() + "' has no output");
            case Kind::Sum:
                v = S::add(out(e.left()), out(e.right()));
                break;
            case Kind::Prod: {
                Value l = out(e.left());
                v = is_zero<S>(l) ? S::zero() : S::mul(l, out(e.right()));
                break;
            }
            case Kind::Mu:
                v = out(unfold(e));
                break;
        }
        out_.emplace(e, v);
        return v;
    }

    Expr<S> der(const Expr<S>& e, char a) {
        auto key = std::make_pair(e, a);
        auto it = der_.find(key);
        if (it != der_.end()) return it->second;
        Expr<S> d = Expr<S>::zero();
        switch (e.kind()) {
            case Kind::Constant:
                d = Expr<S>::zero();
                break;
            case Kind::Letter:
                d = Expr<S>::indicator(e.letter_value() == a);
                break;
            case Kind::Var:
                throw NotClosedError("free variable '" + e.name() + "' has no derivative");
            case Kind::Sum:
                d = Expr<S>::sum(der(e.left(), a), der(e.right(), a));
                break;
            case Kind::Prod: {
                Expr<S> first = Expr<S>::prod(der(e.left(), a), e.right());
                Value l = out(e.left());
                Expr<S> second = is_zero<S>(l)
                                     ? Expr<S>::zero()
                                     : Expr<S>::prod(Expr<S>::constant(l), der(e.right(), a));
                d = Expr<S>::sum(first, second);
                break;
            }
            case Kind::Mu:
                d = der(unfold(e), a);
                break;
        }
        // Derivatives of closed guarded expressions are closed and guarded by
        // construction; mark them so chained public calls revalidate in O(1).
        mark_valid(d);
        der_.emplace(std::move(key), d);
        return d;
    }

    void mark_valid(const Expr<S>& e) {
        if (validated_.insert(e.id()).second) validated_keepalive_.push_back(e);
    }

    Expr<S> unfold(const Expr<S>& e) {
        auto it = unfold_.find(e);
        if (it != unfold_.end()) return it->second;
        Expr<S> u = mu_unfold(e);
        unfold_.emplace(e, u);
        return u;
    }

    struct KeyHash {
        std::size_t operator()(const std::pair<Expr<S>, char>& k) const {
            return std::hash<const void*>{}(k.first.id()) * 131 +
                   static_cast<unsigned char>(k.second);
        }
    };

    std::unordered_set<const void*> validated_;
    std::vector<Expr<S>> validated_keepalive_;
    std::unordered_map<Expr<S>, Value, ExprPtrHash<S>> out_;
    std::unordered_map<std::pair<Expr<S>, char>, Expr<S>, KeyHash> der_;
    std::unordered_map<Expr<S>, Expr<S>, ExprPtrHash<S>> unfold_;
};

template <Semiring S>
typename S::Value mu_output(const Expr<S>& e) {
    MuCache<S> cache;
    return cache.output(e);
}

template <Semiring S>
Expr<S> mu_derivative(const Expr<S>& e, char a) {
    MuCache<S> cache;
    return cache.derivative(e, a);
}

template <Semiring S>
typename S::Value mu_coefficient(const Expr<S>& e, std::string_view w) {
    MuCache<S> cache;
    return cache.coefficient(e, w);
}

/// A map from variables to guarded expressions, used to close terms.
template <Semiring S>
struct MuAssignment {
    std::map<std::string, Expr<S>> images;

    void validate() const {
        for (const auto& [x, g] : images) {
            if (!check_guarded(g)) {
                throw UnguardedError("assignment image of '" + x + "' is not guarded");
            }
        }
    }
};

/// The assignment a term system induces on its nonterminals:
///   mu(x) = j(o(x)) + sum over the alphabet of a * x_a,
/// with the sum right-nested in alphabet order.
template <Semiring S>
MuAssignment<S> canonical_assignment(const TermSystem<S>& sys) {
    sys.validate();
    MuAssignment<S> out;
    for (std::uint32_t x = 0; x < sys.nonterminals.size(); ++x) {
        std::size_t n = sys.alphabet.size();
        Expr<S> acc = Expr<S>::prod(Expr<S>::letter(sys.alphabet.letter(n - 1)),
                                    sys.derivatives[x][n - 1]);
        for (std::size_t i = n - 1; i-- > 0;) {
            acc = Expr<S>::sum(
                Expr<S>::prod(Expr<S>::letter(sys.alphabet.letter(i)), sys.derivatives[x][i]),
                acc);
        }
        out.images.emplace(sys.nonterminals[x],
                           Expr<S>::sum(Expr<S>::indicator(!is_zero<S>(sys.outputs[x])), acc));
    }
    return out;
}

namespace detail {

template <Semiring S>
Expr<S> close_rec(const Expr<S>& e, const MuAssignment<S>& asg,
                  std::vector<std::string>& bound) {
    using Kind = typename Expr<S>::Kind;
    switch (e.kind()) {
        case Kind::Var: {
            for (const auto& b : bound) {
                if (b == e.name()) return e;
            }
            auto it = asg.images.find(e.name());
            if (it == asg.images.end()) {
                throw UnknownVariableError("no assignment image for variable '" + e.name() + "'");
            }
            bound.push_back(e.name());
            Expr<S> body = close_rec(it->second, asg, bound);
            bound.pop_back();
            return Expr<S>::mu(e.name(), body);
        }
        case Kind::Sum:
            return Expr<S>::sum(close_rec(e.left(), asg, bound), close_rec(e.right(), asg, bound));
        case Kind::Prod:
            return Expr<S>::prod(close_rec(e.left(), asg, bound),
                                 close_rec(e.right(), asg, bound));
        case Kind::Mu: {
            bound.push_back(e.name());
            Expr<S> body = close_rec(e.body(), asg, bound);
            bound.pop_back();
            return Expr<S>::mu(e.name(), body);
        }
        default:
            return e;
    }
}

}  // namespace detail

/// Deterministic closure of a term: every free variable x becomes
/// mu x . (closure of its assignment image), never substituting under a
/// binder for the same name. The result is closed whenever every free
/// variable has an image.
template <Semiring S>
Expr<S> close_term(const Expr<S>& t, const MuAssignment<S>& asg) {
    asg.validate();
    std::vector<std::string> bound;
    return detail::close_rec(t, asg, bound);
}

/// Canonical weighted regular-expression-style closure of a single
/// nonterminal: close its variable under the system's canonical assignment.
template <Semiring S>
Expr<S> close_nonterminal(const TermSystem<S>& sys, std::string_view name) {
    auto i = sys.index_of(name);
    if (!i) throw UnknownVariableError("unknown nonterminal '" + std::string(name) + "'");
    return close_term(Expr<S>::var(std::string(name)), canonical_assignment(sys));
}

namespace detail {

inline std::string strip_rename_suffix(const std::string& name) {
    auto pos = name.find('~');
    return pos == std::string::npos ? name : name.substr(0, pos);
}

inline std::string fresh_name(const std::string& wanted, std::set<std::string>& used) {
    if (used.insert(wanted).second) return wanted;
    std::string base = strip_rename_suffix(wanted);
    for (std::size_t k = 1;; ++k) {
        std::string candidate = base + "~" + std::to_string(k);
        if (used.insert(candidate).second) return candidate;
    }
}

template <Semiring S>
Expr<S> alpha_rec(const Expr<S>& e, std::map<std::string, std::string>& env,
                  std::set<std::string>& used) {
    using Kind = typename Expr<S>::Kind;
    switch (e.kind()) {
        case Kind::Var: {
            auto it = env.find(e.name());
            return it == env.end() ? e : Expr<S>::var(it->second);
        }
        case Kind::Mu: {
            std::string nn = fresh_name(e.name(), used);
            auto it = env.find(e.name());
            std::optional<std::string> saved;
            if (it != env.end()) saved = it->second;
            env[e.name()] = nn;
            Expr<S> body = alpha_rec(e.body(), env, used);
            if (saved) {
                env[e.name()] = *saved;
            } else {
                env.erase(e.name());
            }
            return Expr<S>::mu(nn, body);
        }
        case Kind::Sum:
            return Expr<S>::sum(alpha_rec(e.left(), env, used), alpha_rec(e.right(), env, used));
        case Kind::Prod:
            return Expr<S>::prod(alpha_rec(e.left(), env, used), alpha_rec(e.right(), env, used));
        default:
            return e;
    }
}

}  // namespace detail

/// Renames binders left-to-right so that no two binder occurrences share a
/// name; repeated names get ~1, ~2, ... suffixes. Alpha-equivalent to the
/// input, and an input whose binders are already distinct comes back
/// unchanged.
template <Semiring S>
Expr<S> alpha_unique(const Expr<S>& e) {
    std::map<std::string, std::string> env;
    std::set<std::string> used;
    for (const auto& v : free_variables(e)) used.insert(v);  // never capture a free name
    return detail::alpha_rec(e, env, used);
}

/// Structural equality modulo binder names.
template <Semiring S>
bool alpha_equal(const Expr<S>& a, const Expr<S>& b) {
    using Kind = typename Expr<S>::Kind;
    struct Rec {
        std::vector<std::pair<std::string, std::string>> stack;
        bool run(const Expr<S>& x, const Expr<S>& y) {
            if (x.kind() != y.kind()) return false;
            switch (x.kind()) {
                case Kind::Constant:
                    return S::eq(x.value(), y.value());
                case Kind::Letter:
                    return x.letter_value() == y.letter_value();
                case Kind::Var: {
                    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
                        bool lx = it->first == x.name();
                        bool ly = it->second == y.name();
                        if (lx || ly) return lx && ly;
                    }
                    return x.name() == y.name();
                }
                case Kind::Mu: {
                    stack.emplace_back(x.name(), y.name());
                    bool ok = run(x.body(), y.body());
                    stack.pop_back();
                    return ok;
                }
                case Kind::Sum:
                case Kind::Prod:
                    return run(x.left(), y.left()) && run(x.right(), y.right());
            }
            return false;
        }
    } rec;
    return rec.run(a, b);
}

/// Collapses every binder to its bound variable; homomorphic elsewhere.
template <Semiring S>
Expr<S> mu_prune(const Expr<S>& e) {
    using Kind = typename Expr<S>::Kind;
    switch (e.kind()) {
        case Kind::Mu:
            return Expr<S>::var(e.name());
        case Kind::Sum:
            return Expr<S>::sum(mu_prune(e.left()), mu_prune(e.right()));
        case Kind::Prod:
            return Expr<S>::prod(mu_prune(e.left()), mu_prune(e.right()));
        default:
            return e;
    }
}

namespace detail {

/// Output of a guarded term: constants give their value, letter-headed
/// products zero, sums add.
template <Semiring S>
typename S::Value guarded_output(const Expr<S>& g) {
    using Kind = typename Expr<S>::Kind;
    switch (g.kind()) {
        case Kind::Constant:
            return g.value();
        case Kind::Sum:
            return S::add(guarded_output(g.left()), guarded_output(g.right()));
        case Kind::Prod:
            return S::zero();
        default:
            throw UnguardedError("output table applies to guarded terms only");
    }
}

/// Derivative of a guarded term by `a`: collect the cofactors of matching
/// letter guards over the flattened sum, dropping zero rows, right-nested.
template <Semiring S>
void guarded_delta_collect(const Expr<S>& g, char a, std::vector<Expr<S>>& out) {
    using Kind = typename Expr<S>::Kind;
    switch (g.kind()) {
        case Kind::Constant:
            return;
        case Kind::Sum:
            guarded_delta_collect(g.left(), a, out);
            guarded_delta_collect(g.right(), a, out);
            return;
        case Kind::Prod:
            if (!g.left().is(Kind::Letter)) {
                throw UnguardedError("derivative table applies to guarded terms only");
            }
            if (g.left().letter_value() == a) out.push_back(g.right());
            return;
        default:
            throw UnguardedError("derivative table applies to guarded terms only");
    }
}

template <Semiring S>
Expr<S> guarded_delta(const Expr<S>& g, char a) {
    std::vector<Expr<S>> parts;
    guarded_delta_collect(g, a, parts);
    if (parts.empty()) return Expr<S>::zero();
    Expr<S> acc = parts.back();
    for (std::size_t i = parts.size() - 1; i-- > 0;) acc = Expr<S>::sum(parts[i], acc);
    return acc;
}

template <Semiring S>
bool contains_mu(const Expr<S>& e, std::unordered_map<const void*, bool>& memo) {
    using Kind = typename Expr<S>::Kind;
    auto it = memo.find(e.id());
    if (it != memo.end()) return it->second;
    bool v = false;
    switch (e.kind()) {
        case Kind::Mu:
            v = true;
            break;
        case Kind::Sum:
        case Kind::Prod:
            v = contains_mu(e.left(), memo) || contains_mu(e.right(), memo);
            break;
        default:
            break;
    }
    memo.emplace(e.id(), v);
    return v;
}

}  // namespace detail

/// Inverts a closed expression whose binders are pairwise distinct into a
/// term system over its bound variables plus a start term: each binder
/// contributes the equation read off from its pruned body, and the start term
/// is the pruning of the whole expression. The start term denotes the same
/// series as the input.
template <Semiring S>
std::pair<TermSystem<S>, Expr<S>> deconstruct(const Expr<S>& e, const Alphabet& alphabet) {
    using Kind = typename Expr<S>::Kind;
    require_closed_guarded(e);

    std::vector<std::string> order;
    std::map<std::string, Expr<S>> bodies;
    std::unordered_map<const void*, bool> mu_memo;
    std::unordered_set<const void*> visited;
    struct Walk {
        std::vector<std::string>& order;
        std::map<std::string, Expr<S>>& bodies;
        std::unordered_map<const void*, bool>& mu_memo;
        std::unordered_set<const void*>& visited;
        void run(const Expr<S>& x) {
            if (!detail::contains_mu(x, mu_memo)) return;
            if (!visited.insert(x.id()).second) {
                // A shared subtree with a binder is that binder occurring twice.
                throw DuplicateBinderError("expression binds a variable in two subexpressions");
            }
            switch (x.kind()) {
                case Kind::Mu:
                    if (bodies.count(x.name())) {
                        throw DuplicateBinderError("variable '" + x.name() +
                                                   "' is bound more than once");
                    }
                    order.push_back(x.name());
                    bodies.emplace(x.name(), x.body());
                    run(x.body());
                    return;
                case Kind::Sum:
                case Kind::Prod:
                    run(x.left());
                    run(x.right());
                    return;
                default:
                    return;
            }
        }
    } walk{order, bodies, mu_memo, visited};
    walk.run(e);

    TermSystem<S> sys{alphabet, order, {}, {}};
    sys.outputs.reserve(order.size());
    sys.derivatives.reserve(order.size());
    for (const auto& x : order) {
        Expr<S> pruned = mu_prune(bodies.at(x));
        sys.outputs.push_back(detail::guarded_output<S>(pruned));
        std::vector<Expr<S>> row;
        row.reserve(alphabet.size());
        for (char a : alphabet.letters()) row.push_back(detail::guarded_delta(pruned, a));
        sys.derivatives.push_back(std::move(row));
    }
    sys.validate();
    return {std::move(sys), mu_prune(e)};
}

}  // namespace cfder

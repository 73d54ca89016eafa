#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfder/semiring.hpp"

namespace cfder {

/// An immutable syntax tree over constants, letters, variables, binary sum
/// and product, and the fixed-point binder `mu x . body`. Mu-free trees are
/// the plain terms of a syntactic system; trees with binders are
/// mu-expressions.
///
/// Nodes are hash-consed: structurally equal expressions share one node, so
/// equality is a pointer comparison and derivative caches can key on node
/// identity. Values are freely shareable across threads; the intern table is
/// internally synchronized.
template <Semiring S>
class Expr {
public:
    using Value = typename S::Value;

    enum class Kind : std::uint8_t { Constant, Letter, Var, Sum, Prod, Mu };

    static Expr constant(Value v) {
        Node n;
        n.kind = Kind::Constant;
        n.value = std::move(v);
        return Expr(intern(std::move(n)));
    }

    static Expr zero() { return constant(S::zero()); }
    static Expr one() { return constant(S::one()); }

    /// j: embeds a Boolean indicator as a constant term.
    static Expr indicator(bool b) { return b ? one() : zero(); }

    static Expr letter(char c) {
        Node n;
        n.kind = Kind::Letter;
        n.letter = c;
        return Expr(intern(std::move(n)));
    }

    static Expr var(std::string name) {
        Node n;
        n.kind = Kind::Var;
        n.name = std::move(name);
        return Expr(intern(std::move(n)));
    }

    static Expr sum(Expr l, Expr r) {
        Node n;
        n.kind = Kind::Sum;
        n.left = std::move(l.node_);
        n.right = std::move(r.node_);
        return Expr(intern(std::move(n)));
    }

    static Expr prod(Expr l, Expr r) {
        Node n;
        n.kind = Kind::Prod;
        n.left = std::move(l.node_);
        n.right = std::move(r.node_);
        return Expr(intern(std::move(n)));
    }

    static Expr mu(std::string binder, Expr body) {
        Node n;
        n.kind = Kind::Mu;
        n.name = std::move(binder);
        n.left = std::move(body.node_);
        return Expr(intern(std::move(n)));
    }

    Kind kind() const { return node_->kind; }
    bool is(Kind k) const { return node_->kind == k; }

    const Value& value() const { return node_->value; }
    char letter_value() const { return node_->letter; }
    const std::string& name() const { return node_->name; }
    Expr left() const { return Expr(node_->left); }
    Expr right() const { return Expr(node_->right); }
    Expr body() const { return Expr(node_->left); }

    bool is_zero_const() const { return is(Kind::Constant) && is_zero<S>(node_->value); }
    bool is_one_const() const { return is(Kind::Constant) && is_one<S>(node_->value); }

    /// Stable identity of the interned node.
    const void* id() const { return node_.get(); }

    bool operator==(const Expr& other) const { return node_ == other.node_; }
    bool operator!=(const Expr& other) const { return node_ != other.node_; }

    /// Deterministic structural order, independent of allocation addresses.
    /// The structural hash is the primary key, so unequal expressions almost
    /// always order in constant time; the walk below only breaks collisions.
    static int compare(const Expr& a, const Expr& b) {
        if (a.node_ == b.node_) return 0;
        const Node& x = *a.node_;
        const Node& y = *b.node_;
        if (x.hash != y.hash) return x.hash < y.hash ? -1 : 1;
        if (x.kind != y.kind) return x.kind < y.kind ? -1 : 1;
        switch (x.kind) {
            case Kind::Constant:
                if (S::eq(x.value, y.value)) return 0;
                return S::less(x.value, y.value) ? -1 : 1;
            case Kind::Letter:
                return x.letter < y.letter ? -1 : (x.letter == y.letter ? 0 : 1);
            case Kind::Var:
                return x.name.compare(y.name) < 0 ? -1 : (x.name == y.name ? 0 : 1);
            case Kind::Mu: {
                int c = x.name.compare(y.name);
                if (c != 0) return c < 0 ? -1 : 1;
                return compare(Expr(x.left), Expr(y.left));
            }
            case Kind::Sum:
            case Kind::Prod: {
                int c = compare(Expr(x.left), Expr(y.left));
                if (c != 0) return c;
                return compare(Expr(x.right), Expr(y.right));
            }
        }
        return 0;
    }

    bool operator<(const Expr& other) const { return compare(*this, other) < 0; }

private:
    struct Node {
        Kind kind{};
        std::size_t hash = 0;
        Value value{};
        char letter = 0;
        std::string name;
        std::shared_ptr<const Node> left, right;
    };
    using Ptr = std::shared_ptr<const Node>;

    explicit Expr(Ptr n) : node_(std::move(n)) {}

    static void hash_mix(std::size_t& seed, std::size_t v) {
        seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
    }

    static std::size_t node_hash(const Node& n) {
        std::size_t h = static_cast<std::size_t>(n.kind) * 0x9e3779b97f4a7c15ULL;
        switch (n.kind) {
            case Kind::Constant:
                hash_mix(h, S::hash(n.value));
                break;
            case Kind::Letter:
                hash_mix(h, static_cast<std::size_t>(static_cast<unsigned char>(n.letter)));
                break;
            case Kind::Var:
                hash_mix(h, std::hash<std::string>{}(n.name));
                break;
            case Kind::Mu:
                hash_mix(h, std::hash<std::string>{}(n.name));
                hash_mix(h, n.left->hash);
                break;
            case Kind::Sum:
            case Kind::Prod:
                hash_mix(h, n.left->hash);
                hash_mix(h, n.right->hash);
                break;
        }
        return h;
    }

    static bool node_equal(const Node& a, const Node& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Kind::Constant:
                return S::eq(a.value, b.value);
            case Kind::Letter:
                return a.letter == b.letter;
            case Kind::Var:
                return a.name == b.name;
            case Kind::Mu:
                return a.name == b.name && a.left == b.left;
            case Kind::Sum:
            case Kind::Prod:
                return a.left == b.left && a.right == b.right;
        }
        return false;
    }

    struct Registry {
        std::mutex mutex;
        std::unordered_multimap<std::size_t, std::weak_ptr<const Node>> table;
    };

    static Registry& registry() {
        static Registry* r = new Registry();  // never destroyed; nodes may outlive main
        return *r;
    }

    static Ptr intern(Node&& proto) {
        proto.hash = node_hash(proto);
        Registry& reg = registry();
        // Declared before the lock: if a colliding node's last owner races us,
        // its deleter (which reacquires the mutex) must not fire under our lock.
        std::vector<Ptr> hold;
        std::lock_guard<std::mutex> lock(reg.mutex);
        auto range = reg.table.equal_range(proto.hash);
        for (auto it = range.first; it != range.second; ++it) {
            if (Ptr existing = it->second.lock()) {
                if (node_equal(*existing, proto)) return existing;
                hold.push_back(std::move(existing));
            }
        }
        std::size_t h = proto.hash;
        // The deleter must release the registry lock before destroying the
        // node: freeing the children can cascade into further deleters.
        Ptr made(new Node(std::move(proto)), [](const Node* p) {
            {
                Registry& r = registry();
                std::lock_guard<std::mutex> g(r.mutex);
                auto rng = r.table.equal_range(p->hash);
                for (auto it = rng.first; it != rng.second; ++it) {
                    if (it->second.expired()) {
                        r.table.erase(it);
                        break;
                    }
                }
            }
            delete p;
        });
        reg.table.emplace(h, made);
        return made;
    }

    Ptr node_;
};

template <Semiring S>
struct ExprPtrHash {
    std::size_t operator()(const Expr<S>& e) const {
        return std::hash<const void*>{}(e.id());
    }
};

/// Canonical text form. Binary nodes are printed fully parenthesized except
/// at the root; a binder appearing as an operand is wrapped in parentheses so
/// its body cannot swallow the rest of the line.
template <Semiring S>
std::string to_string(const Expr<S>& e) {
    using Kind = typename Expr<S>::Kind;
    struct Printer {
        static void atom(const Expr<S>& e, std::string& out) {
            switch (e.kind()) {
                case Kind::Constant:
                case Kind::Letter:
                case Kind::Var:
                    root(e, out);
                    break;
                default:
                    out += '(';
                    root(e, out);
                    out += ')';
            }
        }
        static void root(const Expr<S>& e, std::string& out) {
            switch (e.kind()) {
                case Kind::Constant:
                    if (e.is_zero_const()) {
                        out += '0';
                    } else if (e.is_one_const()) {
                        out += '1';
                    } else {
                        out += '#';
                        out += S::to_string(e.value());
                    }
                    break;
                case Kind::Letter:
                    out += e.letter_value();
                    break;
                case Kind::Var:
                    out += e.name();
                    break;
                case Kind::Sum:
                    atom(e.left(), out);
                    out += " + ";
                    atom(e.right(), out);
                    break;
                case Kind::Prod:
                    atom(e.left(), out);
                    out += " * ";
                    atom(e.right(), out);
                    break;
                case Kind::Mu:
                    out += "mu ";
                    out += e.name();
                    out += " . ";
                    atom(e.body(), out);
                    break;
            }
        }
    };
    std::string out;
    Printer::root(e, out);
    return out;
}

}  // namespace cfder

#pragma once

#include <concepts>
#include <string>
#include <string_view>

#include <boost/container_hash/hash.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "cfder/errors.hpp"

namespace cfder {

// A semiring instance is a stateless type: a value type plus the two monoid
// operations. Values are immutable and totally ordered so they can serve as
// map keys and be printed deterministically.
template <class S>
concept Semiring = requires(const typename S::Value& a, const typename S::Value& b) {
    typename S::Value;
    { S::zero() } -> std::convertible_to<typename S::Value>;
    { S::one() } -> std::convertible_to<typename S::Value>;
    { S::add(a, b) } -> std::convertible_to<typename S::Value>;
    { S::mul(a, b) } -> std::convertible_to<typename S::Value>;
    { S::eq(a, b) } -> std::convertible_to<bool>;
    { S::less(a, b) } -> std::convertible_to<bool>;
    { S::hash(a) } -> std::convertible_to<std::size_t>;
    { S::to_string(a) } -> std::convertible_to<std::string>;
    { S::name() } -> std::convertible_to<std::string_view>;
};

/// The two-element semiring with join as addition and meet as multiplication.
struct BoolSemiring {
    using Value = bool;

    static Value zero() { return false; }
    static Value one() { return true; }
    static Value add(Value a, Value b) { return a || b; }
    static Value mul(Value a, Value b) { return a && b; }
    static bool eq(Value a, Value b) { return a == b; }
    static bool less(Value a, Value b) { return a < b; }
    static std::size_t hash(Value a) { return a ? 1 : 0; }
    static std::string to_string(Value a) { return a ? "1" : "0"; }
    static std::string_view name() { return "bool"; }

    // Digits only; anything but 0/1 is rejected so weighted input cannot be
    // silently truncated.
    static Value parse(const std::string& text, bool& ok) {
        ok = true;
        if (text == "0") return false;
        if (text == "1") return true;
        ok = false;
        return false;
    }
};

/// Natural numbers with ordinary addition and multiplication. Coefficients
/// are arbitrary precision: convolution coefficients outgrow 64 bits quickly
/// and must not wrap.
struct NatSemiring {
    using Value = boost::multiprecision::cpp_int;

    static Value zero() { return Value(0); }
    static Value one() { return Value(1); }
    static Value add(const Value& a, const Value& b) { return a + b; }
    static Value mul(const Value& a, const Value& b) { return a * b; }
    static bool eq(const Value& a, const Value& b) { return a == b; }
    static bool less(const Value& a, const Value& b) { return a < b; }
    static std::size_t hash(const Value& a) { return boost::hash<Value>{}(a); }
    static std::string to_string(const Value& a) { return a.str(); }
    static std::string_view name() { return "nat"; }

    static Value parse(const std::string& text, bool& ok) {
        ok = !text.empty();
        Value v = 0;
        for (char c : text) {
            if (c < '0' || c > '9') {
                ok = false;
                return Value(0);
            }
            v = v * 10 + (c - '0');
        }
        return v;
    }
};

template <Semiring S>
bool is_zero(const typename S::Value& v) {
    return S::eq(v, S::zero());
}

template <Semiring S>
bool is_one(const typename S::Value& v) {
    return S::eq(v, S::one());
}

/// Embeds a Boolean indicator into the semiring: 1 to the multiplicative
/// unit, 0 to the additive unit. This is the map that turns "accepting" into
/// a coefficient.
template <Semiring S>
typename S::Value embed_indicator(bool b) {
    return b ? S::one() : S::zero();
}

}  // namespace cfder

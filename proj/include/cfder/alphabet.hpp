#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cfder/errors.hpp"

namespace cfder {

/// A nonempty ordered list of distinct letters. The listed order is the total
/// order used everywhere a sum or iteration over the alphabet appears, and it
/// is the tie-break order for word enumeration ("alphabet order", which need
/// not be character order).
class Alphabet {
public:
    explicit Alphabet(std::vector<char> letters) : letters_(std::move(letters)) {
        if (letters_.empty()) throw Error("alphabet must be nonempty");
        for (std::size_t i = 0; i < letters_.size(); ++i) {
            for (std::size_t j = i + 1; j < letters_.size(); ++j) {
                if (letters_[i] == letters_[j]) {
                    throw Error(std::string("duplicate letter '") + letters_[i] + "' in alphabet");
                }
            }
        }
    }

    std::size_t size() const { return letters_.size(); }
    char letter(std::size_t i) const { return letters_[i]; }
    const std::vector<char>& letters() const { return letters_; }

    std::optional<std::size_t> index_of(char c) const {
        auto it = std::find(letters_.begin(), letters_.end(), c);
        if (it == letters_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - letters_.begin());
    }

    bool contains(char c) const { return index_of(c).has_value(); }

    std::size_t require(char c) const {
        auto i = index_of(c);
        if (!i) throw UnknownLetterError(std::string("unknown letter '") + c + "'");
        return *i;
    }

    /// Checks that every character of `w` is a letter; returns `w` unchanged.
    const std::string& require_word(const std::string& w) const {
        for (char c : w) require(c);
        return w;
    }

    bool operator==(const Alphabet& other) const { return letters_ == other.letters_; }
    bool operator!=(const Alphabet& other) const { return !(*this == other); }

private:
    std::vector<char> letters_;
};

}  // namespace cfder

#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "floq/error.hpp"
#include "floq/kg.hpp"

namespace floq {

// Per-entity membership scores in [0,1]. Kept as a plain vector; length must
// match the graph's entity count wherever one is in play.
using FuzzySet = std::vector<double>;

inline void check_fuzzy(const FuzzySet& x, std::size_t expected_len, const char* what) {
    require(x.size() == expected_len, std::string(what) + ": fuzzy set length mismatch");
    for (double v : x) {
        require(v >= 0.0 && v <= 1.0, std::string(what) + ": fuzzy score outside [0,1]");
    }
}

// Product-logic conjunction: elementwise x*y.
inline FuzzySet t_norm(const FuzzySet& x, const FuzzySet& y) {
    require(x.size() == y.size(), "fuzzy error: t_norm length mismatch");
    FuzzySet out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * y[i];
    }
    return out;
}

// Product-logic disjunction: elementwise x + y - x*y, clamped into [0,1]
// against rounding at the boundary.
inline FuzzySet t_conorm(const FuzzySet& x, const FuzzySet& y) {
    require(x.size() == y.size(), "fuzzy error: t_conorm length mismatch");
    FuzzySet out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::clamp(x[i] + y[i] - x[i] * y[i], 0.0, 1.0);
    }
    return out;
}

// Complement against the all-ones universe: elementwise 1 - x.
inline FuzzySet negate(const FuzzySet& x) {
    FuzzySet out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = 1.0 - x[i];
    }
    return out;
}

inline FuzzySet one_hot(std::size_t n, EntityId v) {
    FuzzySet out(n, 0.0);
    out.at(v) = 1.0;
    return out;
}

// Entities with a strictly positive score, sorted ascending.
inline EntitySet support(const FuzzySet& x) {
    EntitySet out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) {
            out.push_back(static_cast<EntityId>(i));
        }
    }
    return out;
}

inline FuzzySet indicator(std::size_t n, const EntitySet& members) {
    FuzzySet out(n, 0.0);
    for (EntityId v : members) {
        out.at(v) = 1.0;
    }
    return out;
}

}  // namespace floq

#pragma once

#include <algorithm>
#include <cmath>

namespace blockevo {

// Distance pair for one predicate evaluation: how far the evaluation was
// from coming out true / false. Exactly one side is 0.
struct DistPair {
    bool value = false;
    double toTrue = 0;
    double toFalse = 0;
};

// Korel-style relational distances with K = 1 on strict violations.
// a > b: true-dist = b - a + 1 if a <= b else 0; to flip a true strict
// comparison to false only the raw difference is needed.
inline DistPair gtDistance(double a, double b) {
    DistPair d;
    d.value = a > b;
    d.toTrue = d.value ? 0.0 : (b - a + 1.0);
    d.toFalse = d.value ? (a - b) : 0.0;
    if (d.value && d.toFalse <= 0) d.toFalse = 1.0; // degenerate fp guard
    return d;
}

inline DistPair ltDistance(double a, double b) {
    DistPair d;
    d.value = a < b;
    d.toTrue = d.value ? 0.0 : (a - b + 1.0);
    d.toFalse = d.value ? (b - a) : 0.0;
    if (d.value && d.toFalse <= 0) d.toFalse = 1.0;
    return d;
}

inline DistPair eqDistance(double a, double b) {
    DistPair d;
    d.value = a == b;
    d.toTrue = std::fabs(a - b);
    d.toFalse = d.value ? 1.0 : 0.0;
    return d;
}

// String equality has no useful gradient; both sides are 0/1.
inline DistPair eqStringDistance(bool equal) {
    return DistPair{equal, equal ? 0.0 : 1.0, equal ? 1.0 : 0.0};
}

inline DistPair boolDistance(bool v) {
    return DistPair{v, v ? 0.0 : 1.0, v ? 1.0 : 0.0};
}

// and: both children must hold -> sum of true-dists; either false side
// suffices to fail -> min of false-dists.
inline DistPair andDistance(const DistPair& a, const DistPair& b) {
    DistPair d;
    d.value = a.value && b.value;
    d.toTrue = a.toTrue + b.toTrue;
    d.toFalse = std::min(a.toFalse, b.toFalse);
    return d;
}

inline DistPair orDistance(const DistPair& a, const DistPair& b) {
    DistPair d;
    d.value = a.value || b.value;
    d.toTrue = std::min(a.toTrue, b.toTrue);
    d.toFalse = a.toFalse + b.toFalse;
    return d;
}

inline DistPair notDistance(const DistPair& a) {
    return DistPair{!a.value, a.toFalse, a.toTrue};
}

// Normalisation into [0, 1): alpha(d) = d / (d + 1).
inline double normalize(double d) {
    if (d < 0) d = 0;
    if (std::isinf(d)) return 1.0;
    return d / (d + 1.0);
}

} // namespace blockevo

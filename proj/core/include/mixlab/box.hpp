#pragma once

#include "mixlab/common.hpp"
#include "mixlab/rng.hpp"

#include <vector>

namespace mixlab {

/// Axis-aligned box in R^d. Houses the compact state and noise supports.
class Box {
public:
    Box() = default;
    Box(Vec lo, Vec hi);

    /// [-r, r]^d
    static Box cube(double r, int dim);

    int dim() const { return static_cast<int>(lo_.size()); }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }

    double volume() const;
    double diameter() const;
    bool contains(const Vec& x, double tol = 0.0) const;
    Vec clamp(const Vec& x) const;
    Vec center() const { return 0.5 * (lo_ + hi_); }
    Vec sample(RngStream& rng) const;

    /// Cartesian product of two boxes (state x noise, path segments, ...).
    static Box product(const Box& a, const Box& b);
    static Box power(const Box& a, int k);

private:
    Vec lo_, hi_;
};

} // namespace mixlab

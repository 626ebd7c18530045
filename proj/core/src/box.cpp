#include "mixlab/box.hpp"

#include <cmath>

namespace mixlab {

Box::Box(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size() || lo_.size() == 0)
        throw ConfigError("Box: lo/hi dimension mismatch");
    for (int i = 0; i < lo_.size(); ++i)
        if (!(lo_[i] < hi_[i]))
            throw ConfigError("Box: lo[" + std::to_string(i) + "] must be < hi");
}

Box Box::cube(double r, int dim) {
    return Box(Vec::Constant(dim, -r), Vec::Constant(dim, r));
}

double Box::volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi_[i] - lo_[i];
    return v;
}

double Box::diameter() const { return (hi_ - lo_).norm(); }

bool Box::contains(const Vec& x, double tol) const {
    if (x.size() != lo_.size()) return false;
    for (int i = 0; i < dim(); ++i)
        if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
    return true;
}

Vec Box::clamp(const Vec& x) const {
    Vec y = x;
    for (int i = 0; i < dim(); ++i) {
        if (y[i] < lo_[i]) y[i] = lo_[i];
        if (y[i] > hi_[i]) y[i] = hi_[i];
    }
    return y;
}

Vec Box::sample(RngStream& rng) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = rng.uniform(lo_[i], hi_[i]);
    return x;
}

Box Box::product(const Box& a, const Box& b) {
    Vec lo(a.dim() + b.dim()), hi(a.dim() + b.dim());
    lo << a.lo_, b.lo_;
    hi << a.hi_, b.hi_;
    return Box(lo, hi);
}

Box Box::power(const Box& a, int k) {
    Box out = a;
    for (int i = 1; i < k; ++i) out = product(out, a);
    return out;
}

} // namespace mixlab

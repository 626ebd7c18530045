#include "mixlab/grid_density.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

namespace mixlab {

GridDensity::GridDensity(Box box, std::vector<int> cells_per_axis)
    : box_(std::move(box)), cells_(std::move(cells_per_axis)) {
    if (static_cast<int>(cells_.size()) != box_.dim())
        throw ConfigError("GridDensity: cells_per_axis size != box dim");
    std::size_t n = 1;
    widths_.resize(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        if (cells_[i] <= 0) throw ConfigError("GridDensity: cells must be positive");
        n *= static_cast<std::size_t>(cells_[i]);
        widths_[i] = (box_.hi()[static_cast<int>(i)] - box_.lo()[static_cast<int>(i)]) / cells_[i];
    }
    values_.assign(n, 0.0);
    cell_volume_ = 1.0;
    for (double w : widths_) cell_volume_ *= w;
}

double GridDensity::total_mass() const {
    double m = 0.0;
    for (double v : values_) m += v;
    return m * cell_volume_;
}

double GridDensity::normalize() {
    double m = total_mass();
    if (m < 1e-300) throw EmptyMeasure("GridDensity::normalize: zero total mass");
    for (double& v : values_) v /= m;
    return m;
}

std::vector<int> GridDensity::unflatten(std::size_t flat) const {
    std::vector<int> idx(cells_.size());
    for (std::size_t i = cells_.size(); i-- > 0;) {
        idx[i] = static_cast<int>(flat % static_cast<std::size_t>(cells_[i]));
        flat /= static_cast<std::size_t>(cells_[i]);
    }
    return idx;
}

std::size_t GridDensity::flatten(const std::vector<int>& idx) const {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < cells_.size(); ++i)
        flat = flat * static_cast<std::size_t>(cells_[i]) + static_cast<std::size_t>(idx[i]);
    return flat;
}

Vec GridDensity::cell_center(std::size_t flat) const {
    auto idx = unflatten(flat);
    Vec c(box_.dim());
    for (int i = 0; i < box_.dim(); ++i)
        c[i] = box_.lo()[i] + (idx[static_cast<std::size_t>(i)] + 0.5) * widths_[static_cast<std::size_t>(i)];
    return c;
}

bool GridDensity::try_locate(const Vec& x, std::size_t& flat) const {
    if (x.size() != box_.dim()) return false;
    std::vector<int> idx(cells_.size());
    for (int i = 0; i < box_.dim(); ++i) {
        double t = (x[i] - box_.lo()[i]) / widths_[static_cast<std::size_t>(i)];
        int j = static_cast<int>(std::floor(t));
        if (j == cells_[static_cast<std::size_t>(i)] && x[i] <= box_.hi()[i] + 1e-12)
            j = cells_[static_cast<std::size_t>(i)] - 1;  // right edge belongs to the last cell
        if (j < 0 || j >= cells_[static_cast<std::size_t>(i)]) return false;
        idx[static_cast<std::size_t>(i)] = j;
    }
    flat = flatten(idx);
    return true;
}

std::size_t GridDensity::locate(const Vec& x) const {
    std::size_t flat;
    if (!try_locate(x, flat)) throw SampleOutOfBox("GridDensity::locate: point outside box");
    return flat;
}

bool GridDensity::same_support(const GridDensity& other) const {
    if (cells_ != other.cells_) return false;
    return (box_.lo() - other.box_.lo()).cwiseAbs().maxCoeff() < 1e-12 &&
           (box_.hi() - other.box_.hi()).cwiseAbs().maxCoeff() < 1e-12;
}

Vec GridDensity::sample(RngStream& rng) const {
    double m = total_mass();
    if (m < 1e-300) throw EmptyMeasure("GridDensity::sample: zero total mass");
    double u = rng.uniform01() * m;
    double acc = 0.0;
    std::size_t chosen = values_.size() - 1;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        acc += values_[i] * cell_volume_;
        if (u < acc) {
            chosen = i;
            break;
        }
    }
    Vec c = cell_center(chosen);
    for (int i = 0; i < box_.dim(); ++i)
        c[i] += (rng.uniform01() - 0.5) * widths_[static_cast<std::size_t>(i)];
    return c;
}

namespace {
template <class T> void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T> T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
} // namespace

// Little-endian binary layout: dim, cells per axis, box bounds, row-major values.
void GridDensity::write_binary(std::ostream& os) const {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(box_.dim()));
    for (int c : cells_) put<std::uint32_t>(os, static_cast<std::uint32_t>(c));
    for (int i = 0; i < box_.dim(); ++i) put<double>(os, box_.lo()[i]);
    for (int i = 0; i < box_.dim(); ++i) put<double>(os, box_.hi()[i]);
    for (double v : values_) put<double>(os, v);
}

GridDensity GridDensity::read_binary(std::istream& is) {
    auto dim = get<std::uint32_t>(is);
    std::vector<int> cells(dim);
    for (auto& c : cells) c = static_cast<int>(get<std::uint32_t>(is));
    Vec lo(dim), hi(dim);
    for (std::uint32_t i = 0; i < dim; ++i) lo[i] = get<double>(is);
    for (std::uint32_t i = 0; i < dim; ++i) hi[i] = get<double>(is);
    GridDensity g(Box(lo, hi), cells);
    for (auto& v : g.values_) v = get<double>(is);
    if (!is) throw Error("GridDensity::read_binary: truncated stream");
    return g;
}

void GridDensity::write_csv(std::ostream& os) const {
    for (int i = 0; i < box_.dim(); ++i) os << "x" << i << ",";
    os << "density\n";
    char buf[64];
    for (std::size_t f = 0; f < values_.size(); ++f) {
        Vec c = cell_center(f);
        for (int i = 0; i < box_.dim(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", c[i]);
            os << buf << ",";
        }
        std::snprintf(buf, sizeof buf, "%.17g", values_[f]);
        os << buf << "\n";
    }
}

} // namespace mixlab

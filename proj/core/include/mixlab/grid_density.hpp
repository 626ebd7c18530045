#pragma once

#include "mixlab/box.hpp"
#include "mixlab/rng.hpp"

#include <iosfwd>
#include <vector>

namespace mixlab {

/// Nonnegative density on a uniform rectangular grid over a box.
/// Values are densities (units 1/volume); cell probability = value * cellVolume.
class GridDensity {
public:
    GridDensity() = default;
    GridDensity(Box box, std::vector<int> cells_per_axis);

    const Box& box() const { return box_; }
    const std::vector<int>& cells_per_axis() const { return cells_; }
    std::size_t cell_count() const { return values_.size(); }
    double cell_volume() const { return cell_volume_; }

    double value(std::size_t flat) const { return values_[flat]; }
    double& value(std::size_t flat) { return values_[flat]; }
    double prob(std::size_t flat) const { return values_[flat] * cell_volume_; }
    const std::vector<double>& values() const { return values_; }

    double total_mass() const;
    /// Scales so total mass is 1. Returns the pre-normalization mass.
    double normalize();

    Vec cell_center(std::size_t flat) const;
    double cell_width(int axis) const { return widths_[axis]; }
    /// Flat index of the cell containing x; throws SampleOutOfBox otherwise.
    std::size_t locate(const Vec& x) const;
    bool try_locate(const Vec& x, std::size_t& flat) const;

    std::vector<int> unflatten(std::size_t flat) const;
    std::size_t flatten(const std::vector<int>& idx) const;

    bool same_support(const GridDensity& other) const;

    /// Inverse-CDF draw of a point from the density (uniform within a cell).
    Vec sample(RngStream& rng) const;

    void write_binary(std::ostream& os) const;
    static GridDensity read_binary(std::istream& is);
    void write_csv(std::ostream& os) const;

private:
    Box box_;
    std::vector<int> cells_;
    std::vector<double> widths_;
    std::vector<double> values_;
    double cell_volume_ = 0.0;
};

} // namespace mixlab

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "relmap/volume.hpp"

namespace relmap {

struct SlicParams {
    std::size_t n_segments = 100;
    /// Spatial-vs-intensity weight; tuned for [0, 1] intensities.
    double compactness = 0.1;
    std::size_t max_iterations = 10;
    bool enforce_connectivity = true;
    SequenceKind seed_sequence = SequenceKind::T2w;

    /// Throws ValidationError.
    void validate() const;
    friend bool operator==(const SlicParams&, const SlicParams&) = default;
};

/// Partition of a volume into `count()` labels, each occurring at least once.
class SuperpixelLabelMap {
public:
    SuperpixelLabelMap() = default;
    /// Validates the partition and occupancy invariants; throws ValidationError.
    SuperpixelLabelMap(Dims dims, std::vector<std::uint32_t> labels, std::size_t count);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t count() const noexcept { return count_; }
    std::span<const std::uint32_t> labels() const noexcept { return labels_; }
    std::uint32_t operator[](std::size_t i) const noexcept { return labels_[i]; }

    /// Flat voxel indices per label, each list ascending.
    std::vector<std::vector<std::size_t>> members() const;

    friend bool operator==(const SuperpixelLabelMap&, const SuperpixelLabelMap&) = default;

private:
    Dims dims_;
    std::vector<std::uint32_t> labels_;
    std::size_t count_ = 0;
};

/// Grid step S used for seeding, search windows and the orphan threshold.
std::size_t slic_grid_step(const Dims& dims, std::size_t n_segments);

/// 3D SLIC on a single [0, 1]-normalized volume.
SuperpixelLabelMap slic3d(const ScalarVolume& volume, const SlicParams& params);

BinaryMask superpixel_mask(const SuperpixelLabelMap& labels, std::size_t id);

struct SuperpixelStats {
    std::size_t voxel_count = 0;
    double mean_intensity = 0.0;
    /// (z, y, x)
    std::array<double, 3> centroid{};
};

std::vector<SuperpixelStats> superpixel_stats(const SuperpixelLabelMap& labels, const ScalarVolume& volume);

/// True when every label's voxel set is 6-connected.
bool labels_are_connected(const SuperpixelLabelMap& labels);

}  // namespace relmap

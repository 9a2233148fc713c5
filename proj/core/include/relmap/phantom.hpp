#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "relmap/evaluation.hpp"

namespace relmap {

/// Synthetic brain-tumour stand-in: uniform noise in every sequence, plus an ellipsoid of elevated
/// intensity in the informative sequence only.
struct PhantomParams {
    Dims dims{64, 64, 64};
    /// Ellipsoid semi-axes (z, y, x) in voxels. The default covers ~1.9% of a 64³ volume.
    std::array<double, 3> radii{12.0, 10.0, 10.0};
    /// Ellipsoid centre (z, y, x); drawn uniformly at least max(radii) + 2 from each face when absent.
    std::optional<std::array<double, 3>> centre;
    SequenceKind informative = SequenceKind::T2w;
    /// Informative sequence: background U(bg_low, bg_high), ellipsoid U(tumour_low, tumour_high).
    float background_low = 0.05f;
    float background_high = 0.35f;
    float tumour_low = 0.8f;
    float tumour_high = 1.0f;
    std::uint64_t seed = 1;
};

/// Normalized complete volume plus the ellipsoid as ground truth.
EvalCase make_phantom(const PhantomParams& params, std::string id = {});

}  // namespace relmap

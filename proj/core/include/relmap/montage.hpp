#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "relmap/relevance.hpp"
#include "relmap/volume.hpp"

namespace relmap {

enum class SliceAxis { Z, Y, X };

SliceAxis slice_axis_from_string(std::string_view name);

/// Heat ramp for relevance overlays: entry i is
/// (min(255, 3i), clamp(3i - 255, 0, 255), clamp(3i - 510, 0, 255)).
const std::array<std::array<std::uint8_t, 3>, 256>& heat_ramp();

using MontageOverlay = std::variant<std::monostate, const BinaryMask*, const RelevanceMap*>;

/// Row-major pixels; 1 channel (gray) without overlay, 4 (RGBA) with one.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> pixels;
};

/// Slices laid out on a grid of ceil(sqrt(n)) columns. Each tile is min-max scaled to 0..255
/// on its own; relevance overlays are alpha-blended through `heat_ramp()` (alpha 0.6 at score 100,
/// untouched at 0), masks are tinted red with an opaque red contour.
Image compose_montage(const ScalarVolume& volume, const MontageOverlay& overlay, SliceAxis axis,
                      std::span<const std::size_t> slices);

std::vector<std::uint8_t> encode_png(const Image& image);

/// compose_montage + encode_png.
std::vector<std::uint8_t> render_montage(const ScalarVolume& volume, const MontageOverlay& overlay, SliceAxis axis,
                                         std::span<const std::size_t> slices);

}  // namespace relmap

#include "relmap/montage.hpp"

#include <algorithm>
#include <cmath>

#include <png.h>

#include "relmap/errors.hpp"

namespace relmap {

SliceAxis slice_axis_from_string(std::string_view name) {
    if (name == "z") return SliceAxis::Z;
    if (name == "y") return SliceAxis::Y;
    if (name == "x") return SliceAxis::X;
    throw ValidationError("unknown slice axis '" + std::string(name) + "' (expected x, y or z)");
}

const std::array<std::array<std::uint8_t, 3>, 256>& heat_ramp() {
    static const auto ramp = [] {
        std::array<std::array<std::uint8_t, 3>, 256> r{};
        for (int i = 0; i < 256; ++i) {
            r[std::size_t(i)] = {std::uint8_t(std::min(255, 3 * i)), std::uint8_t(std::clamp(3 * i - 255, 0, 255)),
                                 std::uint8_t(std::clamp(3 * i - 510, 0, 255))};
        }
        return r;
    }();
    return ramp;
}

namespace {

struct SliceGeometry {
    std::size_t rows;
    std::size_t cols;
    std::size_t depth;
};

SliceGeometry geometry(const Dims& d, SliceAxis axis) {
    switch (axis) {
        case SliceAxis::Z: return {d.height, d.width, d.depth};
        case SliceAxis::Y: return {d.depth, d.width, d.height};
        case SliceAxis::X: return {d.depth, d.height, d.width};
    }
    return {0, 0, 0};
}

std::size_t voxel_index(const Dims& d, SliceAxis axis, std::size_t slice, std::size_t row, std::size_t col) {
    switch (axis) {
        case SliceAxis::Z: return d.index(slice, row, col);
        case SliceAxis::Y: return d.index(row, slice, col);
        case SliceAxis::X: return d.index(row, col, slice);
    }
    return 0;
}

std::uint8_t blend(std::uint8_t base, std::uint8_t top, unsigned alpha) {
    return std::uint8_t((unsigned(base) * (255 - alpha) + unsigned(top) * alpha + 127) / 255);
}

}  // namespace

Image compose_montage(const ScalarVolume& volume, const MontageOverlay& overlay, SliceAxis axis,
                      std::span<const std::size_t> slices) {
    const Dims& d = volume.dims();
    if (slices.empty()) throw ValidationError("montage needs at least one slice");
    const auto g = geometry(d, axis);
    for (auto s : slices) {
        if (s >= g.depth) {
            throw ValidationError("slice index " + std::to_string(s) + " outside [0, " + std::to_string(g.depth) + ")");
        }
    }
    const auto* mask = std::holds_alternative<const BinaryMask*>(overlay) ? std::get<const BinaryMask*>(overlay) : nullptr;
    const auto* relmap =
        std::holds_alternative<const RelevanceMap*>(overlay) ? std::get<const RelevanceMap*>(overlay) : nullptr;
    if ((mask && mask->dims() != d) || (relmap && relmap->dims() != d)) {
        throw DimensionError("overlay dims differ from volume " + to_string(d));
    }

    const std::size_t columns = std::size_t(std::ceil(std::sqrt(double(slices.size()))));
    const std::size_t grid_rows = (slices.size() + columns - 1) / columns;
    Image image;
    image.channels = (mask || relmap) ? 4 : 1;
    image.width = columns * g.cols;
    image.height = grid_rows * g.rows;
    image.pixels.assign(image.width * image.height * image.channels, 0);
    if (image.channels == 4) {
        for (std::size_t p = 3; p < image.pixels.size(); p += 4) image.pixels[p] = 255;
    }

    for (std::size_t n = 0; n < slices.size(); ++n) {
        const std::size_t s = slices[n];
        const std::size_t top = (n / columns) * g.rows;
        const std::size_t left = (n % columns) * g.cols;

        float lo = volume[voxel_index(d, axis, s, 0, 0)];
        float hi = lo;
        for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < g.cols; ++c) {
                const float v = volume[voxel_index(d, axis, s, r, c)];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }

        for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < g.cols; ++c) {
                const std::size_t idx = voxel_index(d, axis, s, r, c);
                const auto gray = hi > lo ? std::uint8_t(std::lround(255.0 * (double(volume[idx]) - lo) / (double(hi) - lo)))
                                          : std::uint8_t(0);
                std::uint8_t* px = &image.pixels[((top + r) * image.width + left + c) * image.channels];
                if (image.channels == 1) {
                    px[0] = gray;
                    continue;
                }
                px[0] = px[1] = px[2] = gray;
                if (relmap) {
                    const unsigned score = relmap->voxel_map[idx];
                    if (score == 0) continue;
                    const auto& heat = heat_ramp()[(score * 255 + 50) / 100];
                    const unsigned alpha = score * 153 / 100;
                    for (int k = 0; k < 3; ++k) px[k] = blend(gray, heat[std::size_t(k)], alpha);
                } else if ((*mask)[idx]) {
                    bool edge = r == 0 || c == 0 || r + 1 == g.rows || c + 1 == g.cols;
                    if (!edge) {
                        edge = !(*mask)[voxel_index(d, axis, s, r - 1, c)] || !(*mask)[voxel_index(d, axis, s, r + 1, c)] ||
                               !(*mask)[voxel_index(d, axis, s, r, c - 1)] || !(*mask)[voxel_index(d, axis, s, r, c + 1)];
                    }
                    const unsigned alpha = edge ? 255 : 96;
                    px[0] = blend(gray, 255, alpha);
                    px[1] = blend(gray, 0, alpha);
                    px[2] = blend(gray, 0, alpha);
                }
            }
        }
    }
    return image;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 4 ? PNG_FORMAT_RGBA : PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("png sizing failed: ") + png.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("png encoding failed: ") + png.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> render_montage(const ScalarVolume& volume, const MontageOverlay& overlay, SliceAxis axis,
                                         std::span<const std::size_t> slices) {
    return encode_png(compose_montage(volume, overlay, axis, slices));
}

}  // namespace relmap

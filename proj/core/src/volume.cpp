#include "relmap/volume.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "relmap/errors.hpp"

namespace relmap {

namespace {

constexpr std::array<std::string_view, kSequenceCount> kSequenceNames = {"T1w", "T1wCE", "T2w",
                                                                         "FLAIR"};

std::size_t slot(SequenceKind kind) noexcept { return static_cast<std::size_t>(kind); }

void require_finite(std::span<const float> data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw ValidationError("non-finite voxel value at flat index " + std::to_string(i));
        }
    }
}

}  // namespace

std::string_view to_string(SequenceKind kind) noexcept { return kSequenceNames[slot(kind)]; }

std::optional<SequenceKind> parse_sequence(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kSequenceCount; ++i) {
        if (kSequenceNames[i] == name) return kAllSequences[i];
    }
    return std::nullopt;
}

SequenceKind sequence_from_string(std::string_view name) {
    if (auto kind = parse_sequence(name)) return *kind;
    throw ValidationError("unknown sequence '" + std::string(name) +
                          "' (expected T1w, T1wCE, T2w or FLAIR)");
}

std::string to_string(const Dims& dims) {
    return std::to_string(dims.depth) + "x" + std::to_string(dims.height) + "x" +
           std::to_string(dims.width);
}

// ---------------------------------------------------------------------------

ScalarVolume::ScalarVolume(Dims dims) : dims_(dims), data_(dims.voxels(), 0.0f) {}

ScalarVolume::ScalarVolume(Dims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.voxels()) {
        throw DimensionError("volume data holds " + std::to_string(data_.size()) +
                             " voxels but dims " + to_string(dims_) + " require " +
                             std::to_string(dims_.voxels()));
    }
    require_finite(data_);
}

float ScalarVolume::min() const {
    if (data_.empty()) throw ValidationError("min of an empty volume");
    return *std::min_element(data_.begin(), data_.end());
}

float ScalarVolume::max() const {
    if (data_.empty()) throw ValidationError("max of an empty volume");
    return *std::max_element(data_.begin(), data_.end());
}

// ---------------------------------------------------------------------------

BinaryMask::BinaryMask(Dims dims, bool fill) : dims_(dims), bits_(dims.voxels(), fill ? 1 : 0) {}

BinaryMask::BinaryMask(Dims dims, std::vector<std::uint8_t> bits) : dims_(dims), bits_(std::move(bits)) {
    if (bits_.size() != dims_.voxels()) {
        throw DimensionError("mask holds " + std::to_string(bits_.size()) + " voxels but dims " +
                             to_string(dims_) + " require " + std::to_string(dims_.voxels()));
    }
    for (auto& b : bits_) {
        if (b > 1) throw ValidationError("mask byte outside {0,1}");
    }
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> BinaryMask::indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------

void MultiSequenceVolume::set(SequenceKind kind, ScalarVolume volume) {
    const bool first = sequence_count() == 0 || (sequence_count() == 1 && has(kind));
    if (!first && volume.dims() != dims_) {
        throw DimensionError("sequence " + std::string(to_string(kind)) + " has dims " +
                             to_string(volume.dims()) + ", expected " + to_string(dims_));
    }
    dims_ = volume.dims();
    sequences_[slot(kind)] = std::move(volume);
}

bool MultiSequenceVolume::has(SequenceKind kind) const noexcept {
    return sequences_[slot(kind)].has_value();
}

const ScalarVolume& MultiSequenceVolume::get(SequenceKind kind) const {
    if (!has(kind)) throw ValidationError("sequence " + std::string(to_string(kind)) + " is absent");
    return *sequences_[slot(kind)];
}

ScalarVolume& MultiSequenceVolume::get(SequenceKind kind) {
    if (!has(kind)) throw ValidationError("sequence " + std::string(to_string(kind)) + " is absent");
    return *sequences_[slot(kind)];
}

std::size_t MultiSequenceVolume::sequence_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(sequences_.begin(), sequences_.end(), [](const auto& s) { return s.has_value(); }));
}

std::vector<SequenceKind> MultiSequenceVolume::present() const {
    std::vector<SequenceKind> out;
    for (auto kind : kAllSequences) {
        if (has(kind)) out.push_back(kind);
    }
    return out;
}

// ---------------------------------------------------------------------------

ScalarVolume min_max_normalize(const ScalarVolume& v) {
    if (v.size() == 0) throw ValidationError("cannot normalize an empty volume");
    require_finite(v.data());
    const auto [lo_it, hi_it] = std::minmax_element(v.data().begin(), v.data().end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    std::vector<float> out(v.size(), 0.0f);
    if (hi == lo) {
        spdlog::warn("constant volume ({}) normalized to zeros", lo);
        return ScalarVolume(v.dims(), std::move(out));
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>((static_cast<double>(v[i]) - lo) / range);
    }
    return ScalarVolume(v.dims(), std::move(out));
}

MultiSequenceVolume normalize_all(const MultiSequenceVolume& mv) {
    MultiSequenceVolume out;
    for (auto kind : mv.present()) out.set(kind, min_max_normalize(mv.get(kind)));
    return out;
}

std::array<std::size_t, 3> center_crop_offsets(const Dims& source, const Dims& target) {
    if (target.depth > source.depth || target.height > source.height || target.width > source.width) {
        throw DimensionError("crop target " + to_string(target) + " exceeds source " + to_string(source));
    }
    return {(source.depth - target.depth) / 2, (source.height - target.height) / 2,
            (source.width - target.width) / 2};
}

namespace {

template <typename T>
std::vector<T> crop_buffer(std::span<const T> src, const Dims& source, const Dims& target) {
    const auto [z0, y0, x0] = center_crop_offsets(source, target);
    std::vector<T> out(target.voxels());
    for (std::size_t z = 0; z < target.depth; ++z) {
        for (std::size_t y = 0; y < target.height; ++y) {
            const auto* row = src.data() + source.index(z + z0, y + y0, x0);
            std::copy(row, row + target.width, out.data() + target.index(z, y, 0));
        }
    }
    return out;
}

}  // namespace

ScalarVolume center_crop(const ScalarVolume& v, const Dims& target) {
    return ScalarVolume(target, crop_buffer<float>(v.data(), v.dims(), target));
}

BinaryMask center_crop(const BinaryMask& m, const Dims& target) {
    return BinaryMask(target, crop_buffer<std::uint8_t>(m.bytes(), m.dims(), target));
}

MultiSequenceVolume center_crop(const MultiSequenceVolume& mv, const Dims& target) {
    MultiSequenceVolume out;
    for (auto kind : mv.present()) out.set(kind, center_crop(mv.get(kind), target));
    return out;
}

std::string_view to_string(PreprocessOrder order) noexcept {
    return order == PreprocessOrder::CropThenNormalize ? "crop-then-normalize" : "normalize-then-crop";
}

PreprocessOrder preprocess_order_from_string(std::string_view name) {
    if (name == "crop-then-normalize") return PreprocessOrder::CropThenNormalize;
    if (name == "normalize-then-crop") return PreprocessOrder::NormalizeThenCrop;
    throw ValidationError("unknown preprocessing order '" + std::string(name) + "'");
}

MultiSequenceVolume preprocess(const MultiSequenceVolume& mv, const std::optional<Dims>& crop_target,
                               PreprocessOrder order) {
    if (!crop_target) return normalize_all(mv);
    if (order == PreprocessOrder::CropThenNormalize) return normalize_all(center_crop(mv, *crop_target));
    return center_crop(normalize_all(mv), *crop_target);
}

}  // namespace relmap

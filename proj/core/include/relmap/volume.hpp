#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relmap {

/// MRI sequence. Serialization order is the declaration order.
enum class SequenceKind : std::uint8_t { T1w = 0, T1wCE = 1, T2w = 2, FLAIR = 3 };

inline constexpr std::size_t kSequenceCount = 4;
inline constexpr std::array<SequenceKind, kSequenceCount> kAllSequences = {
    SequenceKind::T1w, SequenceKind::T1wCE, SequenceKind::T2w, SequenceKind::FLAIR};

std::string_view to_string(SequenceKind kind) noexcept;
/// Case-sensitive canonical names ("T1w", "T1wCE", "T2w", "FLAIR"); nullopt otherwise.
std::optional<SequenceKind> parse_sequence(std::string_view name) noexcept;
/// Like parse_sequence but throws ValidationError.
SequenceKind sequence_from_string(std::string_view name);

/// Voxel counts per axis, C-order (z, y, x).
struct Dims {
    std::size_t depth = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    constexpr std::size_t voxels() const noexcept { return depth * height * width; }
    constexpr std::size_t index(std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return (z * height + y) * width + x;
    }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& dims);

class ScalarVolume {
public:
    ScalarVolume() = default;
    /// Zero-filled volume.
    explicit ScalarVolume(Dims dims);
    /// Throws DimensionError on length mismatch and ValidationError on non-finite values.
    ScalarVolume(Dims dims, std::vector<float> data);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    float at(std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return data_[dims_.index(z, y, x)];
    }
    float& at(std::size_t z, std::size_t y, std::size_t x) noexcept {
        return data_[dims_.index(z, y, x)];
    }
    float operator[](std::size_t i) const noexcept { return data_[i]; }
    float& operator[](std::size_t i) noexcept { return data_[i]; }

    float min() const;
    float max() const;

    friend bool operator==(const ScalarVolume&, const ScalarVolume&) = default;

private:
    Dims dims_;
    std::vector<float> data_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    explicit BinaryMask(Dims dims, bool fill = false);
    BinaryMask(Dims dims, std::vector<std::uint8_t> bits);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return bits_.size(); }
    bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
    void set(std::size_t i, bool value) noexcept { bits_[i] = value ? 1 : 0; }
    /// One byte per voxel, each 0 or 1.
    std::span<const std::uint8_t> bytes() const noexcept { return bits_; }

    std::size_t count() const noexcept;
    bool empty_region() const noexcept { return count() == 0; }
    /// Flat indices of set voxels in ascending order.
    std::vector<std::size_t> indices() const;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    Dims dims_;
    std::vector<std::uint8_t> bits_;
};

/// Aligned scalar volumes, at most one per sequence.
class MultiSequenceVolume {
public:
    MultiSequenceVolume() = default;

    /// Adds or replaces a sequence. Throws DimensionError when dims disagree with existing ones.
    void set(SequenceKind kind, ScalarVolume volume);

    bool has(SequenceKind kind) const noexcept;
    const ScalarVolume& get(SequenceKind kind) const;
    ScalarVolume& get(SequenceKind kind);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t sequence_count() const noexcept;
    bool complete() const noexcept { return sequence_count() == kSequenceCount; }
    /// Present sequences in serialization order.
    std::vector<SequenceKind> present() const;

    friend bool operator==(const MultiSequenceVolume&, const MultiSequenceVolume&) = default;

private:
    Dims dims_;
    std::array<std::optional<ScalarVolume>, kSequenceCount> sequences_;
};

/// Maps v to [0, 1]. A constant volume maps to all zeros (with a warning).
ScalarVolume min_max_normalize(const ScalarVolume& v);
MultiSequenceVolume normalize_all(const MultiSequenceVolume& mv);

/// Per-axis start offsets floor((src - tgt) / 2).
std::array<std::size_t, 3> center_crop_offsets(const Dims& source, const Dims& target);
ScalarVolume center_crop(const ScalarVolume& v, const Dims& target);
BinaryMask center_crop(const BinaryMask& m, const Dims& target);
MultiSequenceVolume center_crop(const MultiSequenceVolume& mv, const Dims& target);

enum class PreprocessOrder { CropThenNormalize, NormalizeThenCrop };

std::string_view to_string(PreprocessOrder order) noexcept;
PreprocessOrder preprocess_order_from_string(std::string_view name);

/// Crop (when a target is given) and normalize in the requested order.
MultiSequenceVolume preprocess(const MultiSequenceVolume& mv, const std::optional<Dims>& crop_target,
                               PreprocessOrder order);

}  // namespace relmap

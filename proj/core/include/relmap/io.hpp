#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "relmap/relevance.hpp"
#include "relmap/superpixel.hpp"
#include "relmap/volume.hpp"

namespace relmap {

namespace fs = std::filesystem;

struct Bundle {
    MultiSequenceVolume volume;
    std::optional<BinaryMask> ground_truth;
    /// Directory name unless meta.json carries "case_id".
    std::string case_id;
};

/// Reads `meta.json` plus the raw `.f32`/`.u8` files it references. Throws BundleError.
Bundle load_bundle(const fs::path& dir);

/// Writes `meta.json`, one `<sequence>.f32` per present sequence, and `seg.u8` when a mask is given.
void save_bundle(const fs::path& dir, const MultiSequenceVolume& volume, const std::optional<BinaryMask>& ground_truth,
                 const std::string& case_id = {});

/// One byte (0/1) per voxel, C-order.
void save_mask(const BinaryMask& mask, const fs::path& path);
BinaryMask load_mask(const fs::path& path, const Dims& dims);

/// `labels.u32` (little-endian uint32, C-order) plus `labels.json` `{"dims","count","params"}`.
void save_labels(const SuperpixelLabelMap& labels, const std::optional<SlicParams>& params, const fs::path& dir);
SuperpixelLabelMap load_labels(const fs::path& dir, std::optional<SlicParams>* params = nullptr);

/// `relmap.json` (scores and provenance), `relmap.u8` (per-voxel 0..100) and the label map it refers to.
void save_relevance(const RelevanceMap& relmap, const fs::path& dir);
RelevanceMap load_relevance(const fs::path& dir);

/// Single-file NIfTI-1 (`.nii` or `.nii.gz`), 3D, datatype uint8/int16/float32/float64.
/// Throws ParseError naming the offending header field.
ScalarVolume load_nifti(const fs::path& path, SequenceKind sequence);

/// Raw little-endian float32 / byte helpers used by the bundle format.
std::vector<float> read_f32(const fs::path& path, std::size_t count);
void write_f32(const fs::path& path, std::span<const float> data);
void write_bytes(const fs::path& path, std::span<const std::uint8_t> data);
void write_text(const fs::path& path, const std::string& text);

}  // namespace relmap

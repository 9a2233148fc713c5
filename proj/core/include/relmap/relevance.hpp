#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relmap/classifier.hpp"
#include "relmap/perturbation.hpp"
#include "relmap/superpixel.hpp"

namespace relmap {

enum class MethodFamily { Blank, Min, Max, Optimal };

std::string_view to_string(MethodFamily family) noexcept;
MethodFamily method_family_from_string(std::string_view name);

struct RelevanceMap {
    std::shared_ptr<const SuperpixelLabelMap> labels;
    /// |p_original - p_perturbed| per superpixel.
    std::vector<double> raw_scores;
    /// Integer 0..100 per superpixel.
    std::vector<std::uint8_t> normalized_scores;
    /// normalized_scores[labels[v]] per voxel.
    std::vector<std::uint8_t> voxel_map;
    MethodFamily method = MethodFamily::Blank;
    double p_original = 0.0;
    /// Set when all raw scores are equal; every normalized score is then 0.
    bool uninformative = false;

    // Provenance.
    std::optional<SlicParams> slic;
    std::string oracle_identity;
    double epsilon = kLossEpsilon;
    /// Winning fill per superpixel (Optimal only).
    std::vector<FillVector> optimal_fills;

    std::size_t count() const noexcept { return raw_scores.size(); }
    const Dims& dims() const { return labels->dims(); }

    /// Checks length and superpixel-constancy invariants; throws InvariantError.
    void validate() const;

    friend bool operator==(const RelevanceMap& a, const RelevanceMap& b);
};

/// round-half-up(100 * (raw - min) / (max - min)); all zeros when max == min.
std::vector<std::uint8_t> normalize_scores(std::span<const double> raw);

struct RelevanceOptions {
    SearchBudget budget;
    /// Processing order of superpixel ids; ascending when empty. Must be a permutation.
    std::vector<std::size_t> order;
    /// Called after each superpixel is scored.
    std::function<void(std::size_t id, const PerturbationOutcome&)> on_superpixel;
};

/// Scores every superpixel by the confidence change its perturbation causes.
RelevanceMap compute_relevance(const MultiSequenceVolume& volume,
                               std::shared_ptr<const SuperpixelLabelMap> labels, const Oracle& oracle,
                               MethodFamily family, const RelevanceOptions& options = {});

/// Superpixel ids by raw score descending, ties by lower id.
std::vector<std::size_t> rank_superpixels(const RelevanceMap& relmap);

/// Voxels whose normalized score is >= threshold (0..100).
BinaryMask threshold_mask(const RelevanceMap& relmap, int threshold);

}  // namespace relmap

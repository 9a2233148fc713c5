#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>

#include "relmap/classifier.hpp"
#include "relmap/volume.hpp"

namespace relmap {

/// Guards the singularity of the loss at zero confidence change.
inline constexpr double kLossEpsilon = 1e-6;

using FillVector = std::array<double, kSequenceCount>;

struct PerturbationMethod {
    enum class Kind { Blank, Min, Max, OptimalFill };

    Kind kind = Kind::Blank;
    /// Per-sequence fill, used only by OptimalFill. Indexed by SequenceKind.
    FillVector fill{};

    static PerturbationMethod blank() { return {Kind::Blank, {}}; }
    static PerturbationMethod min() { return {Kind::Min, {}}; }
    static PerturbationMethod max() { return {Kind::Max, {}}; }
    /// Throws ValidationError unless every value is finite and in [0, 1].
    static PerturbationMethod optimal_fill(const FillVector& fill);

    friend bool operator==(const PerturbationMethod&, const PerturbationMethod&) = default;
};

std::string_view to_string(PerturbationMethod::Kind kind) noexcept;

/// Concrete per-sequence values the method writes into `volume`.
FillVector resolve_fill(const MultiSequenceVolume& volume, const PerturbationMethod& method);

struct PerturbationOutcome {
    PerturbationMethod method;
    double p_original = 0.0;
    double p_perturbed = 0.0;
    double delta = 0.0;
    double loss = 0.0;
};

PerturbationOutcome make_outcome(const PerturbationMethod& method, double p_original, double p_perturbed);

/// Writes the method's fill inside `region` in every present sequence; everything else is copied.
MultiSequenceVolume apply_perturbation(const MultiSequenceVolume& volume, const BinaryMask& region,
                                       const PerturbationMethod& method);

/// 1 / max(|p_original - p_perturbed|, kLossEpsilon)
double perturbation_loss(double p_original, double p_perturbed);
/// Sum of per-pair losses.
double perturbation_loss(std::span<const std::pair<double, double>> pairs);

struct SearchBudget {
    std::size_t coarse_grid_size = 5;
    std::size_t refinement_iterations = 8;
    bool include_baseline_seeds = true;

    void validate() const;
    /// Largest number of perturbed volumes one search may score.
    std::size_t max_oracle_calls() const noexcept {
        return 3 + kSequenceCount * coarse_grid_size + kSequenceCount * 2 * refinement_iterations;
    }
};

/// One scored candidate, emitted in evaluation order.
struct SearchTraceRecord {
    FillVector fill;
    double probability;
    double delta;
};

using SearchTrace = std::function<void(const SearchTraceRecord&)>;

struct FillSearchResult {
    PerturbationMethod method;
    PerturbationOutcome outcome;
    /// Perturbed volumes scored (excludes the optional p_original call).
    std::size_t oracle_calls = 0;
};

/// Black-box search for the per-sequence constant fill that maximizes |Δ| (minimizes the loss).
///
/// Seeds with blank/min/max fills, then a coarse coordinate-wise grid, then coordinate-wise
/// golden-section refinement inside the winning coarse cell. Coordinates are visited in
/// (T1w, T1wCE, T2w, FLAIR) order. Candidates are ranked by (|Δ| desc, fill asc), and repeated
/// fill vectors are scored once. With seeds enabled the result dominates every trivial method.
///
/// `volume` must be complete with intensities in [0, 1]; `region` must be nonempty.
/// When `p_original` is absent it is scored first.
FillSearchResult optimal_fill_search(const MultiSequenceVolume& volume, const BinaryMask& region,
                                     const Oracle& oracle, const SearchBudget& budget,
                                     std::optional<double> p_original = std::nullopt,
                                     const SearchTrace& trace = {});

/// Overload taking the region as ascending flat indices.
FillSearchResult optimal_fill_search(const MultiSequenceVolume& volume, std::span<const std::size_t> region,
                                     const Oracle& oracle, const SearchBudget& budget,
                                     std::optional<double> p_original = std::nullopt,
                                     const SearchTrace& trace = {});

}  // namespace relmap

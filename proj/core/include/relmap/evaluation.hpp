#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relmap/classifier.hpp"
#include "relmap/relevance.hpp"

namespace relmap {

/// 2|a ∩ b| / (|a| + |b|). `b` is the ground truth and must be nonempty.
double dice(const BinaryMask& a, const BinaryMask& b);

inline constexpr int kMinThreshold = 1;
inline constexpr int kMaxThreshold = 100;

struct ThresholdResult {
    int best_threshold = kMinThreshold;
    double dsc = 0.0;
    /// curve[t - 1] is the DSC at threshold t, t in 1..=100.
    std::vector<double> curve;
};

/// Exhaustive sweep over integer thresholds 1..=100; ties resolve to the lowest threshold.
ThresholdResult optimal_threshold_dsc(const RelevanceMap& relmap, const BinaryMask& ground_truth);

/// Entry r - 1 is the DSC of the r-th ranked superpixel alone.
std::vector<double> ranked_dsc(const RelevanceMap& relmap, const BinaryMask& ground_truth, std::size_t max_rank);

/// Entry k - 1 is the DSC of the union of the top-k ranked superpixels.
std::vector<double> cumulative_dsc(const RelevanceMap& relmap, const BinaryMask& ground_truth, std::size_t max_k);

// ---------------------------------------------------------------------------
// Reports

struct CaseDice {
    std::string case_id;
    ThresholdResult result;
};

struct DiceReport {
    std::vector<CaseDice> cases;
    double mean_dsc = 0.0;
};

DiceReport dice_report(const std::vector<std::pair<std::string, const RelevanceMap*>>& maps,
                       const std::vector<const BinaryMask*>& ground_truths);

struct RankReport {
    std::string method;
    /// Mean over cases, indexed by rank - 1.
    std::vector<double> ranked;
    /// Mean over cases, indexed by k - 1.
    std::vector<double> cumulative;
    std::size_t cases = 0;
};

RankReport rank_report(const std::vector<const RelevanceMap*>& maps, const std::vector<const BinaryMask*>& ground_truths,
                       std::size_t max_rank, std::size_t max_k);

/// A case of a labelled dataset: normalized volume plus tumour mask.
struct EvalCase {
    std::string id;
    MultiSequenceVolume volume;
    BinaryMask ground_truth;
};

struct GridSpec {
    std::vector<SequenceKind> sequences;
    std::vector<std::size_t> n_segments;
    std::vector<MethodFamily> methods;
    /// Compactness, iterations and connectivity; sequence and n_segments come from the grid.
    SlicParams slic;
    SearchBudget budget;
    /// Worker threads for the cases of one cell; 0 picks the hardware concurrency.
    std::size_t case_workers = 0;
};

struct GridCell {
    SequenceKind sequence;
    std::size_t n_segments;
    MethodFamily method;
    std::optional<double> mean_dsc;
    std::size_t successes = 0;
    std::size_t failures = 0;
};

struct GridSearchReport {
    GridSpec spec;
    /// Row-major: sequence, then method, then n_segments.
    std::vector<GridCell> cells;
    std::optional<std::size_t> best;
    std::size_t warnings = 0;

    const GridCell& at(SequenceKind sequence, MethodFamily method, std::size_t n_segments) const;
};

/// Builds the oracle bound to one case (e.g. a synthetic oracle over that case's tumour).
using OracleFactory = std::function<std::shared_ptr<const Oracle>(const EvalCase&)>;

GridSearchReport grid_search(const std::vector<EvalCase>& dataset, const GridSpec& spec, const OracleFactory& oracles);

// Serialization: stable key order, no timestamps.
nlohmann::ordered_json to_json(const DiceReport& report, const nlohmann::ordered_json& params);
nlohmann::ordered_json to_json(const RankReport& report, const nlohmann::ordered_json& params);
nlohmann::ordered_json to_json(const GridSearchReport& report, const nlohmann::ordered_json& params);

std::string format_table(const DiceReport& report);
/// Ranked and cumulative tables side by side for several methods (one column each).
std::string format_table(const std::vector<RankReport>& reports);
/// Rows: sequences; columns grouped by method then n_segments.
std::string format_table(const GridSearchReport& report);
/// "T2w/100/blank → 0.4000"
std::string format_best(const GridSearchReport& report);

}  // namespace relmap

#pragma once

#include <array>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relmap/perturbation.hpp"
#include "relmap/relevance.hpp"
#include "relmap/volume.hpp"

namespace relmap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitOracle = 3;
inline constexpr int kExitInternal = 4;

/// Everything a command needs. Loaded from `--config`, then overridden by flags.
struct RunConfig {
    std::vector<std::string> inputs;
    SequenceKind seed_sequence = SequenceKind::T2w;
    std::size_t n_segments = 100;
    double compactness = 0.1;
    std::size_t max_iterations = 10;
    MethodFamily method = MethodFamily::Blank;
    /// "synthetic" or an http(s) endpoint.
    std::string oracle = "synthetic";
    SearchBudget budget;
    std::string out;
    PreprocessOrder preprocess_order = PreprocessOrder::CropThenNormalize;
    std::optional<Dims> crop;

    // Synthetic oracle; its target region is the case's ground truth.
    double gain = 10.0;
    double offset = 0.5;
    std::array<double, kSequenceCount> sequence_weights = {0.0, 0.0, 1.0, 0.0};

    // Remote oracle.
    std::size_t timeout_ms = 30000;
    std::size_t attempts = 3;
    std::size_t max_in_flight = 4;

    // gridsearch / eval.
    std::vector<SequenceKind> grid_sequences = {kAllSequences.begin(), kAllSequences.end()};
    std::vector<std::size_t> grid_n_segments = {50, 100, 250};
    std::vector<MethodFamily> grid_methods = {MethodFamily::Blank, MethodFamily::Min, MethodFamily::Max};
    std::size_t workers = 0;
    std::size_t max_rank = 5;

    bool remote() const { return oracle != "synthetic"; }
    /// Throws ValidationError.
    void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& config);
/// Applies the keys present in `j` on top of `config`. Unknown keys are rejected.
void apply_json(RunConfig& config, const nlohmann::json& j);

/// Maps an in-flight exception to the documented exit code.
int exit_code(const std::exception_ptr& error);

/// Runs one command line. Tables and summaries go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace relmap::cli

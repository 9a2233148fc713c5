#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "relmap/errors.hpp"
#include "relmap/volume.hpp"

namespace relmap {

/// Positive-class (HGG) probability reported by a classifier.
class ClassifierScore {
public:
    /// Throws OracleError(OutOfRange) unless finite and in [0, 1].
    explicit ClassifierScore(double probability);
    double probability() const noexcept { return probability_; }
    friend bool operator==(const ClassifierScore&, const ClassifierScore&) = default;

private:
    double probability_;
};

/// Element i of a batch: the score, or the error that element raised.
using ScoreResult = std::variant<ClassifierScore, OracleError>;

/// Black-box binary volume classifier. Implementations must be pure and safe to call concurrently.
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual ClassifierScore score(const MultiSequenceVolume& volume) const = 0;

    /// Element i corresponds to volumes[i]; one failure does not affect the others.
    virtual std::vector<ScoreResult> score_batch(std::span<const MultiSequenceVolume> volumes) const;

    /// Upper bound on concurrently evaluated volumes.
    virtual std::size_t max_in_flight() const noexcept { return 1; }

    /// Recorded in report metadata.
    virtual std::string identity() const = 0;
};

/// Unwraps a batch result, rethrowing the stored error.
ClassifierScore value_or_throw(const ScoreResult& result);

struct SyntheticParams {
    /// Hidden tumour: the only voxels the oracle reads.
    BinaryMask target_region;
    double gain = 10.0;
    double offset = 0.5;
    /// Indexed by SequenceKind; nonnegative, summing to 1.
    std::array<double, kSequenceCount> sequence_weights = {0.0, 0.0, 1.0, 0.0};

    /// Throws ValidationError.
    void validate() const;
};

/// Analytic stand-in for a trained model:
/// p = 1 / (1 + exp(-gain * (sum_s w_s * mean_{target}(s) - offset))).
class SyntheticOracle final : public Oracle {
public:
    explicit SyntheticOracle(SyntheticParams params);

    ClassifierScore score(const MultiSequenceVolume& volume) const override;
    std::string identity() const override;

    const SyntheticParams& params() const noexcept { return params_; }

private:
    SyntheticParams params_;
    std::vector<std::size_t> region_;
};

struct RemoteParams {
    /// e.g. "http://127.0.0.1:8080"
    std::string endpoint;
    std::chrono::milliseconds timeout{30000};
    std::size_t attempts = 3;
    std::chrono::milliseconds backoff_base{100};
    std::size_t max_in_flight = 4;
};

using OracleBinding = std::variant<SyntheticParams, RemoteParams>;

std::unique_ptr<Oracle> make_oracle(const OracleBinding& binding);

/// Forwards to another oracle and counts scored volumes.
class CountingOracle final : public Oracle {
public:
    explicit CountingOracle(const Oracle& inner) : inner_(inner) {}

    ClassifierScore score(const MultiSequenceVolume& volume) const override;
    std::vector<ScoreResult> score_batch(std::span<const MultiSequenceVolume> volumes) const override;
    std::size_t max_in_flight() const noexcept override { return inner_.max_in_flight(); }
    std::string identity() const override { return inner_.identity(); }

    std::size_t calls() const noexcept { return calls_.load(); }
    void reset() noexcept { calls_ = 0; }

private:
    const Oracle& inner_;
    mutable std::atomic<std::size_t> calls_{0};
};

/// Flattens a complete volume into the wire layout: sequence-major (T1w, T1wCE, T2w, FLAIR), then z, y, x.
std::vector<float> pack_volume(const MultiSequenceVolume& volume);

}  // namespace relmap

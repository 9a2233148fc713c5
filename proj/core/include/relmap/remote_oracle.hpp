#pragma once

#include <atomic>
#include <string>

#include "relmap/classifier.hpp"

namespace relmap {

/// Client for the JSON scoring protocol (`/v1/score`, `/v1/score_batch`, `/v1/health`).
///
/// Connection and timeout failures are retried `attempts` times with exponential backoff
/// starting at `backoff_base`. HTTP errors, malformed bodies and out-of-range probabilities
/// are never retried. When the server lacks `/v1/score_batch` (404/405/501), batches fall back
/// to concurrent single requests bounded by `max_in_flight`.
class RemoteOracle final : public Oracle {
public:
    explicit RemoteOracle(RemoteParams params);

    ClassifierScore score(const MultiSequenceVolume& volume) const override;
    std::vector<ScoreResult> score_batch(std::span<const MultiSequenceVolume> volumes) const override;
    std::size_t max_in_flight() const noexcept override { return params_.max_in_flight; }
    std::string identity() const override;

    /// GET /v1/health; returns the model id. Throws OracleError.
    std::string health() const;

    const RemoteParams& params() const noexcept { return params_; }

private:
    std::string post(const std::string& path, const std::string& body) const;
    std::vector<ScoreResult> score_sequential(std::span<const MultiSequenceVolume> volumes) const;

    RemoteParams params_;
    mutable std::atomic<bool> batch_supported_{true};
};

/// `{"dims":[4,D,H,W],"order":"seq,z,y,x","dtype":"f32le","encoding":"base64","data":...}`
std::string encode_score_request(const MultiSequenceVolume& volume);

/// Parses a `/v1/score` request body back into a volume. Throws ValidationError.
MultiSequenceVolume decode_score_request(const std::string& body);

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace relmap

#include "relmap/classifier.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "relmap/remote_oracle.hpp"

namespace relmap {

ClassifierScore::ClassifierScore(double probability) : probability_(probability) {
    if (!std::isfinite(probability) || probability < 0.0 || probability > 1.0) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "probability " << probability << " outside [0, 1]";
        throw OracleError(OracleError::Kind::OutOfRange, msg.str());
    }
}

std::vector<ScoreResult> Oracle::score_batch(std::span<const MultiSequenceVolume> volumes) const {
    std::vector<ScoreResult> out;
    out.reserve(volumes.size());
    for (const auto& v : volumes) {
        try {
            out.emplace_back(score(v));
        } catch (const OracleError& e) {
            out.emplace_back(e);
        } catch (const std::exception& e) {
            out.emplace_back(OracleError(OracleError::Kind::Internal, e.what()));
        }
    }
    return out;
}

ClassifierScore value_or_throw(const ScoreResult& result) {
    if (const auto* error = std::get_if<OracleError>(&result)) throw *error;
    return std::get<ClassifierScore>(result);
}

// ---------------------------------------------------------------------------

void SyntheticParams::validate() const {
    if (target_region.empty_region()) throw ValidationError("synthetic target_region is empty");
    if (!(gain > 0.0) || !std::isfinite(gain)) throw ValidationError("synthetic gain must be > 0");
    if (!(offset >= 0.0 && offset <= 1.0)) throw ValidationError("synthetic offset must lie in [0, 1]");
    double total = 0.0;
    for (double w : sequence_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("sequence weights must be >= 0");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("sequence weights must sum to 1");
}

SyntheticOracle::SyntheticOracle(SyntheticParams params)
    : params_(std::move(params)), region_(params_.target_region.indices()) {
    params_.validate();
}

ClassifierScore SyntheticOracle::score(const MultiSequenceVolume& volume) const {
    if (!volume.complete()) throw ValidationError("synthetic oracle requires all four sequences");
    if (volume.dims() != params_.target_region.dims()) {
        throw DimensionError("volume " + to_string(volume.dims()) + " vs synthetic target region " +
                             to_string(params_.target_region.dims()));
    }
    double weighted = 0.0;
    for (auto kind : kAllSequences) {
        const double w = params_.sequence_weights[static_cast<std::size_t>(kind)];
        if (w == 0.0) continue;
        const auto data = volume.get(kind).data();
        double sum = 0.0;
        for (auto i : region_) sum += data[i];
        weighted += w * (sum / double(region_.size()));
    }
    return ClassifierScore(1.0 / (1.0 + std::exp(-params_.gain * (weighted - params_.offset))));
}

std::string SyntheticOracle::identity() const {
    std::ostringstream id;
    id.precision(17);
    id << "synthetic(gain=" << params_.gain << ",offset=" << params_.offset << ",weights=";
    for (std::size_t i = 0; i < kSequenceCount; ++i) {
        id << (i ? ":" : "") << params_.sequence_weights[i];
    }
    id << ",region_voxels=" << region_.size() << ")";
    return id.str();
}

// ---------------------------------------------------------------------------

ClassifierScore CountingOracle::score(const MultiSequenceVolume& volume) const {
    ++calls_;
    return inner_.score(volume);
}

std::vector<ScoreResult> CountingOracle::score_batch(std::span<const MultiSequenceVolume> volumes) const {
    calls_ += volumes.size();
    return inner_.score_batch(volumes);
}

std::unique_ptr<Oracle> make_oracle(const OracleBinding& binding) {
    if (const auto* synthetic = std::get_if<SyntheticParams>(&binding)) {
        return std::make_unique<SyntheticOracle>(*synthetic);
    }
    return std::make_unique<RemoteOracle>(std::get<RemoteParams>(binding));
}

std::vector<float> pack_volume(const MultiSequenceVolume& volume) {
    if (!volume.complete()) throw ValidationError("wire payload requires all four sequences");
    const std::size_t n = volume.dims().voxels();
    std::vector<float> out(n * kSequenceCount);
    for (std::size_t s = 0; s < kSequenceCount; ++s) {
        const auto data = volume.get(kAllSequences[s]).data();
        std::copy(data.begin(), data.end(), out.begin() + static_cast<std::ptrdiff_t>(s * n));
    }
    return out;
}

}  // namespace relmap

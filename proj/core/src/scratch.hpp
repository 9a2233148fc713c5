#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "relmap/perturbation.hpp"

namespace relmap::detail {

// Reusable copies of a base volume. Each slot is perturbed in place over a region and
// restored from the base afterwards, so scoring many regions costs O(region) per call.
class ScratchPool {
public:
    ScratchPool(const MultiSequenceVolume& base, std::size_t slots) : base_(base), slots_(slots, base) {}

    std::size_t size() const noexcept { return slots_.size(); }

    void fill(std::size_t slot, std::span<const std::size_t> region, const FillVector& values) {
        auto& target = slots_[slot];
        for (auto kind : target.present()) {
            const auto value = static_cast<float>(values[static_cast<std::size_t>(kind)]);
            auto data = target.get(kind).data();
            for (auto i : region) data[i] = value;
        }
    }

    void restore(std::size_t slot, std::span<const std::size_t> region) {
        auto& target = slots_[slot];
        for (auto kind : target.present()) {
            const auto src = base_.get(kind).data();
            auto dst = target.get(kind).data();
            for (auto i : region) dst[i] = src[i];
        }
    }

    std::span<const MultiSequenceVolume> first(std::size_t n) const noexcept {
        return std::span<const MultiSequenceVolume>(slots_).first(n);
    }

private:
    const MultiSequenceVolume& base_;
    std::vector<MultiSequenceVolume> slots_;
};

}  // namespace relmap::detail

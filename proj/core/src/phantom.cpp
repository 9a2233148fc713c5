#include "relmap/phantom.hpp"

#include <algorithm>
#include <random>

#include "relmap/errors.hpp"

namespace relmap {

EvalCase make_phantom(const PhantomParams& params, std::string id) {
    const Dims& d = params.dims;
    if (d.voxels() == 0) throw ValidationError("phantom dims must be positive");
    std::mt19937_64 rng(params.seed);

    std::array<double, 3> centre{};
    if (params.centre) {
        centre = *params.centre;
    } else {
        const double margin = *std::max_element(params.radii.begin(), params.radii.end()) + 2.0;
        const std::array<std::size_t, 3> len = {d.depth, d.height, d.width};
        for (std::size_t a = 0; a < 3; ++a) {
            if (2.0 * margin >= double(len[a])) throw ValidationError("phantom ellipsoid does not fit the volume");
            std::uniform_real_distribution<double> pick(margin, double(len[a]) - 1.0 - margin);
            centre[a] = pick(rng);
        }
    }

    BinaryMask truth(d);
    for (std::size_t z = 0; z < d.depth; ++z) {
        for (std::size_t y = 0; y < d.height; ++y) {
            for (std::size_t x = 0; x < d.width; ++x) {
                const double dz = (double(z) - centre[0]) / params.radii[0];
                const double dy = (double(y) - centre[1]) / params.radii[1];
                const double dx = (double(x) - centre[2]) / params.radii[2];
                if (dz * dz + dy * dy + dx * dx <= 1.0) truth.set(d.index(z, y, x), true);
            }
        }
    }
    if (truth.empty_region()) throw ValidationError("phantom ellipsoid covers no voxel");

    MultiSequenceVolume volume;
    std::uniform_real_distribution<float> noise(0.0f, 1.0f);
    std::uniform_real_distribution<float> background(params.background_low, params.background_high);
    std::uniform_real_distribution<float> tumour(params.tumour_low, params.tumour_high);
    for (auto kind : kAllSequences) {
        std::vector<float> data(d.voxels());
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (kind != params.informative) {
                data[i] = noise(rng);
            } else {
                data[i] = truth[i] ? tumour(rng) : background(rng);
            }
        }
        volume.set(kind, ScalarVolume(d, std::move(data)));
    }
    if (id.empty()) id = "phantom-" + std::to_string(params.seed);
    return {std::move(id), normalize_all(volume), std::move(truth)};
}

}  // namespace relmap

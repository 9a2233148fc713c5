// Minimal NIfTI-1 reader: single-file ("n+1") 3D volumes, optionally gzip-compressed.
// Orientation is ignored; voxels are taken in storage order (x fastest), which is C-order (z, y, x).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>

#include <zlib.h>

#include "relmap/errors.hpp"
#include "relmap/io.hpp"

namespace relmap {

namespace {

constexpr std::size_t kHeaderSize = 348;

enum NiftiType : std::int16_t { kUint8 = 2, kInt16 = 4, kFloat32 = 16, kFloat64 = 64 };

std::vector<unsigned char> read_gz(const fs::path& path) {
    gzFile file = gzopen(path.c_str(), "rb");
    if (!file) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> out;
    std::vector<unsigned char> chunk(1 << 20);
    for (;;) {
        const int n = gzread(file, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            int code = 0;
            const std::string msg = gzerror(file, &code);
            gzclose(file);
            throw IoError("cannot decompress " + path.string() + ": " + msg);
        }
        if (n == 0) break;
        out.insert(out.end(), chunk.begin(), chunk.begin() + n);
    }
    gzclose(file);
    return out;
}

template <typename T>
T read_swapped(const unsigned char* src, bool swap) {
    T value;
    std::memcpy(&value, src, sizeof(T));
    if (swap) {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        std::reverse(raw, raw + sizeof(T));
        std::memcpy(&value, raw, sizeof(T));
    }
    return value;
}

}  // namespace

ScalarVolume load_nifti(const fs::path& path, SequenceKind sequence) {
    const auto bytes = read_gz(path);
    const std::string ctx = path.string() + " (" + std::string(to_string(sequence)) + ")";
    if (bytes.size() < kHeaderSize) throw ParseError("sizeof_hdr", 0, ctx + ": file shorter than a NIfTI-1 header");

    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    bool swap = false;
    if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
        if (read_swapped<std::int32_t>(bytes.data(), true) != static_cast<std::int32_t>(kHeaderSize)) {
            throw ParseError("sizeof_hdr", 0, ctx + ": expected 348, got " + std::to_string(sizeof_hdr));
        }
        swap = true;
    }

    if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0) {
        throw ParseError("magic", 344, ctx + ": expected \"n+1\" single-file NIfTI-1");
    }

    const auto ndim = read_swapped<std::int16_t>(bytes.data() + 40, swap);
    if (ndim != 3) throw ParseError("dim", 40, ctx + ": dim[0] is " + std::to_string(ndim) + ", expected 3");
    std::array<std::size_t, 3> extent{};
    for (std::size_t a = 0; a < 3; ++a) {
        const auto n = read_swapped<std::int16_t>(bytes.data() + 42 + 2 * a, swap);
        if (n <= 0) throw ParseError("dim", 42 + 2 * a, ctx + ": dim[" + std::to_string(a + 1) + "] is not positive");
        extent[a] = static_cast<std::size_t>(n);
    }
    const Dims dims{extent[2], extent[1], extent[0]};

    const auto datatype = read_swapped<std::int16_t>(bytes.data() + 70, swap);
    std::size_t width = 0;
    switch (datatype) {
        case kUint8: width = 1; break;
        case kInt16: width = 2; break;
        case kFloat32: width = 4; break;
        case kFloat64: width = 8; break;
        default: throw ParseError("datatype", 70, ctx + ": unsupported datatype code " + std::to_string(datatype));
    }
    const auto bitpix = read_swapped<std::int16_t>(bytes.data() + 72, swap);
    if (static_cast<std::size_t>(bitpix) != width * 8) {
        throw ParseError("bitpix", 72, ctx + ": " + std::to_string(bitpix) + " disagrees with datatype");
    }

    const auto vox_offset = read_swapped<float>(bytes.data() + 108, swap);
    if (!(vox_offset >= 352.0f) || vox_offset != std::floor(vox_offset)) {
        throw ParseError("vox_offset", 108, ctx + ": invalid value " + std::to_string(vox_offset));
    }
    const auto offset = static_cast<std::size_t>(vox_offset);
    const std::size_t body = dims.voxels() * width;
    if (bytes.size() < offset + body) {
        throw ParseError("data", offset, ctx + ": body holds " + std::to_string(bytes.size() - std::min(bytes.size(), offset)) +
                                             " bytes, expected " + std::to_string(body));
    }

    const double slope = read_swapped<float>(bytes.data() + 112, swap);
    const double inter = read_swapped<float>(bytes.data() + 116, swap);
    const bool scaled = slope != 0.0 && std::isfinite(slope) && std::isfinite(inter);

    std::vector<float> data(dims.voxels());
    const unsigned char* src = bytes.data() + offset;
    for (std::size_t i = 0; i < data.size(); ++i, src += width) {
        double v = 0.0;
        switch (datatype) {
            case kUint8: v = *src; break;
            case kInt16: v = read_swapped<std::int16_t>(src, swap); break;
            case kFloat32: v = read_swapped<float>(src, swap); break;
            case kFloat64: v = read_swapped<double>(src, swap); break;
        }
        data[i] = static_cast<float>(scaled ? v * slope + inter : v);
    }
    try {
        return ScalarVolume(dims, std::move(data));
    } catch (const ValidationError& e) {
        throw ParseError("data", offset, ctx + ": " + e.what());
    }
}

}  // namespace relmap

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tomo4d/common.hpp"

namespace tomo4d {

// Grid convention used everywhere: a side-n axis spans [-1, 1] with
// cell-centered samples, index j at position -1 + (2j+1)/n. The grid is
// symmetric about the origin, which is also the projector's rotation center.
inline double cell_center(int j, int n) { return -1.0 + (2.0 * j + 1.0) / n; }

/// Continuous (fractional) grid index of physical coordinate x on a side-n
/// axis; inverse of cell_center.
inline double cont_index(double x, int n) { return (x + 1.0) * 0.5 * n - 0.5; }

inline double cell_spacing(int n) { return 2.0 / n; }

/// Scalar field on a (Z,Y,X) cell-centered grid over [-1,1] per axis.
/// 2D data uses nz == 1; axes of size 1 are treated as degenerate by all
/// samplers (no interpolation, no displacement along them).
template <typename T>
struct Volume3 {
    int nz = 0, ny = 0, nx = 0;
    std::vector<T> data;

    Volume3() = default;
    Volume3(int nz_, int ny_, int nx_)
        : nz(nz_), ny(ny_), nx(nx_), data(static_cast<std::size_t>(nz_) * ny_ * nx_, T(0)) {}

    static Volume3 cube(int side) { return Volume3(side, side, side); }

    std::size_t size() const { return data.size(); }

    T& at(int z, int y, int x) {
        return data[(static_cast<std::size_t>(z) * ny + y) * nx + x];
    }
    T at(int z, int y, int x) const {
        return data[(static_cast<std::size_t>(z) * ny + y) * nx + x];
    }

    bool same_shape(const Volume3& o) const {
        return nz == o.nz && ny == o.ny && nx == o.nx;
    }

    template <typename U>
    Volume3<U> cast() const {
        Volume3<U> out(nz, ny, nx);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

/// Time sequence of equally shaped frames. times are normalized to [0,1],
/// strictly increasing; a full sequence starts at 0 and ends at 1.
template <typename T>
struct Volume4 {
    std::vector<Volume3<T>> frames;
    std::vector<double> times;

    void validate() const {
        if (frames.size() != times.size())
            throw std::invalid_argument("Volume4: frame/time count mismatch");
        if (frames.empty()) throw std::invalid_argument("Volume4: empty sequence");
        for (std::size_t i = 0; i < frames.size(); ++i) {
            if (!frames[i].same_shape(frames[0]))
                throw std::invalid_argument("Volume4: frames differ in shape");
            if (i > 0 && !(times[i] > times[i - 1]))
                throw std::invalid_argument("Volume4: times not strictly increasing");
        }
    }
};

/// 2x block average along every non-degenerate axis. Source dims must be
/// even (or 1).
template <typename T>
Volume3<T> block_downsample2(const Volume3<T>& v) {
    const int fz = v.nz == 1 ? 1 : 2, fy = v.ny == 1 ? 1 : 2, fx = v.nx == 1 ? 1 : 2;
    if (v.nz % fz || v.ny % fy || v.nx % fx)
        throw std::invalid_argument("block_downsample2: dims not divisible by 2");
    Volume3<T> out(v.nz / fz, v.ny / fy, v.nx / fx);
    const double inv = 1.0 / (fz * fy * fx);
    for (int z = 0; z < out.nz; ++z)
        for (int y = 0; y < out.ny; ++y)
            for (int x = 0; x < out.nx; ++x) {
                double s = 0.0;
                for (int dz = 0; dz < fz; ++dz)
                    for (int dy = 0; dy < fy; ++dy)
                        for (int dx = 0; dx < fx; ++dx)
                            s += v.at(z * fz + dz, y * fy + dy, x * fx + dx);
                out.at(z, y, x) = static_cast<T>(s * inv);
            }
    return out;
}

} // namespace tomo4d

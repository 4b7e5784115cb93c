#pragma once

#include <stdexcept>
#include <vector>

#include "tomo4d/schedule.hpp"

namespace tomo4d {

/// Projection stack p_theta(r, z): one detector row per (view, slice).
/// Layout (N views, Z rows, R bins) row-major; detector bin centers span
/// [-1,1] in r with the same cell-centered convention as volumes.
template <typename T>
struct Sinogram {
    int n_proj = 0, nz = 0, n_bins = 0;
    std::vector<T> data;
    ScanSchedule schedule;

    Sinogram() = default;
    Sinogram(int n_proj_, int nz_, int n_bins_)
        : n_proj(n_proj_), nz(nz_), n_bins(n_bins_),
          data(static_cast<std::size_t>(n_proj_) * nz_ * n_bins_, T(0)) {}

    T& at(int view, int z, int bin) {
        return data[(static_cast<std::size_t>(view) * nz + z) * n_bins + bin];
    }
    T at(int view, int z, int bin) const {
        return data[(static_cast<std::size_t>(view) * nz + z) * n_bins + bin];
    }

    /// Pointer to the (view, z) detector row.
    T* row(int view, int z) {
        return &data[(static_cast<std::size_t>(view) * nz + z) * n_bins];
    }
    const T* row(int view, int z) const {
        return &data[(static_cast<std::size_t>(view) * nz + z) * n_bins];
    }

    template <typename U>
    Sinogram<U> cast() const {
        Sinogram<U> out(n_proj, nz, n_bins);
        out.schedule = schedule;
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

} // namespace tomo4d

#pragma once

#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tomo4d/sinogram.hpp"
#include "tomo4d/volume.hpp"

namespace tomo4d {

/// Discrete parallel-beam Radon transform over the [-1,1] box, rotation
/// about z. 3D volumes project as independent z-slices. Rays are marched
/// with a fixed step (in voxel units) and bilinear interpolation; samples
/// outside the grid read zero. The adjoint gathers exactly the weights the
/// forward scatters, so the two realize a transposed pair of linear maps.
template <typename T>
struct RadonOperator {
    int side = 0;                    // volume side (Y = X = side)
    int n_bins = 0;                  // detector bins R, centers spanning [-1,1]
    std::vector<double> angles_deg;  // full angle set
    double step_vox = 0.5;           // integration step in voxel units
    int threads = 1;                 // forward parallelizes over views

    RadonOperator() = default;
    RadonOperator(int side_, std::vector<double> angles, int n_bins_ = 0)
        : side(side_), n_bins(n_bins_ > 0 ? n_bins_ : side_), angles_deg(std::move(angles)) {}

    int n_angles() const { return static_cast<int>(angles_deg.size()); }
    double step_len() const { return step_vox * cell_spacing(side); }

    // Ray extent: covers the whole square, corners included.
    double half_span() const { return std::sqrt(2.0); }
    int n_steps() const { return static_cast<int>(std::ceil(2.0 * half_span() / step_len())); }
};

namespace detail {

template <typename T, typename Visit>
inline void march_ray(const RadonOperator<T>& op, double angle_deg, int bin, Visit&& visit) {
    const double theta = angle_deg * 0.017453292519943295;
    const double nx_ = std::cos(theta), ny_ = std::sin(theta);  // detector axis
    const double tx = -ny_, ty = nx_;                           // ray direction
    const double r = cell_center(bin, op.n_bins);
    const double ds = op.step_len();
    const double s0 = -op.half_span() + 0.5 * ds;
    const int steps = op.n_steps();
    const int n = op.side;
    for (int q = 0; q < steps; ++q) {
        const double s = s0 + q * ds;
        const double x = r * nx_ + s * tx;
        const double y = r * ny_ + s * ty;
        const double u = cont_index(x, n), v = cont_index(y, n);
        const int ix0 = static_cast<int>(std::floor(u));
        const int iy0 = static_cast<int>(std::floor(v));
        if (ix0 < -1 || ix0 >= n || iy0 < -1 || iy0 >= n) continue;
        const double fx = u - ix0, fy = v - iy0;
        const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
        const double w10 = fy * (1 - fx), w11 = fy * fx;
        if (iy0 >= 0) {
            if (ix0 >= 0) visit(iy0, ix0, w00);
            if (ix0 + 1 < n) visit(iy0, ix0 + 1, w01);
        }
        if (iy0 + 1 < n) {
            if (ix0 >= 0) visit(iy0 + 1, ix0, w10);
            if (ix0 + 1 < n) visit(iy0 + 1, ix0 + 1, w11);
        }
    }
}

template <typename Body>
inline void parallel_over(int count, int threads, Body&& body) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const int nt = std::min(threads, count);
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
            for (int i = t; i < count; i += nt) body(i);
        });
    for (auto& th : pool) th.join();
}

} // namespace detail

/// Line integrals of vol at the selected view angles. Output rows follow
/// the order of angle_indices; each row sum is step_len * sum of bilinear
/// samples along the ray. Deterministic for any thread count (views write
/// disjoint rows and each row is accumulated by one thread).
template <typename T>
Sinogram<T> radon_forward(const RadonOperator<T>& op, const Volume3<T>& vol,
                          const std::vector<int>& angle_indices) {
    if (vol.ny != op.side || vol.nx != op.side)
        throw std::invalid_argument("radon_forward: volume side does not match operator");
    for (int a : angle_indices)
        if (a < 0 || a >= op.n_angles())
            throw std::invalid_argument("radon_forward: angle index out of range");

    Sinogram<T> out(static_cast<int>(angle_indices.size()), vol.nz, op.n_bins);
    const double ds = op.step_len();
    detail::parallel_over(out.n_proj, op.threads, [&](int ai) {
        const double angle = op.angles_deg[angle_indices[ai]];
        for (int z = 0; z < vol.nz; ++z) {
            const T* slice = &vol.data[static_cast<std::size_t>(z) * vol.ny * vol.nx];
            T* row = out.row(ai, z);
            for (int b = 0; b < op.n_bins; ++b) {
                double acc = 0.0;
                detail::march_ray(op, angle, b, [&](int iy, int ix, double w) {
                    acc += w * static_cast<double>(slice[static_cast<std::size_t>(iy) * vol.nx + ix]);
                });
                row[b] = static_cast<T>(acc * ds);
            }
        }
    });
    return out;
}

template <typename T>
Sinogram<T> radon_forward(const RadonOperator<T>& op, const Volume3<T>& vol) {
    std::vector<int> all(op.n_angles());
    for (int i = 0; i < op.n_angles(); ++i) all[i] = i;
    return radon_forward(op, vol, all);
}

/// Exact transpose of radon_forward: every interpolation weight deposited
/// by the forward march is gathered back identically.
template <typename T>
Volume3<T> radon_adjoint(const RadonOperator<T>& op, const Sinogram<T>& sino,
                         const std::vector<int>& angle_indices) {
    if (static_cast<int>(angle_indices.size()) != sino.n_proj)
        throw std::invalid_argument("radon_adjoint: row/angle count mismatch");
    if (sino.n_bins != op.n_bins)
        throw std::invalid_argument("radon_adjoint: detector size mismatch");

    Volume3<T> out(sino.nz, op.side, op.side);
    const double ds = op.step_len();
    for (int ai = 0; ai < sino.n_proj; ++ai) {
        const double angle = op.angles_deg[angle_indices[ai]];
        for (int z = 0; z < sino.nz; ++z) {
            T* slice = &out.data[static_cast<std::size_t>(z) * out.ny * out.nx];
            const T* row = sino.row(ai, z);
            for (int b = 0; b < op.n_bins; ++b) {
                const double q = static_cast<double>(row[b]) * ds;
                if (q == 0.0) continue;
                detail::march_ray(op, angle, b, [&](int iy, int ix, double w) {
                    slice[static_cast<std::size_t>(iy) * out.nx + ix] += static_cast<T>(w * q);
                });
            }
        }
    }
    return out;
}

template <typename T>
Volume3<T> radon_adjoint(const RadonOperator<T>& op, const Sinogram<T>& sino) {
    std::vector<int> all(op.n_angles());
    for (int i = 0; i < op.n_angles(); ++i) all[i] = i;
    return radon_adjoint(op, sino, all);
}

/// Vector-Jacobian product of the forward map. The projector is linear, so
/// this is the adjoint applied to the cotangent; it exists as its own entry
/// point so optimization code treats every pipeline stage uniformly.
template <typename T>
Volume3<T> radon_vjp(const RadonOperator<T>& op, const Sinogram<T>& cotangent,
                     const std::vector<int>& angle_indices) {
    return radon_adjoint(op, cotangent, angle_indices);
}

template <typename T>
Volume3<T> radon_vjp(const RadonOperator<T>& op, const Sinogram<T>& cotangent) {
    return radon_adjoint(op, cotangent);
}

/// Project a time sequence: view i uses the frame at schedule time t_i
/// (one angle per time, the quasi-static acquisition model). Frames are
/// matched exactly unless nearest_frame allows snapping to the closest one.
template <typename T>
Sinogram<T> project_dynamic(const RadonOperator<T>& op, const Volume4<T>& scene,
                            const ScanSchedule& schedule, bool nearest_frame = false) {
    scene.validate();
    schedule.validate();
    if (schedule.n_proj() != op.n_angles())
        throw std::invalid_argument("project_dynamic: schedule/operator angle count mismatch");

    Sinogram<T> out(schedule.n_proj(), scene.frames[0].nz, op.n_bins);
    out.schedule = schedule;
    for (int i = 0; i < schedule.n_proj(); ++i) {
        const double t = schedule.times[i];
        int fi = -1;
        double best = 1e300;
        for (std::size_t f = 0; f < scene.times.size(); ++f) {
            const double d = std::abs(scene.times[f] - t);
            if (d < best) {
                best = d;
                fi = static_cast<int>(f);
            }
        }
        if (!nearest_frame && best > 1e-12)
            throw std::invalid_argument("project_dynamic: no frame at t=" + std::to_string(t) +
                                        " (pass nearest_frame to snap)");
        const Sinogram<T> one = radon_forward(op, scene.frames[fi], {i});
        std::copy(one.data.begin(), one.data.end(),
                  out.data.begin() + static_cast<std::size_t>(i) * out.nz * out.n_bins);
    }
    return out;
}

} // namespace tomo4d

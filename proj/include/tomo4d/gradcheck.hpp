#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tomo4d/inr.hpp"
#include "tomo4d/motion.hpp"
#include "tomo4d/optimize.hpp"
#include "tomo4d/phantom.hpp"
#include "tomo4d/radon.hpp"
#include "tomo4d/rng.hpp"

namespace tomo4d {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0;
    double tol = 0;
    bool pass = false;
};

namespace detail {

// Central finite differences against an analytic gradient. Entries where
// both sides are negligible are accepted as agreeing zeros.
inline double rel_err(double fd, double an) {
    const double denom = std::max(std::abs(fd), std::abs(an));
    if (denom < 1e-7) return 0.0;
    return std::abs(fd - an) / denom;
}

template <typename Loss>
double central_diff(double* param, double h, Loss&& loss) {
    const double orig = *param;
    *param = orig + h;
    const double up = loss();
    *param = orig - h;
    const double down = loss();
    *param = orig;
    return (up - down) / (2 * h);
}

} // namespace detail

/// Finite-difference verification of every backward path, all in 64-bit:
/// the network parameters and input coordinates, the warp displacement
/// gradients, the projector VJP, and the assembled objective on a tiny
/// instance. Returns one record per check.
inline std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed = 12345) {
    using T = double;
    std::vector<GradCheckResult> results;
    Rng rng(seed);
    const double h = 1e-4;

    // --- network parameters and input points -------------------------------
    {
        InrModel<T> model = init_inr<T>(seed, 8, 16, 1.0);
        std::vector<Vec3<T>> points(40);
        for (auto& p : points) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        std::vector<T> cot(points.size());
        for (auto& c : cot) c = rng.uniform(-1, 1);

        auto loss = [&]() {
            auto [vals, tape] = inr_forward(model, points);
            (void)tape;
            double s = 0;
            for (std::size_t i = 0; i < vals.size(); ++i) s += cot[i] * vals[i];
            return s;
        };
        auto [vals, tape] = inr_forward(model, points);
        (void)vals;
        const InrGrads<T> g = inr_backward(model, tape, cot);

        double worst = 0;
        for (int l = 0; l < 4; ++l) {
            auto& w = model.mlp.weights[l];
            const long n = w.size();
            const int checks = static_cast<int>(std::min<long>(50, n));
            for (int c = 0; c < checks; ++c) {
                const long idx = static_cast<long>(rng.uniform() * n);
                const double fd = detail::central_diff(w.data() + idx, h, loss);
                worst = std::max(worst, detail::rel_err(fd, g.weights[l].data()[idx]));
            }
            auto& b = model.mlp.biases[l];
            const int bchecks = static_cast<int>(std::min<long>(8, b.size()));
            for (int c = 0; c < bchecks; ++c) {
                const long idx = static_cast<long>(rng.uniform() * b.size());
                const double fd = detail::central_diff(b.data() + idx, h, loss);
                worst = std::max(worst, detail::rel_err(fd, g.biases[l].data()[idx]));
            }
        }
        results.push_back({"inr_parameters", worst, 1e-5, worst < 1e-5});

        // A coordinate probe that flips a rectifier crosses a kink where
        // finite differences are meaningless; skip those probes.
        auto relu_pattern = [&](const Vec3<T>& p) {
            std::vector<Vec3<T>> one{p};
            detail::ChunkActivations<T> c;
            detail::forward_chunk(model, one, 0, 1, c);
            std::string pat;
            for (const auto* z : {&c.z1, &c.z2, &c.z3})
                for (Eigen::Index r = 0; r < z->rows(); ++r)
                    pat.push_back((*z)(r, 0) > 0 ? '1' : '0');
            return pat;
        };

        double worst_pts = 0;
        int done_pts = 0, attempts = 0;
        while (done_pts < 15 && attempts < 200) {
            ++attempts;
            const std::size_t pi = static_cast<std::size_t>(rng.uniform() * points.size());
            const int axis = attempts % 3;
            T* coord = axis == 0 ? &points[pi].x : (axis == 1 ? &points[pi].y : &points[pi].z);
            const T orig = *coord;
            *coord = orig + static_cast<T>(h);
            const std::string up = relu_pattern(points[pi]);
            *coord = orig - static_cast<T>(h);
            const std::string down = relu_pattern(points[pi]);
            *coord = orig;
            if (up != down) continue;
            const double fd = detail::central_diff(coord, h, loss);
            const double an =
                axis == 0 ? g.points[pi].x : (axis == 1 ? g.points[pi].y : g.points[pi].z);
            worst_pts = std::max(worst_pts, detail::rel_err(fd, an));
            ++done_pts;
        }
        results.push_back({"inr_input_points", worst_pts, 1e-5, worst_pts < 1e-5});
    }

    // --- warp displacement and template gradients --------------------------
    {
        const int n = 8;
        Volume3<T> tpl(n, n, n);
        for (auto& v : tpl.data) v = rng.uniform(0, 1);
        DisplacementField<T> w(n, n, n);
        for (auto& v : w.d) v = static_cast<T>(rng.uniform(-0.08, 0.08));
        Volume3<T> cot(n, n, n);
        for (auto& v : cot.data) v = rng.uniform(-1, 1);

        auto loss = [&]() {
            const Volume3<T> out = warp_volume(tpl, w);
            double s = 0;
            for (std::size_t i = 0; i < out.data.size(); ++i) s += cot.data[i] * out.data[i];
            return s;
        };
        auto [gtpl, gw] = warp_vjp(tpl, w, cot);

        // Skip samples whose interpolation cell would change under the probe.
        auto straddles = [&](std::size_t entry) {
            const std::size_t vox = entry / 3;
            const int axis = static_cast<int>(entry % 3);
            const int x = static_cast<int>(vox % n), y = static_cast<int>((vox / n) % n),
                      z = static_cast<int>(vox / (static_cast<std::size_t>(n) * n));
            const double base = axis == 0 ? cell_center(x, n)
                                : axis == 1 ? cell_center(y, n)
                                            : cell_center(z, n);
            const double u = cont_index(base + w.d[vox * 3 + axis], n);
            const double f = u - std::floor(u);
            const double margin = 2 * h * (n * 0.5) + 1e-6;
            return f < margin || f > 1 - margin;
        };

        double worst = 0;
        int done = 0;
        while (done < 20) {
            const std::size_t entry = static_cast<std::size_t>(rng.uniform() * w.d.size());
            if (straddles(entry)) continue;
            const double fd = detail::central_diff(&w.d[entry], h, loss);
            worst = std::max(worst, detail::rel_err(fd, gw.d[entry]));
            ++done;
        }
        results.push_back({"warp_displacement", worst, 1e-3, worst < 1e-3});

        double worst_t = 0;
        for (int c = 0; c < 20; ++c) {
            const std::size_t idx = static_cast<std::size_t>(rng.uniform() * tpl.data.size());
            const double fd = detail::central_diff(&tpl.data[idx], h, loss);
            worst_t = std::max(worst_t, detail::rel_err(fd, gtpl.data[idx]));
        }
        results.push_back({"warp_template", worst_t, 1e-5, worst_t < 1e-5});
    }

    // --- projector VJP ------------------------------------------------------
    {
        const int n = 16;
        const ScanSchedule sched = make_schedule(0, 180, 8, false);
        RadonOperator<T> op(n, sched.angles_deg);
        Volume3<T> vol(1, n, n);
        for (auto& v : vol.data) v = rng.uniform(0, 1);
        Sinogram<T> cot(op.n_angles(), 1, op.n_bins);
        for (auto& v : cot.data) v = rng.uniform(-1, 1);

        auto loss = [&]() {
            const Sinogram<T> p = radon_forward(op, vol);
            double s = 0;
            for (std::size_t i = 0; i < p.data.size(); ++i) s += cot.data[i] * p.data[i];
            return s;
        };
        const Volume3<T> g = radon_vjp(op, cot);
        double worst = 0;
        for (int c = 0; c < 20; ++c) {
            const std::size_t idx = static_cast<std::size_t>(rng.uniform() * vol.data.size());
            const double fd = detail::central_diff(&vol.data[idx], h, loss);
            worst = std::max(worst, detail::rel_err(fd, g.data[idx]));
        }
        results.push_back({"radon_vjp", worst, 1e-6, worst < 1e-6});
    }

    // --- assembled objective on a tiny instance -----------------------------
    {
        const int beta = 8, n_proj = 4, m = 8, hidden = 16, k = 2, alpha = 2;
        InrModel<T> model = init_inr<T>(seed + 1, m, hidden, 1.0);
        MotionCoeffs<T> coeffs = init_motion<T>(alpha, k, 0.02, seed + 2);
        const ScanSchedule sched = make_schedule(0, 180, n_proj);
        RadonOperator<T> op(beta, sched.angles_deg);

        // Target offset keeps the L1 terms away from their ties so the
        // objective is smooth at the probe scale.
        Sinogram<T> measured(n_proj, 1, op.n_bins);
        measured.schedule = sched;
        for (auto& v : measured.data) v = static_cast<T>(0.5 + 0.05 * rng.uniform(-1, 1));

        Rng grid_rng(seed + 3);
        const CoordGrid<T> grid = make_coord_grid<T>(1, beta, beta, true, &grid_rng);
        const std::vector<int> batch{0, 1, 2, 3};
        auto loss = [&]() {
            return pipeline_loss(model, coeffs, grid, batch, measured, op, 1.0, 1e-3).total;
        };
        PipelineGrads<T> grads;
        pipeline_loss(model, coeffs, grid, batch, measured, op, 1.0, 1e-3, &grads);

        double worst = 0;
        for (int c = 0; c < 15; ++c) {
            const int l = static_cast<int>(rng.uniform() * 4);
            auto& w = model.mlp.weights[l];
            const long idx = static_cast<long>(rng.uniform() * w.size());
            const double fd = detail::central_diff(w.data() + idx, h, loss);
            worst = std::max(worst, detail::rel_err(fd, grads.inr.weights[l].data()[idx]));
        }
        for (int c = 0; c < 15; ++c) {
            const std::size_t idx = static_cast<std::size_t>(rng.uniform() * coeffs.c.size());
            const double fd = detail::central_diff(&coeffs.c[idx], h, loss);
            worst = std::max(worst, detail::rel_err(fd, grads.coeffs.c[idx]));
        }
        results.push_back({"pipeline_eq_loss", worst, 1e-3, worst < 1e-3});
    }

    return results;
}

} // namespace tomo4d

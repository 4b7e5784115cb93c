#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tomo4d/artifact.hpp"
#include "tomo4d/config.hpp"
#include "tomo4d/inr.hpp"
#include "tomo4d/motion.hpp"
#include "tomo4d/radon.hpp"
#include "tomo4d/rng.hpp"
#include "tomo4d/sinogram.hpp"

namespace tomo4d {

/// L1 data discrepancy plus spatial TV of the motion coefficients:
/// lambda1 * mean|synth - measured| + lambda2 * TV(C). Returns the loss,
/// the L1 subgradient cotangent over the synthesized slab (sign, 0 at
/// ties) and the gradient with respect to the coefficients.
template <typename T>
struct Eq4Loss {
    double total = 0;
    double data_term = 0;
    double tv_term = 0;
    Sinogram<T> synth_cotangent;
    MotionCoeffs<T> coeff_grad;
};

template <typename T>
Eq4Loss<T> eq4_loss(const Sinogram<T>& synth, const Sinogram<T>& measured,
                    const MotionCoeffs<T>& coeffs, double lambda1, double lambda2) {
    if (synth.n_proj != measured.n_proj || synth.nz != measured.nz ||
        synth.n_bins != measured.n_bins)
        throw std::invalid_argument("eq4_loss: slab shape mismatch");

    Eq4Loss<T> out;
    out.synth_cotangent = Sinogram<T>(synth.n_proj, synth.nz, synth.n_bins);
    const double inv = lambda1 / static_cast<double>(synth.data.size());
    double acc = 0;
    for (std::size_t i = 0; i < synth.data.size(); ++i) {
        const double d = static_cast<double>(synth.data[i]) - static_cast<double>(measured.data[i]);
        acc += std::abs(d);
        out.synth_cotangent.data[i] = static_cast<T>(d > 0 ? inv : (d < 0 ? -inv : 0.0));
    }
    out.data_term = lambda1 * acc / static_cast<double>(synth.data.size());

    auto [tv, tv_grad] = tv_spatial(coeffs);
    out.tv_term = lambda2 * tv;
    out.coeff_grad = std::move(tv_grad);
    for (auto& g : out.coeff_grad.c) g = static_cast<T>(static_cast<double>(g) * lambda2);
    out.total = out.data_term + out.tv_term;
    return out;
}

template <typename T>
struct ParamRef {
    std::string name;
    T* data = nullptr;
    std::size_t count = 0;
};

/// Collect optimizer-visible tensors: the four weight/bias pairs. The GRFF
/// frequencies are fixed by construction and never appear here.
template <typename T>
std::vector<ParamRef<T>> mlp_params(MlpParams<T>& mlp) {
    std::vector<ParamRef<T>> out;
    for (int l = 0; l < 4; ++l) {
        out.push_back({"mlp.w" + std::to_string(l), mlp.weights[l].data(),
                       static_cast<std::size_t>(mlp.weights[l].size())});
        out.push_back({"mlp.b" + std::to_string(l), mlp.biases[l].data(),
                       static_cast<std::size_t>(mlp.biases[l].size())});
    }
    return out;
}

/// Bias-corrected Adam with the optimizer's standard moment constants
/// (beta1 0.9, beta2 0.999, eps 1e-8). Moments are kept in double so the
/// update is identical across storage precisions.
struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m1, m2;

    template <typename T>
    void match(const std::vector<ParamRef<T>>& params) {
        m1.assign(params.size(), {});
        m2.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            m1[i].assign(params[i].count, 0.0);
            m2[i].assign(params[i].count, 0.0);
        }
        step = 0;
    }

    template <typename T>
    bool matches(const std::vector<ParamRef<T>>& params) const {
        if (m1.size() != params.size()) return false;
        for (std::size_t i = 0; i < params.size(); ++i)
            if (m1[i].size() != params[i].count) return false;
        return true;
    }
};

template <typename T>
void adam_step(AdamState& st, const std::vector<ParamRef<T>>& params,
               const std::vector<const T*>& grads, double lr) {
    if (grads.size() != params.size())
        throw std::invalid_argument("adam_step: gradient/parameter count mismatch");
    if (!st.matches(params)) throw std::invalid_argument("adam_step: state shape mismatch");
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        T* x = params[p].data;
        const T* g = grads[p];
        auto& m = st.m1[p];
        auto& v = st.m2[p];
        for (std::size_t i = 0; i < params[p].count; ++i) {
            const double gi = static_cast<double>(g[i]);
            if (!std::isfinite(gi))
                throw numeric_error("adam_step: non-finite gradient in " + params[p].name);
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * gi;
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * gi * gi;
            const double mhat = m[i] / c1, vhat = v[i] / c2;
            x[i] = static_cast<T>(static_cast<double>(x[i]) -
                                  lr * mhat / (std::sqrt(vhat) + st.eps));
        }
    }
}

/// One full objective evaluation for a fixed coordinate set and projection
/// batch: template -> per-view warp -> projection -> Eq. loss. With
/// out_grads set, backpropagates through the projector, the warp and the
/// network. Shared by the training loop and the finite-difference suite.
template <typename T>
struct PipelineGrads {
    InrGrads<T> inr;
    MotionCoeffs<T> coeffs;
};

template <typename T>
struct PipelineResult {
    double total = 0, data_term = 0, tv_term = 0;
};

template <typename T>
PipelineResult<T> pipeline_loss(const InrModel<T>& model, const MotionCoeffs<T>& coeffs,
                                const CoordGrid<T>& grid, const std::vector<int>& batch,
                                const Sinogram<T>& measured, const RadonOperator<T>& op,
                                double lambda1, double lambda2,
                                PipelineGrads<T>* out_grads = nullptr) {
    auto [tpl_values, tape] = inr_forward(model, grid.points);
    Volume3<T> tpl(grid.nz, grid.ny, grid.nx);
    tpl.data = tpl_values;

    const int nb = static_cast<int>(batch.size());
    Sinogram<T> synth(nb, tpl.nz, op.n_bins);
    Sinogram<T> target(nb, tpl.nz, op.n_bins);
    std::vector<DisplacementField<T>> fields(nb);
    const std::size_t row_sz = static_cast<std::size_t>(tpl.nz) * op.n_bins;
    for (int b = 0; b < nb; ++b) {
        const int ai = batch[b];
        fields[b] = eval_warp(coeffs, measured.schedule.times[ai], tpl.nz, tpl.ny, tpl.nx);
        const Volume3<T> frame = warp_volume(tpl, fields[b]);
        const Sinogram<T> row = radon_forward(op, frame, {ai});
        std::copy(row.data.begin(), row.data.end(), synth.data.begin() + b * row_sz);
        std::copy(measured.data.begin() + ai * row_sz, measured.data.begin() + (ai + 1) * row_sz,
                  target.data.begin() + b * row_sz);
    }

    Eq4Loss<T> loss = eq4_loss(synth, target, coeffs, lambda1, lambda2);
    PipelineResult<T> res{loss.total, loss.data_term, loss.tv_term};
    if (!out_grads) return res;

    Volume3<T> tpl_cot(tpl.nz, tpl.ny, tpl.nx);
    MotionCoeffs<T> coeff_grad = std::move(loss.coeff_grad);
    for (int b = 0; b < nb; ++b) {
        const int ai = batch[b];
        Sinogram<T> row_cot(1, tpl.nz, op.n_bins);
        std::copy(loss.synth_cotangent.data.begin() + b * row_sz,
                  loss.synth_cotangent.data.begin() + (b + 1) * row_sz, row_cot.data.begin());
        const Volume3<T> frame_cot = radon_vjp(op, row_cot, {ai});
        // Rebuild the warped frame's VJP against the unwarped template.
        auto [gtpl, gfield] = warp_vjp(tpl, fields[b], frame_cot);
        for (std::size_t i = 0; i < tpl_cot.data.size(); ++i) tpl_cot.data[i] += gtpl.data[i];
        const MotionCoeffs<T> gc = eval_warp_vjp(coeffs, measured.schedule.times[ai], gfield);
        for (std::size_t i = 0; i < coeff_grad.c.size(); ++i) coeff_grad.c[i] += gc.c[i];
    }
    out_grads->inr = inr_backward(model, tape, tpl_cot.data);
    out_grads->coeffs = std::move(coeff_grad);
    return res;
}

/// Per-iteration view handed to the progress callback; references stay
/// valid only during the call.
template <typename T>
struct IterationView {
    LossRecord record;
    const InrModel<T>& model;
    const MotionCoeffs<T>& motion;
};

/// Jointly optimize the template network and motion coefficients against a
/// measured sinogram. Per iteration: draw a view batch (shuffled without
/// replacement), evaluate the template on a freshly jittered grid, warp it
/// to each batch time, project at the batch angles, assemble the loss and
/// backpropagate, then apply one Adam step to the network and the
/// coefficients. The coefficient lattice grows on the alpha schedule; its
/// optimizer moments restart after each growth.
template <typename T>
ReconArtifact<T> reconstruct(const Sinogram<T>& measured, const ReconConfig& cfg,
                             const std::function<void(const IterationView<T>&)>& on_iter = {}) {
    cfg.validate();
    measured.schedule.validate();
    if (measured.n_proj < 2) throw std::invalid_argument("reconstruct: need >= 2 projections");

    RadonOperator<T> op(cfg.beta, measured.schedule.angles_deg, measured.n_bins);
    InrModel<T> model = init_inr<T>(cfg.seed, cfg.m, cfg.hidden, cfg.kappa);
    MotionCoeffs<T> coeffs = init_motion<T>(alpha_for_iteration(cfg, 0), cfg.k);

    auto params = mlp_params(model.mlp);
    AdamState adam_mlp, adam_c;
    adam_mlp.match(params);
    std::vector<ParamRef<T>> cparams{{"motion.c", coeffs.c.data(), coeffs.c.size()}};
    adam_c.match(cparams);

    Rng root(cfg.seed);
    Rng jitter_rng = root.fork(1);
    Rng batch_rng = root.fork(2);

    const int n = measured.n_proj;
    const int batch_size = std::min(cfg.angles_per_batch, n);
    std::vector<int> order;
    std::size_t cursor = 0;
    auto next_batch = [&]() {
        std::vector<int> batch;
        batch.reserve(batch_size);
        while (static_cast<int>(batch.size()) < batch_size) {
            if (cursor >= order.size()) {
                order.resize(n);
                for (int i = 0; i < n; ++i) order[i] = i;
                for (int i = n - 1; i > 0; --i) {
                    const int j = static_cast<int>(batch_rng.uniform() * (i + 1));
                    std::swap(order[i], order[std::min(j, i)]);
                }
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        return batch;
    };

    ReconArtifact<T> art;
    art.config = cfg;
    art.schedule = measured.schedule;
    art.scene_nz = measured.nz;

    for (long it = 0; it < cfg.iters; ++it) {
        const int alpha = alpha_for_iteration(cfg, it);
        if (alpha != coeffs.alpha) {
            coeffs = upsample_coeffs(coeffs, alpha);
            cparams = {{"motion.c", coeffs.c.data(), coeffs.c.size()}};
            adam_c.match(cparams);
        }

        const std::vector<int> batch = next_batch();
        const CoordGrid<T> grid =
            make_coord_grid<T>(measured.nz, cfg.beta, cfg.beta, cfg.jitter, &jitter_rng);

        PipelineGrads<T> grads;
        PipelineResult<T> res;
        try {
            res = pipeline_loss(model, coeffs, grid, batch, measured, op, cfg.lambda1,
                                cfg.lambda2, &grads);
        } catch (const numeric_error& e) {
            throw numeric_error(e.what(), it);
        }
        if (!std::isfinite(res.total)) throw numeric_error("reconstruct: non-finite loss", it);

        std::vector<const T*> mlp_grads;
        for (int l = 0; l < 4; ++l) {
            mlp_grads.push_back(grads.inr.weights[l].data());
            mlp_grads.push_back(grads.inr.biases[l].data());
        }
        try {
            adam_step(adam_mlp, params, mlp_grads, cfg.lr);
            std::vector<const T*> cg{grads.coeffs.c.data()};
            adam_step(adam_c, cparams, cg, cfg.lr);
        } catch (const numeric_error& e) {
            throw numeric_error(e.what(), it);
        }

        LossRecord rec{it, res.data_term, res.tv_term, alpha};
        art.history.push_back(rec);
        if (on_iter) on_iter(IterationView<T>{rec, model, coeffs});
    }

    art.model = std::move(model);
    art.motion = std::move(coeffs);
    return art;
}

} // namespace tomo4d

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tomo4d/common.hpp"

namespace tomo4d {

/// Everything a reconstruction run needs. Defaults follow the reference
/// settings (lr 1e-3, lambda1 1, lambda2 1e-3, kappa 1, degree-5 motion);
/// sizes are chosen for single-CPU runs and are freely configurable.
struct ReconConfig {
    double lambda1 = 1.0;
    double lambda2 = 1e-3;
    double lr = 1e-3;
    long iters = 2000;
    double kappa = 1.0;
    int m = 128;
    int hidden = 256;
    int beta = 64;  // template grid side
    int k = 5;      // motion polynomial degree
    std::vector<std::pair<long, int>> alpha_schedule;  // empty -> default doubling
    int angles_per_batch = 10;
    std::uint64_t seed = 0;
    std::string precision = "f32";  // "f32" | "f64"
    bool jitter = true;

    void validate() const {
        if (!(lambda1 > 0)) throw std::invalid_argument("config: lambda1 must be > 0");
        if (lambda2 < 0) throw std::invalid_argument("config: lambda2 must be >= 0");
        if (iters < 1) throw std::invalid_argument("config: iters must be >= 1");
        if (beta < 2) throw std::invalid_argument("config: beta must be >= 2");
        if (k < 1) throw std::invalid_argument("config: k must be >= 1");
        if (m < 1 || hidden < 1) throw std::invalid_argument("config: m/hidden must be >= 1");
        if (angles_per_batch < 1)
            throw std::invalid_argument("config: angles_per_batch must be >= 1");
        if (precision != "f32" && precision != "f64")
            throw std::invalid_argument("config: precision must be f32 or f64");
        for (std::size_t i = 1; i < alpha_schedule.size(); ++i)
            if (alpha_schedule[i].first < alpha_schedule[i - 1].first ||
                alpha_schedule[i].second < alpha_schedule[i - 1].second)
                throw std::invalid_argument("config: alpha_schedule must be nondecreasing");
        if (!alpha_schedule.empty() && alpha_schedule[0].first != 0)
            throw std::invalid_argument("config: alpha_schedule must start at iteration 0");
    }

    /// Low polynomial orders underfit nonrigid motion; surface it rather
    /// than failing.
    std::vector<std::string> warnings() const {
        std::vector<std::string> out;
        if (k < 3)
            out.push_back("motion degree k=" + std::to_string(k) +
                          " is below 3; nonrigid motion may be underfit");
        return out;
    }
};

/// Doubling schedule 2 -> 4 -> 8 -> 16 at {0, 20, 40, 60}% of the run,
/// capped at min(16, beta/4).
inline std::vector<std::pair<long, int>> default_alpha_schedule(long iters, int beta) {
    const int cap = std::max(1, std::min(16, beta / 4));
    std::vector<std::pair<long, int>> out;
    int alpha = 2;
    for (int stage = 0; stage < 4; ++stage) {
        const long start = iters * stage / 5;  // 0%, 20%, 40%, 60%
        const int a = std::min(alpha, cap);
        if (out.empty() || out.back().second != a) out.emplace_back(start, a);
        alpha *= 2;
    }
    return out;
}

/// Piecewise-constant lookup of the coefficient resolution for iteration it.
inline int alpha_for_iteration(const ReconConfig& cfg, long iter) {
    if (iter < 0 || iter >= cfg.iters)
        throw std::invalid_argument("alpha_for_iteration: iteration out of range");
    const auto sched =
        cfg.alpha_schedule.empty() ? default_alpha_schedule(cfg.iters, cfg.beta) : cfg.alpha_schedule;
    int alpha = sched.front().second;
    for (const auto& [start, a] : sched)
        if (iter >= start) alpha = a;
    return alpha;
}

inline void to_json(nlohmann::json& j, const ReconConfig& c) {
    j = nlohmann::json{{"lambda1", c.lambda1},
                       {"lambda2", c.lambda2},
                       {"lr", c.lr},
                       {"iters", c.iters},
                       {"kappa", c.kappa},
                       {"m", c.m},
                       {"hidden", c.hidden},
                       {"beta", c.beta},
                       {"k", c.k},
                       {"alpha_schedule", c.alpha_schedule},
                       {"angles_per_batch", c.angles_per_batch},
                       {"seed", c.seed},
                       {"precision", c.precision},
                       {"jitter", c.jitter}};
}

inline void from_json(const nlohmann::json& j, ReconConfig& c) {
    ReconConfig d;
    c.lambda1 = j.value("lambda1", d.lambda1);
    c.lambda2 = j.value("lambda2", d.lambda2);
    c.lr = j.value("lr", d.lr);
    c.iters = j.value("iters", d.iters);
    c.kappa = j.value("kappa", d.kappa);
    c.m = j.value("m", d.m);
    c.hidden = j.value("hidden", d.hidden);
    c.beta = j.value("beta", d.beta);
    c.k = j.value("k", d.k);
    c.alpha_schedule = j.value("alpha_schedule", d.alpha_schedule);
    c.angles_per_batch = j.value("angles_per_batch", d.angles_per_batch);
    c.seed = j.value("seed", d.seed);
    c.precision = j.value("precision", d.precision);
    c.jitter = j.value("jitter", d.jitter);
}

inline std::string config_digest(const ReconConfig& c) {
    nlohmann::json j;
    to_json(j, c);
    return fnv1a_hex(j.dump());
}

} // namespace tomo4d

#pragma once

#include <string>

#include <json.hpp>

#include "tomo4d/common.hpp"
#include "tomo4d/phantom.hpp"

namespace tomo4d {

/// Phantom spec files: {"dim": 2|3, "base": "shepp_logan", "scale": s} or
/// an explicit "ellipsoids" list, plus "motion" and "fit_margin". See
/// README for the motion law fields.
inline PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
    PhantomSpec spec;
    spec.dim = j.value("dim", 2);
    spec.fit_margin = j.value("fit_margin", 0.05);

    if (j.contains("ellipsoids")) {
        for (const auto& je : j.at("ellipsoids")) {
            Ellipsoid e;
            const auto c = je.at("center").get<std::vector<double>>();
            const auto s = je.at("semi").get<std::vector<double>>();
            if (c.size() != 3 || s.size() != 3)
                throw format_error("phantom spec: center/semi must have 3 entries");
            e.center = {c[0], c[1], c[2]};
            e.semi = {s[0], s[1], s[2]};
            e.rot_z_deg = je.value("rot_deg", 0.0);
            e.value = je.at("value").get<double>();
            spec.ellipsoids.push_back(e);
        }
    } else {
        const std::string base = j.value("base", "");
        if (base != "shepp_logan")
            throw format_error("phantom spec: need \"ellipsoids\" or \"base\": \"shepp_logan\"");
        const double scale = j.value("scale", 1.0);
        spec.ellipsoids = spec.dim == 2 ? detail::shepp_logan_2d_table(scale)
                                        : detail::shepp_logan_3d_table(scale);
    }

    if (j.contains("motion")) {
        const auto& jm = j.at("motion");
        const std::string type = jm.value("type", "static");
        if (type == "static") {
            spec.motion.kind = MotionKind::Static;
        } else if (type == "translate") {
            spec.motion.kind = MotionKind::Translate;
            const auto v = jm.at("velocity").get<std::vector<double>>();
            if (v.size() != 3) throw format_error("phantom spec: velocity must have 3 entries");
            spec.motion.velocity = {v[0], v[1], v[2]};
        } else if (type == "sinusoid") {
            spec.motion.kind = MotionKind::Sinusoid;
            spec.motion.axis = jm.at("axis").get<int>();
            spec.motion.amplitude = jm.at("amplitude").get<double>();
            spec.motion.period = jm.value("period", 1.0);
        } else if (type == "squeeze") {
            spec.motion.kind = MotionKind::Squeeze;
            spec.motion.axis = jm.at("axis").get<int>();
            spec.motion.peak = jm.at("peak").get<double>();
            spec.motion.width = jm.value("width", 0.5);
        } else {
            throw format_error("phantom spec: unknown motion type " + type);
        }
    }

    spec.validate();
    return spec;
}

} // namespace tomo4d

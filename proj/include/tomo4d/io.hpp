#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tomo4d/common.hpp"
#include "tomo4d/schedule.hpp"
#include "tomo4d/sinogram.hpp"
#include "tomo4d/volume.hpp"

namespace tomo4d {

// On-disk scheme: <name>.f32 holds raw little-endian 32-bit floats in
// (T,Z,Y,X) row-major order, <name>.json is the sidecar describing them.
// Static volumes use T = 1. Sinograms use shape [N,Z,R] with kind
// "sinogram" plus the schedule fields.

namespace detail {

inline std::string base_path(const std::string& path) {
    std::string p = path;
    for (const char* ext : {".f32", ".json"}) {
        if (p.size() > 4 && p.ends_with(ext)) {
            p.resize(p.size() - std::string(ext).size());
            break;
        }
    }
    return p;
}

inline void write_f32(const std::string& file, const float* data, std::size_t count) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw format_error("cannot open for writing: " + file);
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
    if (!out) throw format_error("short write: " + file);
}

inline std::vector<float> read_f32(const std::string& file, std::size_t expected_count) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) throw format_error("cannot open: " + file);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expected_count * 4)
        throw format_error(file + ": payload holds " + std::to_string(bytes / 4) +
                           " floats, sidecar declares " + std::to_string(expected_count));
    in.seekg(0);
    std::vector<float> out(expected_count);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw format_error("short read: " + file);
    return out;
}

inline nlohmann::json read_sidecar(const std::string& base) {
    std::ifstream in(base + ".json");
    if (!in) throw format_error("cannot open sidecar: " + base + ".json");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("bad sidecar JSON: ") + e.what());
    }
    return j;
}

} // namespace detail

inline void write_volume(const Volume4<float>& vol, const std::string& path) {
    vol.validate();
    const std::string base = detail::base_path(path);
    const auto& f0 = vol.frames[0];
    nlohmann::json side = {
        {"kind", "volume"},
        {"shape", {vol.frames.size(), f0.nz, f0.ny, f0.nx}},
        {"times", vol.times},
        {"extent", {-1, 1}},
    };
    std::ofstream js(base + ".json");
    if (!js) throw format_error("cannot open for writing: " + base + ".json");
    js << side.dump(2) << "\n";

    std::vector<float> payload;
    payload.reserve(vol.frames.size() * f0.size());
    for (const auto& f : vol.frames) payload.insert(payload.end(), f.data.begin(), f.data.end());
    detail::write_f32(base + ".f32", payload.data(), payload.size());
}

inline void write_volume(const Volume3<float>& vol, const std::string& path) {
    Volume4<float> v4;
    v4.frames = {vol};
    v4.times = {0.0};
    write_volume(v4, path);
}

inline Volume4<float> read_volume(const std::string& path) {
    const std::string base = detail::base_path(path);
    const nlohmann::json j = detail::read_sidecar(base);
    if (j.value("kind", "") != "volume") throw format_error(base + ": sidecar kind is not volume");
    const auto shape = j.at("shape").get<std::vector<long>>();
    if (shape.size() != 4) throw format_error(base + ": volume shape must be [T,Z,Y,X]");
    const long t = shape[0], nz = shape[1], ny = shape[2], nx = shape[3];
    if (t < 1 || nz < 1 || ny < 1 || nx < 1) throw format_error(base + ": bad shape");
    const auto payload =
        detail::read_f32(base + ".f32", static_cast<std::size_t>(t) * nz * ny * nx);

    Volume4<float> vol;
    vol.times = j.at("times").get<std::vector<double>>();
    if (static_cast<long>(vol.times.size()) != t)
        throw format_error(base + ": times length != frame count");
    const std::size_t per = static_cast<std::size_t>(nz) * ny * nx;
    for (long i = 0; i < t; ++i) {
        Volume3<float> f(static_cast<int>(nz), static_cast<int>(ny), static_cast<int>(nx));
        std::copy(payload.begin() + i * per, payload.begin() + (i + 1) * per, f.data.begin());
        vol.frames.push_back(std::move(f));
    }
    vol.validate();
    return vol;
}

inline void write_sinogram(const Sinogram<float>& sino, const std::string& path) {
    const std::string base = detail::base_path(path);
    nlohmann::json side = {
        {"kind", "sinogram"},
        {"shape", {sino.n_proj, sino.nz, sino.n_bins}},
        {"angles_deg", sino.schedule.angles_deg},
        {"times", sino.schedule.times},
        {"arc", {sino.schedule.arc_start_deg, sino.schedule.arc_stop_deg}},
    };
    std::ofstream js(base + ".json");
    if (!js) throw format_error("cannot open for writing: " + base + ".json");
    js << side.dump(2) << "\n";
    detail::write_f32(base + ".f32", sino.data.data(), sino.data.size());
}

inline Sinogram<float> read_sinogram(const std::string& path) {
    const std::string base = detail::base_path(path);
    const nlohmann::json j = detail::read_sidecar(base);
    if (j.value("kind", "") != "sinogram")
        throw format_error(base + ": sidecar kind is not sinogram");
    const auto shape = j.at("shape").get<std::vector<long>>();
    if (shape.size() != 3) throw format_error(base + ": sinogram shape must be [N,Z,R]");
    Sinogram<float> sino(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
                         static_cast<int>(shape[2]));
    sino.data = detail::read_f32(base + ".f32", sino.data.size());
    sino.schedule.angles_deg = j.at("angles_deg").get<std::vector<double>>();
    sino.schedule.times = j.at("times").get<std::vector<double>>();
    const auto arc = j.at("arc").get<std::vector<double>>();
    if (arc.size() != 2) throw format_error(base + ": arc must be [start,stop]");
    sino.schedule.arc_start_deg = arc[0];
    sino.schedule.arc_stop_deg = arc[1];
    sino.schedule.validate();
    if (sino.schedule.n_proj() != sino.n_proj)
        throw format_error(base + ": schedule length != N");
    return sino;
}

} // namespace tomo4d

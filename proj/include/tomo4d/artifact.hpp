#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tomo4d/common.hpp"
#include "tomo4d/config.hpp"
#include "tomo4d/inr.hpp"
#include "tomo4d/motion.hpp"
#include "tomo4d/schedule.hpp"

namespace tomo4d {

struct LossRecord {
    long iteration = 0;
    double data_loss = 0;
    double tv_loss = 0;
    int alpha = 0;
};

/// The optimized scene bundle: everything needed to render any
/// (resolution, time) without re-optimizing. scene_nz records the z extent
/// of the measured grid (1 for 2D scenes).
template <typename T>
struct ReconArtifact {
    InrModel<T> model;
    MotionCoeffs<T> motion;
    ReconConfig config;
    ScanSchedule schedule;
    std::vector<LossRecord> history;
    int scene_nz = 1;
};

namespace detail {

struct TensorEntry {
    std::string name;
    std::vector<long> shape;
    std::size_t offset = 0;  // in floats
    std::size_t count = 0;
};

inline void append_tensor(std::vector<float>& blob, std::vector<TensorEntry>& table,
                          const std::string& name, std::vector<long> shape,
                          const float* data, std::size_t count) {
    table.push_back({name, std::move(shape), blob.size(), count});
    blob.insert(blob.end(), data, data + count);
}

} // namespace detail

/// Checkpoint layout: <dir>/tensors.f32 (little-endian f32 blob),
/// <dir>/manifest.json (tensor table + model metadata + schedule),
/// <dir>/config.json, <dir>/loss_history.csv. The GRFF frequency matrix is
/// stored verbatim so a reload reproduces the reconstruction exactly.
template <typename T>
void save_artifact(const ReconArtifact<T>& art, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::vector<float> blob;
    std::vector<detail::TensorEntry> table;
    const auto& g = art.model.grff;
    const auto& mlp = art.model.mlp;

    std::vector<float> tmp;
    auto push_matrix = [&](const std::string& name, const Mat<T>& mat) {
        tmp.resize(static_cast<std::size_t>(mat.rows()) * mat.cols());
        for (Eigen::Index r = 0; r < mat.rows(); ++r)
            for (Eigen::Index c = 0; c < mat.cols(); ++c)
                tmp[static_cast<std::size_t>(r) * mat.cols() + c] = static_cast<float>(mat(r, c));
        detail::append_tensor(blob, table, name, {mat.rows(), mat.cols()}, tmp.data(), tmp.size());
    };
    auto push_vector = [&](const std::string& name, const ColVec<T>& vec) {
        tmp.resize(static_cast<std::size_t>(vec.size()));
        for (Eigen::Index r = 0; r < vec.size(); ++r) tmp[static_cast<std::size_t>(r)] = static_cast<float>(vec(r));
        detail::append_tensor(blob, table, name, {vec.size()}, tmp.data(), tmp.size());
    };

    push_matrix("grff.freq", g.freq);
    for (int l = 0; l < 4; ++l) {
        push_matrix("mlp.w" + std::to_string(l), mlp.weights[l]);
        push_vector("mlp.b" + std::to_string(l), mlp.biases[l]);
    }
    {
        const auto& mc = art.motion;
        tmp.resize(mc.c.size());
        for (std::size_t i = 0; i < mc.c.size(); ++i) tmp[i] = static_cast<float>(mc.c[i]);
        detail::append_tensor(blob, table, "motion.c",
                              {mc.alpha, mc.alpha, mc.alpha, mc.degree + 1, 3}, tmp.data(),
                              tmp.size());
    }

    {
        std::ofstream out(dir + "/tensors.f32", std::ios::binary);
        if (!out) throw format_error("cannot write " + dir + "/tensors.f32");
        out.write(reinterpret_cast<const char*>(blob.data()),
                  static_cast<std::streamsize>(blob.size() * 4));
    }

    nlohmann::json jt = nlohmann::json::array();
    for (const auto& e : table)
        jt.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
    nlohmann::json manifest = {
        {"tensors", jt},
        {"kappa", static_cast<double>(g.kappa)},
        {"m", g.m()},
        {"hidden", art.model.mlp.hidden_width()},
        {"seed", art.model.seed},
        {"degree", art.motion.degree},
        {"alpha", art.motion.alpha},
        {"scene_nz", art.scene_nz},
        {"schedule",
         {{"angles_deg", art.schedule.angles_deg},
          {"times", art.schedule.times},
          {"arc", {art.schedule.arc_start_deg, art.schedule.arc_stop_deg}}}},
    };
    std::ofstream jm(dir + "/manifest.json");
    jm << manifest.dump(2) << "\n";

    nlohmann::json jc;
    to_json(jc, art.config);
    std::ofstream cf(dir + "/config.json");
    cf << jc.dump(2) << "\n";

    std::ofstream hist(dir + "/loss_history.csv");
    hist << "iteration,data_loss,tv_loss,alpha\n";
    char line[128];
    for (const auto& r : art.history) {
        std::snprintf(line, sizeof(line), "%ld,%.9g,%.9g,%d\n", r.iteration, r.data_loss,
                      r.tv_loss, r.alpha);
        hist << line;
    }
}

template <typename T>
ReconArtifact<T> load_artifact(const std::string& dir) {
    std::ifstream jm(dir + "/manifest.json");
    if (!jm) throw format_error("cannot open " + dir + "/manifest.json");
    nlohmann::json manifest;
    jm >> manifest;

    std::ifstream bin(dir + "/tensors.f32", std::ios::binary | std::ios::ate);
    if (!bin) throw format_error("cannot open " + dir + "/tensors.f32");
    const std::size_t n_floats = static_cast<std::size_t>(bin.tellg()) / 4;
    bin.seekg(0);
    std::vector<float> blob(n_floats);
    bin.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(n_floats * 4));

    ReconArtifact<T> art;
    art.model.grff.kappa = static_cast<T>(manifest.at("kappa").get<double>());
    art.model.seed = manifest.value("seed", std::uint64_t(0));
    art.scene_nz = manifest.value("scene_nz", 1);
    const int m = manifest.at("m").get<int>();
    const int hidden = manifest.at("hidden").get<int>();
    const int degree = manifest.at("degree").get<int>();
    const int alpha = manifest.at("alpha").get<int>();

    auto find = [&](const std::string& name) -> std::pair<std::size_t, std::vector<long>> {
        for (const auto& e : manifest.at("tensors")) {
            if (e.at("name").get<std::string>() == name)
                return {e.at("offset").get<std::size_t>(), e.at("shape").get<std::vector<long>>()};
        }
        throw format_error(dir + ": tensor " + name + " missing from manifest");
    };

    auto read_matrix = [&](const std::string& name) {
        auto [off, shape] = find(name);
        if (shape.size() != 2) throw format_error(name + ": expected rank-2 tensor");
        Mat<T> mat(shape[0], shape[1]);
        if (off + static_cast<std::size_t>(shape[0]) * shape[1] > blob.size())
            throw format_error(name + ": blob too short");
        for (long r = 0; r < shape[0]; ++r)
            for (long c = 0; c < shape[1]; ++c)
                mat(r, c) = static_cast<T>(blob[off + static_cast<std::size_t>(r) * shape[1] + c]);
        return mat;
    };
    auto read_vector = [&](const std::string& name) {
        auto [off, shape] = find(name);
        if (shape.size() != 1) throw format_error(name + ": expected rank-1 tensor");
        ColVec<T> vec(shape[0]);
        if (off + static_cast<std::size_t>(shape[0]) > blob.size())
            throw format_error(name + ": blob too short");
        for (long r = 0; r < shape[0]; ++r) vec(r) = static_cast<T>(blob[off + r]);
        return vec;
    };

    art.model.grff.freq = read_matrix("grff.freq");
    if (art.model.grff.m() != m) throw format_error(dir + ": frequency count disagrees with m");
    for (int l = 0; l < 4; ++l) {
        art.model.mlp.weights.push_back(read_matrix("mlp.w" + std::to_string(l)));
        art.model.mlp.biases.push_back(read_vector("mlp.b" + std::to_string(l)));
    }
    if (art.model.mlp.hidden_width() != hidden)
        throw format_error(dir + ": hidden width disagrees with manifest");

    {
        auto [off, shape] = find("motion.c");
        if (shape.size() != 5) throw format_error("motion.c: expected rank-5 tensor");
        art.motion = MotionCoeffs<T>(alpha, degree);
        if (off + art.motion.c.size() > blob.size()) throw format_error("motion.c: blob too short");
        for (std::size_t i = 0; i < art.motion.c.size(); ++i)
            art.motion.c[i] = static_cast<T>(blob[off + i]);
    }

    const auto& js = manifest.at("schedule");
    art.schedule.angles_deg = js.at("angles_deg").get<std::vector<double>>();
    art.schedule.times = js.at("times").get<std::vector<double>>();
    art.schedule.arc_start_deg = js.at("arc")[0].get<double>();
    art.schedule.arc_stop_deg = js.at("arc")[1].get<double>();

    std::ifstream cf(dir + "/config.json");
    if (cf) {
        nlohmann::json jc;
        cf >> jc;
        from_json(jc, art.config);
    }
    return art;
}

} // namespace tomo4d

// Command-line front end: phantom generation, dynamic projection,
// reconstruction, classical baselines, rendering, metrics and the
// verification commands. One manifest is written beside every output so a
// run can be reproduced from its artifacts alone.
//
// Exit codes: 0 success, 2 user/config error, 3 numeric failure,
// 4 tolerance breach in verification commands.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tomo4d/gradcheck.hpp"
#include "tomo4d/phantom_json.hpp"
#include "tomo4d/tomo4d.hpp"

namespace {

using nlohmann::json;
using namespace tomo4d;

constexpr int kExitOk = 0;
constexpr int kExitUser = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitTolerance = 4;

struct tolerance_breach : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int default_threads() {
    if (const char* env = std::getenv("TOMO4D_THREADS")) {
        const int t = std::atoi(env);
        if (t >= 1) return t;
    }
    return 1;
}

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_manifest(const std::string& beside, const std::string& command, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, std::uint64_t seed,
                    double duration_s) {
    json m = {
        {"command", command},      {"tool_version", kToolVersion},
        {"config", config},        {"inputs", inputs},
        {"outputs", outputs},      {"seed", seed},
        {"duration_seconds", duration_s},
    };
    std::ofstream out(beside);
    if (!out) throw format_error("cannot write manifest " + beside);
    out << m.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    return j;
}

// ---------------------------------------------------------------------------

struct PhantomArgs {
    std::string spec_file, out;
    int side = 80, frames = 1;
    bool supersample = false;
};

void cmd_phantom(const PhantomArgs& a) {
    Stopwatch timer;
    const json jspec = read_json_file(a.spec_file);
    PhantomSpec spec;
    try {
        spec = phantom_spec_from_json(jspec);
    } catch (const format_error& e) {
        throw std::invalid_argument(e.what());
    }

    Volume4<float> vol;
    for (int f = 0; f < a.frames; ++f) {
        const double t = a.frames == 1 ? 0.0 : static_cast<double>(f) / (a.frames - 1);
        vol.frames.push_back(render_phantom<float>(spec, a.side, t, a.supersample));
        vol.times.push_back(t);
    }
    write_volume(vol, a.out);
    write_manifest(detail::base_path(a.out) + ".run.json", "phantom",
                   {{"spec_file", a.spec_file},
                    {"spec", jspec},
                    {"side", a.side},
                    {"frames", a.frames},
                    {"supersample", a.supersample},
                    {"out", a.out}},
                   {a.spec_file}, {detail::base_path(a.out) + ".f32"}, 0, timer.seconds());
}

struct ProjectArgs {
    std::string vol, out;
    std::vector<double> arc{0, 180};
    int n = 90, detector = 0, threads = default_threads();
    double noise = 0, step = 0.5;
    std::uint64_t seed = 0;
    bool exclusive_stop = false, exact_times = false;
};

void cmd_project(const ProjectArgs& a) {
    Stopwatch timer;
    const Volume4<float> scene = read_volume(a.vol);
    const ScanSchedule sched = make_schedule(a.arc[0], a.arc[1], a.n, !a.exclusive_stop);
    const int side = scene.frames[0].nx;
    if (scene.frames[0].ny != side)
        throw std::invalid_argument("project: volume must have square slices");
    RadonOperator<float> op(side, sched.angles_deg, a.detector);
    op.step_vox = a.step;
    op.threads = a.threads;

    Sinogram<float> sino = project_dynamic(op, scene, sched, !a.exact_times);
    if (a.noise > 0) {
        Rng rng(a.seed);
        for (auto& v : sino.data) v += static_cast<float>(rng.normal() * a.noise);
    }
    write_sinogram(sino, a.out);
    write_manifest(detail::base_path(a.out) + ".run.json", "project",
                   {{"vol", a.vol},
                    {"arc", a.arc},
                    {"n", a.n},
                    {"detector", a.detector},
                    {"noise", a.noise},
                    {"seed", a.seed},
                    {"step", a.step},
                    {"exclusive_stop", a.exclusive_stop},
                    {"exact_times", a.exact_times},
                    {"threads", a.threads},
                    {"out", a.out}},
                   {a.vol}, {detail::base_path(a.out) + ".f32"}, a.seed, timer.seconds());
}

struct ReconstructArgs {
    std::string sino, config, out;
    int threads = default_threads();
    long checkpoint_every = 0;
};

template <typename T>
void run_reconstruct(const Sinogram<float>& sino_f, const ReconConfig& cfg,
                     const ReconstructArgs& a) {
    const Sinogram<T> sino = sino_f.template cast<T>();
    long last_logged = -1;
    auto on_iter = [&](const IterationView<T>& view) {
        if (a.checkpoint_every > 0 && (view.record.iteration + 1) % a.checkpoint_every == 0) {
            ReconArtifact<T> snap{view.model, view.motion, cfg, sino.schedule, {}, sino.nz};
            save_artifact(snap, a.out);
        }
        const long it = view.record.iteration;
        if (it == 0 || it - last_logged >= std::max<long>(1, cfg.iters / 20) ||
            it + 1 == cfg.iters) {
            std::cerr << "iter " << it << "  data " << view.record.data_loss << "  tv "
                      << view.record.tv_loss << "  alpha " << view.record.alpha << "\n";
            last_logged = it;
        }
    };
    const ReconArtifact<T> art = reconstruct<T>(sino, cfg, on_iter);
    save_artifact(art, a.out);
}

void cmd_reconstruct(const ReconstructArgs& a) {
    Stopwatch timer;
    const json jcfg = read_json_file(a.config);
    ReconConfig cfg;
    from_json(jcfg, cfg);
    cfg.validate();
    for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << "\n";

    const Sinogram<float> sino = read_sinogram(a.sino);
    if (cfg.precision == "f64")
        run_reconstruct<double>(sino, cfg, a);
    else
        run_reconstruct<float>(sino, cfg, a);

    json jc;
    to_json(jc, cfg);
    write_manifest(a.out + "/run.json", "reconstruct",
                   {{"sino", a.sino},
                    {"config_file", a.config},
                    {"config", jc},
                    {"threads", a.threads},
                    {"checkpoint_every", a.checkpoint_every},
                    {"out", a.out}},
                   {a.sino, a.config}, {a.out}, cfg.seed, timer.seconds());
}

struct BaselineArgs {
    std::string sino, out, gt, window = "none";
    int side = 0, iters = 20;
    double relax = 0.5;
    int threads = default_threads();
};

void report_vs_gt(const Volume3<float>& vol, const std::string& gt_path) {
    if (gt_path.empty()) return;
    const Volume4<float> gt = read_volume(gt_path);
    const double p = psnr(vol, gt.frames[0]);
    std::cout << "PSNR " << p << " dB\n";
}

void cmd_baseline(const BaselineArgs& a, bool use_fbp) {
    Stopwatch timer;
    const Sinogram<float> sino = read_sinogram(a.sino);
    const int side = a.side > 0 ? a.side : sino.n_bins;
    RadonOperator<float> op(side, sino.schedule.angles_deg, sino.n_bins);
    op.threads = a.threads;

    Volume3<float> vol;
    if (use_fbp)
        vol = fbp(op, sino, parse_window(a.window));
    else
        vol = sart(op, sino, a.iters, a.relax);
    write_volume(vol, a.out);
    report_vs_gt(vol, a.gt);

    json cfg = {{"sino", a.sino}, {"out", a.out}, {"side", side}, {"threads", a.threads}};
    if (use_fbp)
        cfg["window"] = a.window;
    else {
        cfg["iters"] = a.iters;
        cfg["relax"] = a.relax;
    }
    if (!a.gt.empty()) cfg["gt"] = a.gt;
    write_manifest(detail::base_path(a.out) + ".run.json", use_fbp ? "baseline fbp" : "baseline sart",
                   cfg, {a.sino}, {detail::base_path(a.out) + ".f32"}, 0, timer.seconds());
}

struct RenderArgs {
    std::string artifact, out;
    int side = 0, frames = 10;
};

void cmd_render(const RenderArgs& a) {
    Stopwatch timer;
    const ReconArtifact<float> art = load_artifact<float>(a.artifact);
    const int side = a.side > 0 ? a.side : art.config.beta;
    const Volume4<float> seq = render_sequence(art, side, a.frames);
    write_volume(seq, a.out);
    write_manifest(detail::base_path(a.out) + ".run.json", "render",
                   {{"artifact", a.artifact}, {"side", side}, {"frames", a.frames}, {"out", a.out}},
                   {a.artifact}, {detail::base_path(a.out) + ".f32"}, 0, timer.seconds());
}

struct MetricsArgs {
    std::string est, gt, out, label = "est", scene;
    bool nearest = false;
};

void cmd_metrics(const MetricsArgs& a) {
    Stopwatch timer;
    const Volume4<float> est = read_volume(a.est);
    const Volume4<float> gt = read_volume(a.gt);
    MetricsReport rep = compare<float>({{a.label, est}}, gt, a.nearest, a.scene);
    write_report_csv(rep, a.out);
    std::cout << format_report(rep);
    write_manifest(a.out + ".run.json", "metrics",
                   {{"est", a.est},
                    {"gt", a.gt},
                    {"label", a.label},
                    {"scene", a.scene},
                    {"nearest", a.nearest},
                    {"out", a.out}},
                   {a.est, a.gt}, {a.out}, 0, timer.seconds());
}

struct AdjointArgs {
    int side = 32, angles = 16, pairs = 20;
    double tol = 1e-5;
    std::uint64_t seed = 0;
};

void cmd_adjoint_test(const AdjointArgs& a) {
    const ScanSchedule sched = make_schedule(0, 180, a.angles, false);
    RadonOperator<double> op(a.side, sched.angles_deg);
    Rng rng(a.seed);
    double worst = 0;
    for (int p = 0; p < a.pairs; ++p) {
        Volume3<double> x(1, a.side, a.side);
        for (auto& v : x.data) v = rng.uniform(-1, 1);
        Sinogram<double> y(a.angles, 1, op.n_bins);
        for (auto& v : y.data) v = rng.uniform(-1, 1);
        const Sinogram<double> rx = radon_forward(op, x);
        const Volume3<double> rty = radon_adjoint(op, y);
        double lhs = 0, rhs = 0, nrx = 0, ny = 0;
        for (std::size_t i = 0; i < rx.data.size(); ++i) {
            lhs += rx.data[i] * y.data[i];
            nrx += rx.data[i] * rx.data[i];
            ny += y.data[i] * y.data[i];
        }
        for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * rty.data[i];
        const double rel = std::abs(lhs - rhs) / (std::sqrt(nrx) * std::sqrt(ny));
        worst = std::max(worst, rel);
    }
    std::cout << "adjoint discrepancy (max over " << a.pairs << " pairs, side " << a.side
              << "): " << worst << " (tol " << a.tol << ")\n";
    if (worst >= a.tol) throw tolerance_breach("adjoint discrepancy exceeds tolerance");
}

void cmd_gradcheck(const std::string& size) {
    if (size != "tiny") throw std::invalid_argument("gradcheck: only --size tiny is defined");
    bool all_pass = true;
    for (const auto& r : run_gradcheck()) {
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << "  max_rel_err "
                  << r.max_rel_err << "  tol " << r.tol << "\n";
        all_pass = all_pass && r.pass;
    }
    if (!all_pass) throw tolerance_breach("gradient checks exceeded tolerance");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"4D computed-tomography reconstruction toolkit"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    PhantomArgs pa;
    auto* phantom_cmd = app.add_subcommand("phantom", "Render a dynamic phantom to volume files");
    phantom_cmd->add_option("--spec", pa.spec_file, "Phantom spec JSON file")->required();
    phantom_cmd->add_option("--side", pa.side, "Grid side");
    phantom_cmd->add_option("--frames", pa.frames, "Number of frames at uniform times");
    phantom_cmd->add_option("--out", pa.out, "Output base path")->required();
    phantom_cmd->add_flag("--supersample", pa.supersample, "Average 2 samples per axis per cell");

    ProjectArgs ja;
    auto* project_cmd = app.add_subcommand("project", "Project a scene into a sinogram");
    project_cmd->add_option("--vol", ja.vol, "Input volume base path")->required();
    project_cmd->add_option("--arc", ja.arc, "Start/stop angles in degrees")->expected(2);
    project_cmd->add_option("--n", ja.n, "Number of projections");
    project_cmd->add_option("--detector", ja.detector, "Detector bins (default: volume side)");
    project_cmd->add_option("--noise", ja.noise, "Gaussian measurement noise sigma");
    project_cmd->add_option("--seed", ja.seed, "Noise seed");
    project_cmd->add_option("--step", ja.step, "Ray step in voxel units");
    project_cmd->add_option("--threads", ja.threads, "Worker threads");
    project_cmd->add_flag("--exclusive-stop", ja.exclusive_stop, "Leave the stop angle out");
    project_cmd->add_flag("--exact-times", ja.exact_times,
                          "Require frames exactly at projection times");
    project_cmd->add_option("--out", ja.out, "Output base path")->required();

    ReconstructArgs ra;
    auto* recon_cmd = app.add_subcommand("reconstruct", "Jointly optimize template and motion");
    recon_cmd->add_option("--sino", ra.sino, "Measured sinogram base path")->required();
    recon_cmd->add_option("--config", ra.config, "Reconstruction config JSON")->required();
    recon_cmd->add_option("--out", ra.out, "Artifact output directory")->required();
    recon_cmd->add_option("--threads", ra.threads, "Worker threads");
    recon_cmd->add_option("--checkpoint-every", ra.checkpoint_every,
                          "Write a checkpoint every K iterations");

    BaselineArgs ba;
    auto* baseline_cmd = app.add_subcommand("baseline", "Classical reconstructions");
    baseline_cmd->require_subcommand(1);
    auto* fbp_cmd = baseline_cmd->add_subcommand("fbp", "Filtered backprojection");
    fbp_cmd->add_option("--sino", ba.sino, "Sinogram base path")->required();
    fbp_cmd->add_option("--out", ba.out, "Output volume base path")->required();
    fbp_cmd->add_option("--window", ba.window, "Filter window: none|hann");
    fbp_cmd->add_option("--side", ba.side, "Volume side (default: detector bins)");
    fbp_cmd->add_option("--gt", ba.gt, "Ground truth volume; prints PSNR");
    fbp_cmd->add_option("--threads", ba.threads, "Worker threads");
    auto* sart_cmd = baseline_cmd->add_subcommand("sart", "Simultaneous algebraic reconstruction");
    sart_cmd->add_option("--sino", ba.sino, "Sinogram base path")->required();
    sart_cmd->add_option("--out", ba.out, "Output volume base path")->required();
    sart_cmd->add_option("--iters", ba.iters, "Sweeps");
    sart_cmd->add_option("--relax", ba.relax, "Relaxation in (0,1]");
    sart_cmd->add_option("--side", ba.side, "Volume side (default: detector bins)");
    sart_cmd->add_option("--gt", ba.gt, "Ground truth volume; prints PSNR");
    sart_cmd->add_option("--threads", ba.threads, "Worker threads");

    RenderArgs na;
    auto* render_cmd = app.add_subcommand("render", "Render frames from an artifact");
    render_cmd->add_option("--artifact", na.artifact, "Artifact directory")->required();
    render_cmd->add_option("--side", na.side, "Output side (default: optimization side)");
    render_cmd->add_option("--frames", na.frames, "Number of frames");
    render_cmd->add_option("--out", na.out, "Output base path")->required();

    MetricsArgs ma;
    auto* metrics_cmd = app.add_subcommand("metrics", "PSNR/SSIM against ground truth");
    metrics_cmd->add_option("--est", ma.est, "Estimated sequence base path")->required();
    metrics_cmd->add_option("--gt", ma.gt, "Ground truth sequence base path")->required();
    metrics_cmd->add_option("--out", ma.out, "Report CSV path")->required();
    metrics_cmd->add_option("--label", ma.label, "Method label");
    metrics_cmd->add_option("--scene", ma.scene, "Scene label");
    metrics_cmd->add_flag("--nearest", ma.nearest, "Match frames by nearest time");

    AdjointArgs aa;
    auto* adjoint_cmd = app.add_subcommand("adjoint-test", "Verify the projector pair");
    adjoint_cmd->add_option("--side", aa.side, "Volume side");
    adjoint_cmd->add_option("--angles", aa.angles, "Number of angles");
    adjoint_cmd->add_option("--pairs", aa.pairs, "Random pairs");
    adjoint_cmd->add_option("--tol", aa.tol, "Relative tolerance");
    adjoint_cmd->add_option("--seed", aa.seed, "Random seed");

    std::string gc_size = "tiny";
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    gradcheck_cmd->add_option("--size", gc_size, "Problem size (tiny)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUser;
    }

    try {
        if (phantom_cmd->parsed()) cmd_phantom(pa);
        else if (project_cmd->parsed()) cmd_project(ja);
        else if (recon_cmd->parsed()) cmd_reconstruct(ra);
        else if (baseline_cmd->parsed()) cmd_baseline(ba, fbp_cmd->parsed());
        else if (render_cmd->parsed()) cmd_render(na);
        else if (metrics_cmd->parsed()) cmd_metrics(ma);
        else if (adjoint_cmd->parsed()) cmd_adjoint_test(aa);
        else if (gradcheck_cmd->parsed()) cmd_gradcheck(gc_size);
    } catch (const tolerance_breach& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTolerance;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUser;
    }
    return kExitOk;
}

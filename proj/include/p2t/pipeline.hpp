// SPDX-License-Identifier: Apache-2.0
//
// End-to-end commands behind the CLI. Every command is a plain function of
// its inputs and the config, so tests can drive the same code paths.
//
// Dataset directory layout (one frame = one stem):
//   <stem>.polar4d.rpt  <stem>.polar3d.rpt  <stem>.gt.rpt   from simulate
//   <stem>.cloud.rpc    <stem>.pcd.csv                      from extract

#ifndef P2T_PIPELINE_HPP
#define P2T_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "p2t/io/config.hpp"
#include "p2t/io/formats.hpp"
#include "p2t/io/tables.hpp"
#include "p2t/metrics.hpp"
#include "p2t/model/trainer.hpp"
#include "p2t/pointcloud.hpp"
#include "p2t/radar_sim.hpp"
#include "p2t/tensorize.hpp"

namespace p2t::pipeline {

namespace fs = std::filesystem;
using io::PipelineConfig;

/// File name up to the first dot: "scene_003.gt.rpt" -> "scene_003".
inline std::string stem_of(const fs::path& p) {
    const std::string name = p.filename().string();
    return name.substr(0, name.find('.'));
}

inline void ensure_dir(const fs::path& d) {
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw DataError("cannot create directory '" + d.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Scenes

struct SceneSpec {
    int min_scatterers = 3;
    int max_scatterers = 6;
    double min_range = 4.0;  // m, keeps targets off the range origin
    double max_speed = 5.0;  // m/s
};

/// Random scatterers whose positions lie inside the ROI and the radar's
/// unambiguous range.
inline Scene random_scene(std::mt19937_64& rng, const RadarConfig& radar, const RoiGrid& grid,
                          const SceneSpec& opts = {}) {
    std::uniform_int_distribution<int> count(opts.min_scatterers, opts.max_scatterers);
    std::uniform_real_distribution<double> ux(grid.x_min, grid.x_max), uy(grid.y_min, grid.y_max),
        uz(grid.z_min, grid.z_max), uv(-opts.max_speed, opts.max_speed), ua(0.5, 2.0);
    const double rmax = radar.max_range() - radar.range_resolution();
    Scene s;
    const int n = count(rng);
    while (static_cast<int>(s.scatterers.size()) < n) {
        const Cartesian c{ux(rng), uy(rng), uz(rng)};
        const double v = uv(rng), a = ua(rng);
        const Polar p = to_polar(c);
        if (p.range < opts.min_range || p.range >= rmax || c.x <= 0.0) continue;
        s.scatterers.push_back({p.range, p.azimuth, p.elevation, v, a});
    }
    return s;
}

/// Writes `count` random scene files `scene_NNN.txt`; returns their paths.
inline std::vector<fs::path> cmd_synth(const PipelineConfig& cfg, int count, const fs::path& out_dir,
                                       const SceneSpec& opts = {}) {
    if (count < 1) throw ConfigError("synth: count must be >= 1");
    ensure_dir(out_dir);
    std::mt19937_64 rng(cfg.seed);
    std::vector<fs::path> out;
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%03d.txt", i);
        const fs::path p = out_dir / name;
        io::write_text(p.string(), io::scene_to_text(random_scene(rng, cfg.radar, cfg.grid, opts)));
        out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// simulate

struct Frame {
    PolarTensor4D polar4d;
    PolarTensor3D polar3d;
    CubeTensor gt;
};

/// Signal chain plus ground truth for one scene; noise seeded by `seed`.
inline Frame simulate_frame(const PipelineConfig& cfg, const Scene& scene, std::uint64_t seed) {
    Frame f;
    f.polar4d = simulate_polar(scene, cfg.radar, seed);
    f.polar3d = collapse_doppler(f.polar4d, cfg.doppler_reduce);
    f.gt = ground_truth_cube(f.polar3d, cfg.grid);
    return f;
}

struct SimulateOutputs {
    fs::path polar4d, polar3d, gt;
};

inline SimulateOutputs cmd_simulate(const PipelineConfig& cfg, const fs::path& scene_path, const fs::path& out_dir) {
    cfg.validate();
    const Scene scene = io::load_scene(scene_path.string(), &cfg.radar);
    const Frame f = simulate_frame(cfg, scene, cfg.seed);
    ensure_dir(out_dir);
    const std::string stem = stem_of(scene_path);
    SimulateOutputs o{out_dir / (stem + ".polar4d.rpt"), out_dir / (stem + ".polar3d.rpt"),
                      out_dir / (stem + ".gt.rpt")};
    io::write_rpt1(o.polar4d.string(), io::to_raw(f.polar4d));
    io::write_rpt1(o.polar3d.string(), io::to_raw(f.polar3d.power));
    io::write_rpt1(o.gt.string(), io::to_raw(f.gt.power));
    return o;
}

// ---------------------------------------------------------------------------
// extract

/// Loads a polar tensor file (rank 4 is Doppler-collapsed on the fly) and
/// attaches the bin axes implied by the radar config.
inline PolarTensor3D load_polar3d(const PipelineConfig& cfg, const fs::path& path) {
    const io::RawTensor raw = io::read_rpt1(path.string());
    const RadarConfig& r = cfg.radar;
    const std::vector<std::uint32_t> want3 = {static_cast<std::uint32_t>(r.samples_per_chirp),
                                              static_cast<std::uint32_t>(r.azimuth_antennas),
                                              static_cast<std::uint32_t>(r.elevation_antennas)};
    PolarTensor3D t;
    if (raw.dims.size() == 4) {
        std::vector<std::uint32_t> head(raw.dims.begin(), raw.dims.begin() + 3);
        if (head != want3 || raw.dims[3] != static_cast<std::uint32_t>(r.chirps_per_frame))
            throw DataError(path.string() + ": tensor dims do not match the radar config");
        PolarTensor4D p;
        for (int a = 0; a < 4; ++a) p.dims[a] = static_cast<int>(raw.dims[a]);
        p.power.assign(raw.values.begin(), raw.values.end());
        p.axes = polar_axes(r);
        t = collapse_doppler(p, cfg.doppler_reduce);
    } else {
        if (raw.dims != want3) throw DataError(path.string() + ": tensor dims do not match the radar config");
        t.power = io::to_array3(raw);
        t.axes = polar_axes(r);
    }
    return t;
}

struct ExtractOutputs {
    fs::path cloud;
    fs::path report;
    std::size_t points = 0;
    double pcd_percent = 0.0;
};

inline ExtractOutputs cmd_extract(const PipelineConfig& cfg, const fs::path& tensor_path, const MethodTag& method,
                                  const fs::path& out_dir) {
    cfg.validate();
    const PolarTensor3D t = load_polar3d(cfg, tensor_path);
    const RadarPointCloud cloud = extract(t, method, cfg.cfar);
    ensure_dir(out_dir);
    const std::string stem = stem_of(tensor_path);
    ExtractOutputs o;
    o.cloud = out_dir / (stem + ".cloud.rpc");
    o.report = out_dir / (stem + ".pcd.csv");
    o.points = cloud.points.size();
    o.pcd_percent = 100.0 * pcd(cloud, cfg.grid);
    io::write_rpc1(o.cloud.string(), cloud);
    io::write_text(o.report.string(), "method,hyper,points,pcd_percent\n" + method.family() + "," + method.hyper() +
                                          "," + std::to_string(o.points) + "," + io::fixed4(o.pcd_percent) + "\n");
    return o;
}

// ---------------------------------------------------------------------------
// Dataset

struct FramePaths {
    std::string stem;
    fs::path cloud, gt;
};

/// Pairs every `<stem>.cloud.rpc` with its `<stem>.gt.rpt`, sorted by stem.
inline std::vector<FramePaths> list_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("dataset '" + dir.string() + "' is not a directory");
    std::vector<FramePaths> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        const std::string suffix = ".cloud.rpc";
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
            continue;
        FramePaths f;
        f.stem = name.substr(0, name.size() - suffix.size());
        f.cloud = e.path();
        f.gt = dir / (f.stem + ".gt.rpt");
        if (!fs::exists(f.gt)) throw DataError("dataset: missing ground truth '" + f.gt.string() + "'");
        out.push_back(f);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.stem < b.stem; });
    if (out.empty()) throw DataError("dataset '" + dir.string() + "' holds no *.cloud.rpc frames");
    return out;
}

inline CubeTensor load_cube(const fs::path& path, const RoiGrid& grid) {
    CubeTensor c;
    c.power = io::to_array3(io::read_rpt1(path.string()));
    if (c.power.dims != grid.dims()) throw DataError(path.string() + ": cube dims do not match the ROI grid");
    c.normalized = true;
    return c;
}

struct LoadedFrame {
    std::string stem;
    RadarPointCloud cloud;
    model::Sample sample;
};

inline std::vector<LoadedFrame> load_dataset(const fs::path& dir, const RoiGrid& grid) {
    std::vector<LoadedFrame> out;
    for (const auto& f : list_dataset(dir)) {
        LoadedFrame lf;
        lf.stem = f.stem;
        lf.cloud = io::read_rpc1(f.cloud.string());
        lf.sample.input = voxelize(lf.cloud, grid);
        lf.sample.target = load_cube(f.gt, grid);
        out.push_back(std::move(lf));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model and checkpoints

struct Model {
    PipelineConfig cfg;
    model::GeneratorParams g;
    model::DiscriminatorParams d;
};

/// Fresh model seeded from the config seed.
inline Model make_model(const PipelineConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.g = model::GeneratorParams::create(cfg.generator, cfg.grid, cfg.seed);
    m.d = model::DiscriminatorParams::create(cfg.discriminator, model::kInputChannels + 1, cfg.seed + 1);
    return m;
}

inline io::CheckpointData to_checkpoint(const Model& m) {
    // Where a run wrote its files is not part of the model.
    PipelineConfig meta = m.cfg;
    meta.output_dir = PipelineConfig{}.output_dir;
    io::CheckpointData c;
    c.meta = io::to_text(meta);
    for (const auto& t : m.g.params.tensors()) c.arrays.push_back({"G." + t.name, t.value});
    for (const auto& t : m.d.params.tensors()) c.arrays.push_back({"D." + t.name, t.value});
    return c;
}

inline Model from_checkpoint(const io::CheckpointData& c) {
    Model m = make_model(io::parse_config(c.meta, {}, "checkpoint meta"));
    std::size_t k = 0;
    auto restore = [&](model::ParamStore& store, const std::string& prefix) {
        for (auto& t : store.tensors()) {
            if (k >= c.arrays.size()) throw DataError("checkpoint: missing tensor '" + prefix + t.name + "'");
            const auto& a = c.arrays[k++];
            if (a.name != prefix + t.name || a.values.size() != t.value.size())
                throw DataError("checkpoint: tensor '" + a.name + "' does not match the architecture (expected '" +
                                prefix + t.name + "', " + std::to_string(t.value.size()) + " values)");
            t.value = a.values;
        }
    };
    restore(m.g.params, "G.");
    restore(m.d.params, "D.");
    if (k != c.arrays.size()) throw DataError("checkpoint: unexpected extra tensors");
    return m;
}

inline void save_checkpoint(const fs::path& path, const Model& m) {
    io::write_file(path.string(), io::encode_p2t1(to_checkpoint(m)));
}

inline Model load_checkpoint(const fs::path& path) {
    try {
        return from_checkpoint(io::decode_p2t1(io::read_file(path.string())));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw DataError(path.string() + ": bad metadata: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// train

inline std::string loss_csv_header() { return "step,d_loss,g_cgan,l1,perc,g_total\n"; }

inline std::string loss_csv_row(long step, const model::StepReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%ld,%.10e,%.10e,%.10e,%.10e,%.10e\n", step, r.d_loss, r.g_cgan, r.l1, r.perc,
                  r.g_total);
    return buf;
}

/// Trains `m` in place on prepared samples and returns the per-step log.
inline std::vector<model::StepReport> train_model(Model& m, const std::vector<model::Sample>& samples,
                                                  const std::function<void(long, const model::StepReport&)>& on_step =
                                                      {}) {
    std::vector<model::Prepared> prepared;
    prepared.reserve(samples.size());
    for (const auto& s : samples) prepared.push_back(model::prepare(s, m.g));
    model::TrainConfig tc = m.cfg.train;
    tc.seed = m.cfg.seed;
    return model::train(prepared, m.g, m.d, m.cfg.loss, tc, on_step);
}

struct TrainOutputs {
    fs::path checkpoint, loss_log;
    std::vector<model::StepReport> log;
};

inline TrainOutputs cmd_train(const PipelineConfig& cfg, const fs::path& dataset_dir, const fs::path& out_dir,
                              const std::function<void(long, const model::StepReport&)>& on_step = {}) {
    Model m = make_model(cfg);
    std::vector<model::Sample> samples;
    for (auto& f : load_dataset(dataset_dir, cfg.grid)) samples.push_back(std::move(f.sample));
    TrainOutputs o;
    o.log = train_model(m, samples, on_step);
    ensure_dir(out_dir);
    o.checkpoint = out_dir / "checkpoint.p2t";
    o.loss_log = out_dir / "loss.csv";
    save_checkpoint(o.checkpoint, m);
    std::string csv = loss_csv_header();
    for (std::size_t i = 0; i < o.log.size(); ++i) csv += loss_csv_row(static_cast<long>(i), o.log[i]);
    io::write_text(o.loss_log.string(), csv);
    return o;
}

// ---------------------------------------------------------------------------
// eval

inline io::GrayImage bev_figure(const CubeTensor& c) { return io::bev_to_gray(mean_pool_height(c)); }

struct FrameResult {
    std::string stem;
    FrameScore score;
    double pcd_percent = 0.0;
};

struct EvalOutputs {
    std::vector<FrameResult> frames;
    MethodRecord record;
    fs::path frames_csv, records_csv;
};

/// Scores generated cubes (or, with no model, the ground truth against
/// itself) for every dataset frame; writes frames.csv, records.csv and
/// `<stem>.gen.pgm` / `<stem>.gt.pgm` figures.
inline EvalOutputs cmd_eval(const PipelineConfig& cfg, const Model* model, const fs::path& dataset_dir,
                            const fs::path& out_dir, const MethodTag& method) {
    const RoiGrid& grid = model ? model->cfg.grid : cfg.grid;
    ensure_dir(out_dir);
    EvalOutputs o;
    std::string frames = "frame,psnr_db,ssim,pcd_percent\n";
    double sum_psnr = 0.0, sum_ssim = 0.0, sum_pcd = 0.0;
    for (const auto& f : load_dataset(dataset_dir, grid)) {
        const CubeTensor gen = model ? model::generate(f.sample.input, model->g) : f.sample.target;
        FrameResult r{f.stem, evaluate_frame(gen, f.sample.target), 100.0 * pcd(f.cloud, grid)};
        io::write_pgm((out_dir / (f.stem + ".gen.pgm")).string(), bev_figure(gen));
        io::write_pgm((out_dir / (f.stem + ".gt.pgm")).string(), bev_figure(f.sample.target));
        frames += f.stem + "," + io::fixed4(r.score.psnr_db) + "," + io::fixed4(r.score.ssim) + "," +
                  io::fixed4(r.pcd_percent) + "\n";
        sum_psnr += r.score.psnr_db;
        sum_ssim += r.score.ssim;
        sum_pcd += r.pcd_percent;
        o.frames.push_back(std::move(r));
    }
    const double n = static_cast<double>(o.frames.size());
    o.record.method = method.family();
    o.record.hyper = method.hyper();
    o.record.pcd_percent = sum_pcd / n;
    o.record.psnr_db = sum_psnr / n;
    o.record.ssim = sum_ssim / n;
    o.frames_csv = out_dir / "frames.csv";
    o.records_csv = out_dir / "records.csv";
    io::write_text(o.frames_csv.string(), frames);
    io::write_text(o.records_csv.string(), io::records_to_csv({o.record}));
    return o;
}

// ---------------------------------------------------------------------------
// report

inline double hyper_value(const std::string& h) {
    try {
        return std::stod(h);
    } catch (const std::exception&) {
        return 0.0;
    }
}

/// Normalizes, scores and orders records by (method, numeric hyper).
inline MethodEvalSet build_report(std::vector<MethodRecord> recs, double alpha = 0.5) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("report: alpha must lie in [0, 1]");
    auto key = [](const MethodRecord& r) {
        return std::tuple(r.method, hyper_value(r.hyper), r.hyper, r.pcd_percent, r.psnr_db, r.ssim);
    };
    std::sort(recs.begin(), recs.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    MethodEvalSet set;
    set.records = std::move(recs);
    set.alpha = alpha;
    set.beta = 1.0 - alpha;
    return score_methods(std::move(set));
}

inline std::string report_table(const MethodEvalSet& set) {
    std::ostringstream o;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %8s %12s %10s %8s %10s %10s %8s\n", "method", "hyper", "pcd_percent",
                  "psnr_db", "ssim", "psnr_norm", "ssim_norm", "des");
    o << buf;
    for (const auto& r : set.records) {
        std::snprintf(buf, sizeof buf, "%-12s %8s %12s %10s %8s %10s %10s %8s\n", r.method.c_str(), r.hyper.c_str(),
                      io::fixed4(r.pcd_percent).c_str(), io::fixed4(r.psnr_db).c_str(), io::fixed4(r.ssim).c_str(),
                      io::fixed4(r.psnr_norm).c_str(), io::fixed4(r.ssim_norm).c_str(), io::fixed4(r.des).c_str());
        o << buf;
    }
    for (const auto& w : set.warnings) o << "warning: " << w << "\n";
    return o.str();
}

struct ReportOutputs {
    MethodEvalSet set;
    fs::path text, csv;
};

inline ReportOutputs cmd_report(const std::vector<fs::path>& inputs, const fs::path& out_dir, double alpha = 0.5) {
    if (inputs.empty()) throw ConfigError("report: no input CSV files");
    std::vector<MethodRecord> recs;
    for (const auto& p : inputs) {
        auto r = io::records_from_csv(io::read_text(p.string()), p.string());
        recs.insert(recs.end(), r.begin(), r.end());
    }
    ReportOutputs o;
    o.set = build_report(std::move(recs), alpha);
    ensure_dir(out_dir);
    o.text = out_dir / "report.txt";
    o.csv = out_dir / "report.csv";
    io::write_text(o.text.string(), report_table(o.set));
    io::write_text(o.csv.string(), io::records_to_csv(o.set.records));
    return o;
}

// ---------------------------------------------------------------------------
// Figures

/// Height-pooled PGM of a stored cube.
inline fs::path emit_bev_figure(const fs::path& cube_file, const fs::path& out_dir) {
    CubeTensor c;
    c.power = io::to_array3(io::read_rpt1(cube_file.string()));
    c.normalized = true;
    ensure_dir(out_dir);
    const fs::path out = out_dir / (cube_file.filename().string() + ".pgm");
    io::write_pgm(out.string(), bev_figure(c));
    return out;
}

}  // namespace p2t::pipeline

#endif  // P2T_PIPELINE_HPP

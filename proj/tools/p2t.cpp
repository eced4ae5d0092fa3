// SPDX-License-Identifier: Apache-2.0
//
// p2t: command-line front end of the point-to-tensor pipeline.
//
//   p2t synth    --count N                 random scene files
//   p2t simulate SCENE...                  polar tensors + ground-truth cubes
//   p2t extract  --method M TENSOR...      point clouds + PCD reports
//   p2t train    DATASET_DIR               checkpoint.p2t + loss.csv
//   p2t eval     --checkpoint F DATASET    frames.csv, records.csv, BEV PGMs
//   p2t report   RECORDS_CSV...            DES table (report.txt, report.csv)
//   p2t bev      CUBE_RPT...               BEV PGM figures
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "p2t/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace p2t;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<double> grid_voxel;
    std::vector<std::string> overrides;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "key = value config file");
        app->add_option("--seed", seed, "override the config seed");
        app->add_option("--out", out, "output directory (default: config output_dir)");
        app->add_option("--grid-voxel", grid_voxel, "override grid.voxel_size (m)");
        app->add_option("--set", overrides, "extra KEY=VALUE config override (repeatable)");
    }

    io::PipelineConfig load() const {
        io::PipelineConfig cfg = config.empty() ? io::PipelineConfig{} : io::load_config(config);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
            try {
                io::apply_setting(cfg, io::detail::trim(kv.substr(0, eq)), io::detail::trim(kv.substr(eq + 1)));
            } catch (const Error&) {
                throw;
            } catch (const std::exception& e) {
                throw ConfigError("--set " + kv + ": " + e.what());
            }
        }
        if (seed) cfg.seed = *seed;
        if (grid_voxel) cfg.grid.voxel_size = *grid_voxel;
        if (!out.empty()) cfg.output_dir = out;
        cfg.validate();
        return cfg;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"p2t: 4D radar point cloud to dense tensor pipeline"};
    app.require_subcommand(1);

    Common common;
    int synth_count = 8;
    std::vector<std::string> scenes, tensors, records, cubes;
    std::string method_text, dataset, checkpoint;
    bool identity = false;
    double alpha = 0.5;

    auto* synth = app.add_subcommand("synth", "write random scene files");
    synth->add_option("--count", synth_count, "number of scenes")->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "simulate polar tensors and ground-truth cubes");
    simulate->add_option("scenes", scenes, "scene files")->required();

    auto* extract_cmd = app.add_subcommand("extract", "extract point clouds from polar tensors");
    extract_cmd->add_option("--method", method_text, "percentile:P | cfar:K1 | cfar-scale:ALPHA");
    extract_cmd->add_option("tensors", tensors, "RPT1 polar tensor files")->required();

    auto* train = app.add_subcommand("train", "train the generator and discriminator");
    train->add_option("dataset", dataset, "directory of <stem>.cloud.rpc + <stem>.gt.rpt pairs")->required();

    auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
    eval->add_option("--checkpoint", checkpoint, "P2T1 checkpoint");
    eval->add_flag("--identity", identity, "score the ground truth against itself");
    eval->add_option("--method", method_text, "method label for records.csv");
    eval->add_option("dataset", dataset, "dataset directory")->required();

    auto* report = app.add_subcommand("report", "normalize metrics and compute DES");
    report->add_option("--alpha", alpha, "PSNR weight; SSIM weight is 1 - alpha")->capture_default_str();
    report->add_option("records", records, "records CSV files")->required();

    auto* bev = app.add_subcommand("bev", "render cubes as height-pooled PGM images");
    bev->add_option("cubes", cubes, "RPT1 cube files")->required();

    for (auto* sc : {synth, simulate, extract_cmd, train, eval, report, bev}) common.attach(sc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const io::PipelineConfig cfg = common.load();
    const fs::path out = cfg.output_dir;
    auto method_or_default = [&] {
        return method_text.empty() ? cfg.methods.front() : MethodTag::parse(method_text);
    };

    if (synth->parsed()) {
        for (const auto& p : pipeline::cmd_synth(cfg, synth_count, out)) std::cout << p.string() << "\n";
    } else if (simulate->parsed()) {
        for (const auto& s : scenes) {
            const auto o = pipeline::cmd_simulate(cfg, s, out);
            std::cout << o.polar4d.string() << "\n" << o.polar3d.string() << "\n" << o.gt.string() << "\n";
        }
    } else if (extract_cmd->parsed()) {
        const MethodTag m = method_or_default();
        for (const auto& t : tensors) {
            const auto o = pipeline::cmd_extract(cfg, t, m, out);
            std::printf("%s %s points=%zu pcd_percent=%s\n", o.cloud.string().c_str(), m.to_string().c_str(),
                        o.points, io::fixed4(o.pcd_percent).c_str());
        }
    } else if (train->parsed()) {
        const auto o = pipeline::cmd_train(cfg, dataset, out, [](long step, const model::StepReport& r) {
            std::printf("step %ld d=%.4f cgan=%.4f l1=%.5f perc=%.4f total=%.4f\n", step, r.d_loss, r.g_cgan, r.l1,
                        r.perc, r.g_total);
            std::fflush(stdout);
        });
        std::cout << o.checkpoint.string() << "\n" << o.loss_log.string() << "\n";
    } else if (eval->parsed()) {
        if (identity == !checkpoint.empty())
            throw ConfigError("eval: pass exactly one of --checkpoint or --identity");
        std::optional<pipeline::Model> model;
        if (!identity) model = pipeline::load_checkpoint(checkpoint);
        const auto o = pipeline::cmd_eval(cfg, model ? &*model : nullptr, dataset, out, method_or_default());
        for (const auto& f : o.frames)
            std::printf("%s psnr_db=%s ssim=%s\n", f.stem.c_str(), io::fixed4(f.score.psnr_db).c_str(),
                        io::fixed4(f.score.ssim).c_str());
        std::cout << o.records_csv.string() << "\n";
    } else if (report->parsed()) {
        std::vector<fs::path> in(records.begin(), records.end());
        const auto o = pipeline::cmd_report(in, out, alpha);
        std::cout << pipeline::report_table(o.set);
    } else if (bev->parsed()) {
        for (const auto& c : cubes) std::cout << pipeline::emit_bev_figure(c, out).string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const p2t::Error& e) {
        std::cerr << "p2t: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "p2t: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "p2t: unexpected error: " << e.what() << "\n";
        return 1;
    }
}

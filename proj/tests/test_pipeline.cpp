// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "p2t/pipeline.hpp"

using namespace p2t;
namespace fs = std::filesystem;
namespace pl = p2t::pipeline;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(::testing::TempDir()) / ("p2t_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

io::PipelineConfig small() {
    io::PipelineConfig c;
    c.seed = 3;
    c.grid.voxel_size = 1.6;
    c.radar.noise_stddev = 0.01;
    c.generator.encoder_channels = {4, 8};
    c.discriminator = {2, 4, 1};
    c.train.batch_size = 2;
    c.train.epochs = 1;
    return c;
}

std::uint32_t file_crc(const fs::path& p) {
    // Payload only: a CRC taken over its own trailer is a constant residue.
    const auto b = io::read_file(p.string());
    return io::crc32_of(b.data(), b.size() - 4);
}

std::uint32_t text_crc(const fs::path& p) {
    const auto b = io::read_file(p.string());
    return io::crc32_of(b.data(), b.size());
}

// synth -> simulate -> extract into one dataset directory.
fs::path build_dataset(const io::PipelineConfig& cfg, const fs::path& root, int frames) {
    const fs::path data = root / "data";
    for (const auto& s : pl::cmd_synth(cfg, frames, root / "scenes")) {
        const auto sim = pl::cmd_simulate(cfg, s, data);
        pl::cmd_extract(cfg, sim.polar3d, cfg.methods.front(), data);
    }
    return data;
}

}  // namespace

TEST(Synth, ScenesStayInsideTheRoiAndRange) {
    const io::PipelineConfig cfg;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 40; ++i) {
        const Scene s = pl::random_scene(rng, cfg.radar, cfg.grid);
        EXPECT_GE(s.scatterers.size(), 3u);
        EXPECT_LE(s.scatterers.size(), 6u);
        for (const auto& sc : s.scatterers) {
            const Cartesian c = to_cartesian({sc.range, sc.azimuth, sc.elevation});
            EXPECT_TRUE(cfg.grid.contains(c));
            EXPECT_GE(sc.range, 4.0);
            EXPECT_LT(sc.range, cfg.radar.max_range());
        }
    }
    EXPECT_THROW(pl::cmd_synth(cfg, 0, scratch("synth0")), ConfigError);
}

TEST(Simulate, EmptySceneGivesZeroTensors) {
    io::PipelineConfig cfg = small();
    cfg.radar.noise_stddev = 0.0;
    const fs::path dir = scratch("empty");
    io::write_text((dir / "void.txt").string(), "# nothing here\n");
    const auto o = pl::cmd_simulate(cfg, dir / "void.txt", dir);
    for (const auto& p : {o.polar4d, o.polar3d, o.gt})
        for (float v : io::read_rpt1(p.string()).values) EXPECT_EQ(v, 0.0f);
    const auto dims = io::read_rpt1(o.polar4d.string()).dims;
    EXPECT_EQ(dims, (std::vector<std::uint32_t>{64, 32, 16, 16}));
}

TEST(Simulate, RerunIsByteIdenticalAndMatchesFrozenChecksums) {
    const io::PipelineConfig cfg = small();
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    io::write_text((a / "demo.txt").string(), io::read_text(std::string(P2T_DATA_DIR) + "/scene_demo.txt"));
    const auto oa = pl::cmd_simulate(cfg, a / "demo.txt", a);
    const auto ob = pl::cmd_simulate(cfg, a / "demo.txt", b);
    for (auto [x, y] : {std::pair{oa.polar4d, ob.polar4d}, {oa.polar3d, ob.polar3d}, {oa.gt, ob.gt}})
        EXPECT_EQ(io::read_file(x.string()), io::read_file(y.string())) << x;
    // Frozen from a reference run; any drift in the signal chain shows here.
    EXPECT_EQ(file_crc(oa.polar4d), 3872037685u);
    EXPECT_EQ(file_crc(oa.polar3d), 811694760u);
    EXPECT_EQ(file_crc(oa.gt), 1551754742u);
}

TEST(Synth, SceneFilesMatchFrozenChecksums) {
    const auto paths = pl::cmd_synth(small(), 2, scratch("synth"));
    ASSERT_EQ(paths.size(), 2u);
    EXPECT_EQ(paths[0].filename(), "scene_000.txt");
    EXPECT_EQ(text_crc(paths[0]), 2432629050u);
    EXPECT_EQ(text_crc(paths[1]), 3202471167u);
}

TEST(Extract, FullPercentileKeepsEveryCell) {
    const io::PipelineConfig cfg = small();
    const fs::path dir = scratch("extract");
    io::write_text((dir / "demo.txt").string(), io::read_text(std::string(P2T_DATA_DIR) + "/scene_demo.txt"));
    const auto sim = pl::cmd_simulate(cfg, dir / "demo.txt", dir);
    const auto o = pl::cmd_extract(cfg, sim.polar3d, MethodTag::parse("percentile:100"), dir);
    EXPECT_EQ(o.points, 64u * 32u * 16u);
    EXPECT_EQ(io::read_rpc1(o.cloud.string()).points.size(), o.points);
    const auto t = io::parse_csv(io::read_text(o.report.string()));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][0], "percentile");
    EXPECT_EQ(t.rows[0][2], std::to_string(o.points));
    // The rank-4 file collapses to the same cells; power differs only by
    // the float rounding of the stored 4D values.
    const auto o4 = pl::cmd_extract(cfg, sim.polar4d, MethodTag::parse("percentile:100"), scratch("extract4"));
    const auto c3 = io::read_rpc1(o.cloud.string()), c4 = io::read_rpc1(o4.cloud.string());
    ASSERT_EQ(c4.points.size(), c3.points.size());
    for (std::size_t i = 0; i < c3.points.size(); ++i) {
        EXPECT_EQ(c4.points[i].polar_index, c3.points[i].polar_index);
        EXPECT_EQ(c4.points[i].x, c3.points[i].x);
        EXPECT_NEAR(c4.points[i].power, c3.points[i].power, 1e-5 * c3.points[i].power + 1e-30);
    }
}

TEST(Extract, RejectsTensorsOfTheWrongShape) {
    const fs::path dir = scratch("badshape");
    io::RawTensor t{{4, 4, 4}, std::vector<float>(64, 1.0f)};
    io::write_rpt1((dir / "x.rpt").string(), t);
    EXPECT_THROW(pl::cmd_extract(small(), dir / "x.rpt", MethodTag::parse("percentile:5"), dir), DataError);
}

TEST(Dataset, ListsPairsAndRequiresGroundTruth) {
    const io::PipelineConfig cfg = small();
    const fs::path root = scratch("dataset");
    const fs::path data = build_dataset(cfg, root, 2);
    const auto frames = pl::list_dataset(data);
    ASSERT_EQ(frames.size(), 2u);
    EXPECT_EQ(frames[0].stem, "scene_000");
    EXPECT_EQ(frames[1].stem, "scene_001");
    fs::remove(frames[1].gt);
    EXPECT_THROW(pl::list_dataset(data), DataError);
    EXPECT_THROW(pl::list_dataset(root / "scenes"), DataError);
    EXPECT_THROW(pl::list_dataset(root / "missing"), DataError);
}

TEST(Train, ZeroLearningRateCheckpointEqualsFreshModel) {
    io::PipelineConfig cfg = small();
    cfg.train.learning_rate = 0.0;
    const fs::path root = scratch("train0");
    const auto o = pl::cmd_train(cfg, build_dataset(cfg, root, 2), root / "run");
    EXPECT_EQ(o.log.size(), 1u);
    const auto loaded = pl::load_checkpoint(o.checkpoint);
    const auto fresh = pl::make_model(cfg);
    EXPECT_TRUE(loaded.g.params == fresh.g.params);
    EXPECT_TRUE(loaded.d.params == fresh.d.params);
    EXPECT_EQ(io::to_text(loaded.cfg), io::to_text(cfg));
}

TEST(Train, RerunReproducesLossLogAndCheckpoint) {
    io::PipelineConfig cfg = small();
    cfg.train.epochs = 2;
    const fs::path root = scratch("train_rerun");
    const fs::path data = build_dataset(cfg, root, 3);
    const auto a = pl::cmd_train(cfg, data, root / "a");
    const auto b = pl::cmd_train(cfg, data, root / "b");
    EXPECT_EQ(a.log.size(), 4u);  // two batches per epoch (2 + 1 frames)
    EXPECT_EQ(io::read_file(a.loss_log.string()), io::read_file(b.loss_log.string()));
    EXPECT_EQ(io::read_file(a.checkpoint.string()), io::read_file(b.checkpoint.string()));
    const auto t = io::parse_csv(io::read_text(a.loss_log.string()));
    EXPECT_EQ(t.header, (std::vector<std::string>{"step", "d_loss", "g_cgan", "l1", "perc", "g_total"}));
    EXPECT_EQ(t.rows.size(), a.log.size());
}

TEST(Eval, IdentityScoresArePerfect) {
    const io::PipelineConfig cfg = small();
    const fs::path root = scratch("eval_id");
    const auto o = pl::cmd_eval(cfg, nullptr, build_dataset(cfg, root, 2), root / "eval", cfg.methods.front());
    ASSERT_EQ(o.frames.size(), 2u);
    for (const auto& f : o.frames) {
        EXPECT_EQ(f.score.psnr_db, std::numeric_limits<double>::infinity());
        EXPECT_NEAR(f.score.ssim, 1.0, 1e-12);
        EXPECT_GT(f.pcd_percent, 0.0);
        EXPECT_TRUE(fs::exists(root / "eval" / (f.stem + ".gen.pgm")));
    }
    EXPECT_EQ(o.record.method, "percentile");
    EXPECT_EQ(o.record.hyper, "1");
}

TEST(Eval, ModelScoresMatchDirectEvaluation) {
    const io::PipelineConfig cfg = small();
    const fs::path root = scratch("eval_model");
    const fs::path data = build_dataset(cfg, root, 2);
    const auto m = pl::make_model(cfg);
    const auto o = pl::cmd_eval(cfg, &m, data, root / "eval", cfg.methods.front());
    const auto frames = pl::load_dataset(data, cfg.grid);
    ASSERT_EQ(o.frames.size(), frames.size());
    double mean_psnr = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto s = evaluate_frame(model::generate(frames[i].sample.input, m.g), frames[i].sample.target);
        EXPECT_DOUBLE_EQ(o.frames[i].score.psnr_db, s.psnr_db);
        EXPECT_DOUBLE_EQ(o.frames[i].score.ssim, s.ssim);
        mean_psnr += s.psnr_db / frames.size();
    }
    EXPECT_DOUBLE_EQ(o.record.psnr_db, mean_psnr);
    const auto back = io::records_from_csv(io::read_text(o.records_csv.string()));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_NEAR(back[0].psnr_db, mean_psnr, 5e-5);
}

TEST(Report, ReproducesPublishedTableFromCsv) {
    const auto o = pl::cmd_report({fs::path(P2T_DATA_DIR) / "table1.csv"}, scratch("report"));
    const double published[] = {0.33, 0.11, 0.00, 0.48, 0.22, 0.05};  // sorted order matches the file
    ASSERT_EQ(o.set.records.size(), 6u);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(o.set.records[i].des, published[i], 0.005) << i;
    const auto back = io::records_from_csv(io::read_text(o.csv.string()));
    EXPECT_EQ(back.size(), 6u);
    EXPECT_NE(io::read_text(o.text.string()).find("percentile"), std::string::npos);
}

TEST(Report, RowOrderDoesNotMatter) {
    const fs::path dir = scratch("report_perm");
    const auto recs = io::records_from_csv(io::read_text(std::string(P2T_DATA_DIR) + "/table1.csv"));
    auto shuffled = recs;
    std::mt19937_64 rng(4);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    io::write_text((dir / "a.csv").string(), io::records_to_csv(recs));
    io::write_text((dir / "b.csv").string(), io::records_to_csv(shuffled));
    const auto a = pl::cmd_report({dir / "a.csv"}, dir / "ra");
    const auto b = pl::cmd_report({dir / "b.csv"}, dir / "rb");
    EXPECT_EQ(io::read_file(a.csv.string()), io::read_file(b.csv.string()));
    EXPECT_EQ(io::read_file(a.text.string()), io::read_file(b.text.string()));
}

TEST(Report, SingleRowWarnsAndScoresZero) {
    const fs::path dir = scratch("report_one");
    io::write_text((dir / "one.csv").string(), "method,hyper,pcd_percent,psnr_db,ssim\npercentile,1,1.0,30,0.9\n");
    const auto o = pl::cmd_report({dir / "one.csv"}, dir);
    EXPECT_EQ(o.set.records[0].des, 0.0);
    EXPECT_EQ(o.set.warnings.size(), 2u);
    EXPECT_NE(io::read_text(o.text.string()).find("warning:"), std::string::npos);
    EXPECT_THROW(pl::cmd_report({}, dir), ConfigError);
    EXPECT_THROW(pl::cmd_report({dir / "one.csv"}, dir, 1.5), ConfigError);
}

TEST(Figures, BevPgmIsHeightMeanScaledTo255) {
    const fs::path dir = scratch("bev");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Array3 cube(6, 4, 3);
    for (auto& v : cube.data) v = u(rng);
    io::write_rpt1((dir / "c.rpt").string(), io::to_raw(cube));
    const auto stored = io::to_array3(io::read_rpt1((dir / "c.rpt").string()));
    const auto img = io::read_pgm(pl::emit_bev_figure(dir / "c.rpt", dir).string());
    ASSERT_EQ(img.height, 6);
    ASSERT_EQ(img.width, 4);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) {
            const double m = (stored(i, j, 0) + stored(i, j, 1) + stored(i, j, 2)) / 3.0;
            EXPECT_EQ(img.pixels[i * 4 + j], static_cast<int>(std::lround(255.0 * m)));
        }
}

TEST(Checkpoint, RejectsMismatchedOrCorruptFiles) {
    const io::PipelineConfig cfg = small();
    const fs::path dir = scratch("ckpt");
    const auto m = pl::make_model(cfg);
    pl::save_checkpoint(dir / "m.p2t", m);
    EXPECT_TRUE(pl::load_checkpoint(dir / "m.p2t").g.params == m.g.params);

    auto c = pl::to_checkpoint(m);
    c.arrays[0].name = "G.bogus";
    EXPECT_THROW(pl::from_checkpoint(c), DataError);
    c = pl::to_checkpoint(m);
    c.arrays[1].values.pop_back();
    EXPECT_THROW(pl::from_checkpoint(c), DataError);
    c = pl::to_checkpoint(m);
    c.arrays.push_back({"extra", {1.0}});
    EXPECT_THROW(pl::from_checkpoint(c), DataError);

    auto bytes = io::read_file((dir / "m.p2t").string());
    bytes[bytes.size() / 2] ^= 0x10;
    io::write_file((dir / "bad.p2t").string(), bytes);
    EXPECT_THROW(pl::load_checkpoint(dir / "bad.p2t"), DataError);
}

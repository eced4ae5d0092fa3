// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "p2t/io/config.hpp"
#include "p2t/io/formats.hpp"
#include "p2t/io/tables.hpp"

using namespace p2t;
using namespace p2t::io;

namespace {

RawTensor random_tensor(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> rank(0, 4), dim(1, 6);
    std::normal_distribution<float> v(0.0f, 10.0f);
    RawTensor t;
    const int r = rank(rng);
    for (int i = 0; i < r; ++i) t.dims.push_back(static_cast<std::uint32_t>(dim(rng)));
    t.values.resize(t.expected_size());
    for (auto& x : t.values) x = v(rng);
    return t;
}

RadarPointCloud random_cloud(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n(0, 40), idx(0, 63);
    std::uniform_real_distribution<float> u(-50.0f, 50.0f);
    RadarPointCloud c;
    c.points.resize(n(rng));
    for (auto& p : c.points) p = {u(rng), u(rng), u(rng), std::abs(u(rng)), {idx(rng), idx(rng), idx(rng)}};
    return c;
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Rpt1, RoundTripsRandomTensors) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const RawTensor t = random_tensor(rng);
        EXPECT_EQ(decode_rpt1(encode_rpt1(t)), t);
    }
}

TEST(Rpt1, LayoutIsMagicRankDimsValuesCrc) {
    RawTensor t{{2, 1}, {1.0f, -2.0f}};
    const Bytes b = encode_rpt1(t);
    ASSERT_EQ(b.size(), 4u + 4 + 8 + 8 + 4);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "RPT1");
    EXPECT_EQ(b[4], 2);
    EXPECT_EQ(b[8], 2);
    EXPECT_EQ(b[12], 1);
    EXPECT_EQ(crc32_of(b.data(), b.size() - 4),
              std::uint32_t(b[b.size() - 4]) | std::uint32_t(b[b.size() - 3]) << 8 |
                  std::uint32_t(b[b.size() - 2]) << 16 | std::uint32_t(b[b.size() - 1]) << 24);
}

TEST(Rpt1, EveryByteFlipIsDetected) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) {
        const Bytes good = encode_rpt1(random_tensor(rng));
        Bytes bad = good;
        const std::size_t at = std::uniform_int_distribution<std::size_t>(0, bad.size() - 1)(rng);
        bad[at] ^= static_cast<std::uint8_t>(1u << (i % 8));
        EXPECT_THROW(decode_rpt1(bad), DataError) << "byte " << at;
    }
}

TEST(Rpt1, RejectsMalformedFiles) {
    EXPECT_THROW(decode_rpt1(Bytes{1, 2, 3}), DataError);
    EXPECT_THROW(encode_rpt1(RawTensor{{3}, {1.0f}}), DataError);
    const Bytes cloud = encode_rpc1({});
    EXPECT_NE(error_of([&] { decode_rpt1(cloud); }).find("bad magic"), std::string::npos);
}

TEST(Rpt1, ConvertsArrays) {
    Array3 a(2, 3, 1);
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] = 0.5 * double(i);
    const RawTensor t = to_raw(a);
    EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{2, 3, 1}));
    EXPECT_EQ(to_array3(decode_rpt1(encode_rpt1(t))).data, a.data);
    EXPECT_THROW(to_array3(RawTensor{{4}, {0, 0, 0, 0}}), DataError);
}

TEST(Rpc1, RoundTripsRandomClouds) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const RadarPointCloud c = random_cloud(rng);
        EXPECT_EQ(decode_rpc1(encode_rpc1(c)).points, c.points);
    }
}

TEST(Rpc1, EveryByteFlipIsDetected) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const Bytes good = encode_rpc1(random_cloud(rng));
        Bytes bad = good;
        const std::size_t at = std::uniform_int_distribution<std::size_t>(0, bad.size() - 1)(rng);
        bad[at] ^= static_cast<std::uint8_t>(1u << (i % 8));
        EXPECT_THROW(decode_rpc1(bad), DataError) << "byte " << at;
    }
}

TEST(Rpc1, AsStoredRoundsToFloat) {
    RadarPointCloud c;
    c.points.push_back({0.1, 0.2, 0.3, 1e-3, {1, 2, 3}});
    c.source_method = {MethodTag::Kind::cfar, 2.5};
    const auto s = as_stored(c);
    EXPECT_EQ(s.points[0].x, double(0.1f));
    EXPECT_EQ(s.source_method, c.source_method);
}

TEST(P2t1, RoundTripsAndDetectsCorruption) {
    CheckpointData c;
    c.meta = "seed = 3\n";
    c.arrays.push_back({"G.a", {1.0, -2.5, 1e-300}});
    c.arrays.push_back({"D.b", {}});
    const Bytes b = encode_p2t1(c);
    EXPECT_EQ(decode_p2t1(b), c);
    for (std::size_t at = 0; at < b.size(); ++at) {
        Bytes bad = b;
        bad[at] ^= 0x10;
        EXPECT_THROW(decode_p2t1(bad), DataError) << at;
    }
}

TEST(Files, WriteThenReadBack) {
    const std::string path = ::testing::TempDir() + "/p2t_io_roundtrip.rpt";
    const RawTensor t{{2, 2}, {1, 2, 3, 4}};
    write_rpt1(path, t);
    EXPECT_EQ(read_rpt1(path), t);
    EXPECT_THROW(read_rpt1(path + ".missing"), DataError);
}

TEST(Config, DefaultsAreValid) {
    const PipelineConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.grid.dims(), (Index3{192, 80, 32}));
    EXPECT_EQ(c.loss.lambda_l1, 100.0);
    EXPECT_EQ(c.loss.lambda_perc, 10.0);
}

TEST(Config, ParsesKeysCommentsAndLists) {
    const auto c = parse_config(
        "# comment\n"
        "seed = 42\n"
        "grid.voxel_size = 1.6   # trailing comment\n"
        "methods = percentile:1, cfar:2.5\n"
        "cfar.training = 3\n"
        "cfar.guard = 1,0,2\n"
        "radar.window = hann\n"
        "loss.gan_mode = lsgan\n"
        "model.encoder_channels = 8,16\n");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.grid.voxel_size, 1.6);
    ASSERT_EQ(c.methods.size(), 2u);
    EXPECT_EQ(c.methods[1], (MethodTag{MethodTag::Kind::cfar, 2.5}));
    EXPECT_EQ(c.cfar.training_cells, (Index3{3, 3, 3}));
    EXPECT_EQ(c.cfar.guard_cells, (Index3{1, 0, 2}));
    EXPECT_EQ(c.radar.window, Window::hann);
    EXPECT_EQ(c.train.gan_mode, model::GanMode::lsgan);
    EXPECT_EQ(c.generator.encoder_channels, (std::vector<int>{8, 16}));
}

TEST(Config, ErrorsCarryLineNumbers) {
    auto msg = error_of([] { parse_config("seed = 1\n\nbogus.key = 3\n", {}, "t.cfg"); });
    EXPECT_NE(msg.find("t.cfg:3"), std::string::npos) << msg;
    msg = error_of([] { parse_config("seed = 1\nradar.sample_rate = fast\n", {}, "t.cfg"); });
    EXPECT_NE(msg.find("t.cfg:2"), std::string::npos) << msg;
    msg = error_of([] { parse_config("no equals sign\n", {}, "t.cfg"); });
    EXPECT_NE(msg.find("t.cfg:1"), std::string::npos) << msg;
    EXPECT_THROW(parse_config("radar.samples_per_chirp = 48\n"), ConfigError);
    EXPECT_THROW(parse_config("grid.voxel_size = 0.7\n"), ConfigError);
    EXPECT_THROW(parse_config("methods = median:3\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/p2t.cfg"), ConfigError);
}

TEST(Config, TextRoundTripIsExact) {
    PipelineConfig c;
    c.seed = 99;
    c.radar.noise_stddev = 0.1 + 0.2;  // not representable in few digits
    c.grid.voxel_size = 1.6;
    c.train.learning_rate = 2e-4 / 3.0;
    c.generator.encoder_channels = {3, 5, 7};
    c.methods = {MethodTag::parse("percentile:0.1"), MethodTag::parse("cfar:10")};
    const std::string text = to_text(c);
    const auto back = parse_config(text);
    EXPECT_EQ(to_text(back), text);
    EXPECT_EQ(back.radar.noise_stddev, c.radar.noise_stddev);
    EXPECT_EQ(back.train.learning_rate, c.train.learning_rate);
}

TEST(Config, SettingsApplyOverABase) {
    PipelineConfig base;
    base.seed = 5;
    const auto c = parse_config("train.batch_size = 2\n", base);
    EXPECT_EQ(c.seed, 5u);
    EXPECT_EQ(c.train.batch_size, 2);
}

TEST(Scene, ParsesFieldsAndComments) {
    const auto s = parse_scene("# header\n10 0.1 -0.05 2 1.5\n\n  20.5 0 0 0 1  # tail\n");
    ASSERT_EQ(s.scatterers.size(), 2u);
    EXPECT_EQ(s.scatterers[0].elevation, -0.05);
    EXPECT_EQ(s.scatterers[1].range, 20.5);
    const auto back = parse_scene(scene_to_text(s));
    EXPECT_EQ(back.scatterers[0].radial_velocity, 2.0);
    EXPECT_EQ(back.scatterers.size(), 2u);
}

TEST(Scene, ErrorsCarryLineNumbers) {
    const RadarConfig r;
    auto msg = error_of([] { parse_scene("10 0 0 0 1\n10 0 0 1\n", nullptr, "s.txt"); });
    EXPECT_NE(msg.find("s.txt:2"), std::string::npos) << msg;
    msg = error_of([] { parse_scene("10 0 zero 0 1\n", nullptr, "s.txt"); });
    EXPECT_NE(msg.find("s.txt:1"), std::string::npos) << msg;
    msg = error_of([&] { parse_scene("\n500 0 0 0 1\n", &r, "s.txt"); });
    EXPECT_NE(msg.find("s.txt:2"), std::string::npos) << msg;
    EXPECT_THROW(parse_scene("10 0 0 0 -1\n", &r), DataError);
    EXPECT_NO_THROW(parse_scene("10 0 0 0 -1\n"));
}

TEST(Tables, FixedFormatting) {
    EXPECT_EQ(fixed4(1.23456), "1.2346");
    EXPECT_EQ(fixed4(-0.00001), "0.0000");
    EXPECT_EQ(fixed4(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(parse_number("inf", "x"), std::numeric_limits<double>::infinity());
    EXPECT_THROW(parse_number("1.5x", "x"), DataError);
}

TEST(Tables, CsvParsingAndErrors) {
    const auto t = parse_csv("# note\na,b\n1, 2\n\n3,\n");
    EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][1], "2");
    EXPECT_EQ(t.rows[1][1], "");
    EXPECT_EQ(t.column("b"), 1);
    const auto msg = error_of([] { parse_csv("a,b\n1,2\n1,2,3\n", "r.csv"); });
    EXPECT_NE(msg.find("r.csv:3"), std::string::npos) << msg;
    EXPECT_THROW(parse_csv("# only comments\n"), DataError);
}

TEST(Tables, RecordsRoundTrip) {
    std::vector<MethodRecord> recs{{"cfar", "2.5", 1.22, 30.0, 0.96, 0.3, 0.5, 0.33},
                                   {"percentile", "1", 1.11, std::numeric_limits<double>::infinity(), 1.0}};
    const std::string csv = records_to_csv(recs);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kRecordHeader);
    const auto back = records_from_csv(csv);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].hyper, "2.5");
    EXPECT_EQ(back[0].pcd_percent, 1.22);
    EXPECT_EQ(back[1].psnr_db, std::numeric_limits<double>::infinity());
    EXPECT_EQ(back[0].des, 0.0);  // derived columns are not read back
    EXPECT_THROW(records_from_csv("method,hyper,pcd_percent,psnr_db\ncfar,1,1,1\n"), DataError);
}

TEST(Tables, PgmRoundTripAndPixelMapping) {
    BevImage b(2, 3);
    b.values = {0.0, 0.5, 1.0, -1.0, 2.0, 0.25};
    const GrayImage g = bev_to_gray(b);
    EXPECT_EQ(g.width, 3);
    EXPECT_EQ(g.height, 2);
    EXPECT_EQ(g.pixels, (std::vector<int>{0, 128, 255, 0, 255, 64}));
    const std::string s = encode_pgm(g);
    EXPECT_EQ(s.substr(0, 11), "P5\n3 2\n255\n");
    EXPECT_EQ(decode_pgm(s), g);
    EXPECT_THROW(decode_pgm("P2\n1 1\n255\n0"), DataError);
    EXPECT_THROW(decode_pgm(s.substr(0, s.size() - 1)), DataError);
}

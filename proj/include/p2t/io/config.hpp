// SPDX-License-Identifier: Apache-2.0
//
// Pipeline configuration as a line-based `key = value` text file with dotted
// section keys, and the scene file format
// (`range azimuth elevation velocity reflectivity` per line, `#` comments).

#ifndef P2T_IO_CONFIG_HPP
#define P2T_IO_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "p2t/common.hpp"
#include "p2t/geometry.hpp"
#include "p2t/model/discriminator.hpp"
#include "p2t/model/generator.hpp"
#include "p2t/model/losses.hpp"
#include "p2t/model/trainer.hpp"
#include "p2t/pointcloud.hpp"
#include "p2t/radar_sim.hpp"

namespace p2t::io {

struct PipelineConfig {
    RadarConfig radar;
    DopplerReduce doppler_reduce = DopplerReduce::mean;
    RoiGrid grid;
    CfarConfig cfar;
    std::vector<MethodTag> methods{MethodTag{MethodTag::Kind::percentile, 1.0}};
    model::GeneratorArch generator;
    model::DiscriminatorArch discriminator;
    model::LossWeights loss;
    model::TrainConfig train;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    void validate() const {
        radar.validate();
        grid.validate();
        cfar.validate();
        loss.validate();
        train.validate();
        if (methods.empty()) throw ConfigError("config: methods must not be empty");
        if (generator.encoder_channels.empty()) throw ConfigError("config: model.encoder_channels is empty");
        for (int c : generator.encoder_channels)
            if (c < 1) throw ConfigError("config: model.encoder_channels entries must be >= 1");
        if (discriminator.scales < 1 || discriminator.base_channels < 1 || discriminator.hidden_layers < 1)
            throw ConfigError("config: discriminator settings must be >= 1");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

inline double to_double(const std::string& v) {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return d;
}

inline long to_long(const std::string& v) {
    std::size_t used = 0;
    const long d = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return d;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline Index3 to_index3(const std::string& v) {
    const auto parts = split(v, ',');
    if (parts.size() == 1) {
        const int n = static_cast<int>(to_long(parts[0]));
        return {n, n, n};
    }
    if (parts.size() != 3) throw std::invalid_argument("expected 1 or 3 integers");
    return {static_cast<int>(to_long(parts[0])), static_cast<int>(to_long(parts[1])),
            static_cast<int>(to_long(parts[2]))};
}

}  // namespace detail

/// Applies one `key = value` assignment; throws std::exception on bad values.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    static const std::map<std::string, std::function<void(PipelineConfig&, const std::string&)>> setters = {
        {"seed", [](auto& c, auto& v) { c.seed = static_cast<std::uint64_t>(to_long(v)); }},
        {"output_dir", [](auto& c, auto& v) { c.output_dir = v; }},
        {"methods",
         [](auto& c, auto& v) {
             c.methods.clear();
             for (const auto& m : split(v, ',')) c.methods.push_back(MethodTag::parse(m));
         }},
        {"radar.carrier_frequency", [](auto& c, auto& v) { c.radar.carrier_frequency = to_double(v); }},
        {"radar.chirp_slope", [](auto& c, auto& v) { c.radar.chirp_slope = to_double(v); }},
        {"radar.sample_rate", [](auto& c, auto& v) { c.radar.sample_rate = to_double(v); }},
        {"radar.samples_per_chirp", [](auto& c, auto& v) { c.radar.samples_per_chirp = static_cast<int>(to_long(v)); }},
        {"radar.chirps_per_frame", [](auto& c, auto& v) { c.radar.chirps_per_frame = static_cast<int>(to_long(v)); }},
        {"radar.azimuth_antennas", [](auto& c, auto& v) { c.radar.azimuth_antennas = static_cast<int>(to_long(v)); }},
        {"radar.elevation_antennas",
         [](auto& c, auto& v) { c.radar.elevation_antennas = static_cast<int>(to_long(v)); }},
        {"radar.antenna_spacing", [](auto& c, auto& v) { c.radar.antenna_spacing = to_double(v); }},
        {"radar.noise_stddev", [](auto& c, auto& v) { c.radar.noise_stddev = to_double(v); }},
        {"radar.window",
         [](auto& c, auto& v) {
             if (v == "rect" || v == "rectangular") c.radar.window = Window::rectangular;
             else if (v == "hann") c.radar.window = Window::hann;
             else throw std::invalid_argument("expected rect or hann");
         }},
        {"radar.doppler_reduce",
         [](auto& c, auto& v) {
             if (v == "mean") c.doppler_reduce = DopplerReduce::mean;
             else if (v == "max") c.doppler_reduce = DopplerReduce::max;
             else throw std::invalid_argument("expected mean or max");
         }},
        {"grid.x_min", [](auto& c, auto& v) { c.grid.x_min = to_double(v); }},
        {"grid.x_max", [](auto& c, auto& v) { c.grid.x_max = to_double(v); }},
        {"grid.y_min", [](auto& c, auto& v) { c.grid.y_min = to_double(v); }},
        {"grid.y_max", [](auto& c, auto& v) { c.grid.y_max = to_double(v); }},
        {"grid.z_min", [](auto& c, auto& v) { c.grid.z_min = to_double(v); }},
        {"grid.z_max", [](auto& c, auto& v) { c.grid.z_max = to_double(v); }},
        {"grid.voxel_size", [](auto& c, auto& v) { c.grid.voxel_size = to_double(v); }},
        {"cfar.guard", [](auto& c, auto& v) { c.cfar.guard_cells = to_index3(v); }},
        {"cfar.training", [](auto& c, auto& v) { c.cfar.training_cells = to_index3(v); }},
        {"cfar.scale_factor", [](auto& c, auto& v) { c.cfar.scale_factor = to_double(v); }},
        {"model.encoder_channels",
         [](auto& c, auto& v) {
             c.generator.encoder_channels.clear();
             for (const auto& s : split(v, ',')) c.generator.encoder_channels.push_back(static_cast<int>(to_long(s)));
         }},
        {"model.disc_scales", [](auto& c, auto& v) { c.discriminator.scales = static_cast<int>(to_long(v)); }},
        {"model.disc_base_channels",
         [](auto& c, auto& v) { c.discriminator.base_channels = static_cast<int>(to_long(v)); }},
        {"model.disc_hidden_layers",
         [](auto& c, auto& v) { c.discriminator.hidden_layers = static_cast<int>(to_long(v)); }},
        {"loss.lambda_l1", [](auto& c, auto& v) { c.loss.lambda_l1 = to_double(v); }},
        {"loss.lambda_perc", [](auto& c, auto& v) { c.loss.lambda_perc = to_double(v); }},
        {"loss.gan_mode",
         [](auto& c, auto& v) {
             if (v == "log") c.train.gan_mode = model::GanMode::log;
             else if (v == "lsgan") c.train.gan_mode = model::GanMode::lsgan;
             else throw std::invalid_argument("expected log or lsgan");
         }},
        {"train.learning_rate", [](auto& c, auto& v) { c.train.learning_rate = to_double(v); }},
        {"train.batch_size", [](auto& c, auto& v) { c.train.batch_size = static_cast<int>(to_long(v)); }},
        {"train.epochs", [](auto& c, auto& v) { c.train.epochs = static_cast<int>(to_long(v)); }},
        {"train.beta1", [](auto& c, auto& v) { c.train.beta1 = to_double(v); }},
        {"train.beta2", [](auto& c, auto& v) { c.train.beta2 = to_double(v); }},
        {"train.epsilon", [](auto& c, auto& v) { c.train.epsilon = to_double(v); }},
        {"train.max_steps", [](auto& c, auto& v) { c.train.max_steps = to_long(v); }},
    };
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key '" + key + "'");
    it->second(c, v);
}

/// Parses config text over `base`; errors carry `source:line`.
inline PipelineConfig parse_config(const std::string& text, PipelineConfig base = {},
                                   const std::string& source = "config") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        try {
            apply_setting(base, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        } catch (const std::exception& e) {
            throw ConfigError(where + "bad value for '" + key + "': " + e.what());
        }
    }
    base.validate();
    return base;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), {}, path);
}

/// Full config as text; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const PipelineConfig& c) {
    using detail::fmt;
    std::ostringstream o;
    auto idx = [](const Index3& i) {
        return std::to_string(i[0]) + "," + std::to_string(i[1]) + "," + std::to_string(i[2]);
    };
    o << "seed = " << c.seed << "\n";
    o << "output_dir = " << c.output_dir << "\n";
    o << "methods = ";
    for (std::size_t i = 0; i < c.methods.size(); ++i) o << (i ? "," : "") << c.methods[i].to_string();
    o << "\n";
    o << "radar.carrier_frequency = " << fmt(c.radar.carrier_frequency) << "\n";
    o << "radar.chirp_slope = " << fmt(c.radar.chirp_slope) << "\n";
    o << "radar.sample_rate = " << fmt(c.radar.sample_rate) << "\n";
    o << "radar.samples_per_chirp = " << c.radar.samples_per_chirp << "\n";
    o << "radar.chirps_per_frame = " << c.radar.chirps_per_frame << "\n";
    o << "radar.azimuth_antennas = " << c.radar.azimuth_antennas << "\n";
    o << "radar.elevation_antennas = " << c.radar.elevation_antennas << "\n";
    o << "radar.antenna_spacing = " << fmt(c.radar.antenna_spacing) << "\n";
    o << "radar.noise_stddev = " << fmt(c.radar.noise_stddev) << "\n";
    o << "radar.window = " << (c.radar.window == Window::hann ? "hann" : "rect") << "\n";
    o << "radar.doppler_reduce = " << (c.doppler_reduce == DopplerReduce::max ? "max" : "mean") << "\n";
    o << "grid.x_min = " << fmt(c.grid.x_min) << "\n";
    o << "grid.x_max = " << fmt(c.grid.x_max) << "\n";
    o << "grid.y_min = " << fmt(c.grid.y_min) << "\n";
    o << "grid.y_max = " << fmt(c.grid.y_max) << "\n";
    o << "grid.z_min = " << fmt(c.grid.z_min) << "\n";
    o << "grid.z_max = " << fmt(c.grid.z_max) << "\n";
    o << "grid.voxel_size = " << fmt(c.grid.voxel_size) << "\n";
    o << "cfar.guard = " << idx(c.cfar.guard_cells) << "\n";
    o << "cfar.training = " << idx(c.cfar.training_cells) << "\n";
    o << "cfar.scale_factor = " << fmt(c.cfar.scale_factor) << "\n";
    o << "model.encoder_channels = ";
    for (std::size_t i = 0; i < c.generator.encoder_channels.size(); ++i)
        o << (i ? "," : "") << c.generator.encoder_channels[i];
    o << "\n";
    o << "model.disc_scales = " << c.discriminator.scales << "\n";
    o << "model.disc_base_channels = " << c.discriminator.base_channels << "\n";
    o << "model.disc_hidden_layers = " << c.discriminator.hidden_layers << "\n";
    o << "loss.lambda_l1 = " << fmt(c.loss.lambda_l1) << "\n";
    o << "loss.lambda_perc = " << fmt(c.loss.lambda_perc) << "\n";
    o << "loss.gan_mode = " << (c.train.gan_mode == model::GanMode::lsgan ? "lsgan" : "log") << "\n";
    o << "train.learning_rate = " << fmt(c.train.learning_rate) << "\n";
    o << "train.batch_size = " << c.train.batch_size << "\n";
    o << "train.epochs = " << c.train.epochs << "\n";
    o << "train.beta1 = " << fmt(c.train.beta1) << "\n";
    o << "train.beta2 = " << fmt(c.train.beta2) << "\n";
    o << "train.epsilon = " << fmt(c.train.epsilon) << "\n";
    o << "train.max_steps = " << c.train.max_steps << "\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// Scene files

/// Parses scatterers; syntax errors and, when `cfg` is given, physical
/// validity errors are reported with `source:line`.
inline Scene parse_scene(const std::string& text, const RadarConfig* cfg = nullptr,
                         const std::string& source = "scene") {
    Scene scene;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (detail::trim(line).empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        std::istringstream ls(line);
        std::vector<double> vals;
        std::string tok;
        while (ls >> tok) {
            try {
                vals.push_back(detail::to_double(tok));
            } catch (const std::exception&) {
                throw DataError(where + "not a number: '" + tok + "'");
            }
        }
        if (vals.size() != 5)
            throw DataError(where + "expected 5 fields (range azimuth elevation velocity reflectivity), got " +
                            std::to_string(vals.size()));
        Scatterer s{vals[0], vals[1], vals[2], vals[3], vals[4]};
        if (cfg) {
            try {
                validate_scene(Scene{{s}}, *cfg);
            } catch (const DataError& e) {
                throw DataError(where + e.what());
            }
        }
        scene.scatterers.push_back(s);
    }
    return scene;
}

inline Scene load_scene(const std::string& path, const RadarConfig* cfg = nullptr) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scene '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene(ss.str(), cfg, path);
}

inline std::string scene_to_text(const Scene& s) {
    std::ostringstream o;
    o << "# range azimuth elevation velocity reflectivity\n";
    for (const auto& x : s.scatterers)
        o << detail::fmt(x.range) << " " << detail::fmt(x.azimuth) << " " << detail::fmt(x.elevation) << " "
          << detail::fmt(x.radial_velocity) << " " << detail::fmt(x.reflectivity) << "\n";
    return o.str();
}

}  // namespace p2t::io

#endif  // P2T_IO_CONFIG_HPP

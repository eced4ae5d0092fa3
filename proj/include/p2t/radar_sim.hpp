// SPDX-License-Identifier: Apache-2.0
//
// FMCW radar signal chain: point scatterers -> ADC cube -> range/Doppler FFT
// -> angle FFT -> 4D polar power tensor -> Doppler-collapsed 3D tensor.
//
// Baseband IF model. Fast-time beat frequency 2*S*R/c, slow-time Doppler
// phase 4*pi*fc*v*Tc/c per chirp, separable array phase 2*pi*d*sin(angle)
// per virtual antenna on the azimuth and elevation axes. All FFTs are
// unitary (1/sqrt(N) per axis) so energy is preserved stage by stage.

#ifndef P2T_RADAR_SIM_HPP
#define P2T_RADAR_SIM_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fftw3.h>

#include "p2t/common.hpp"

namespace p2t {

inline constexpr double kSpeedOfLight = 299792458.0;

enum class Window { rectangular, hann };

struct RadarConfig {
    double carrier_frequency = 77e9;   // Hz
    double chirp_slope = 1.875e13;     // Hz/s
    double sample_rate = 10e6;         // Hz
    int samples_per_chirp = 64;        // fast-time FFT size (range bins)
    int chirps_per_frame = 16;         // slow-time FFT size (Doppler bins)
    int azimuth_antennas = 32;
    int elevation_antennas = 16;
    double antenna_spacing = 0.5;      // wavelengths
    double noise_stddev = 0.0;         // complex noise std per ADC sample
    Window window = Window::rectangular;

    double wavelength() const { return kSpeedOfLight / carrier_frequency; }
    double chirp_period() const { return samples_per_chirp / sample_rate; }
    double max_range() const { return kSpeedOfLight * sample_rate / (2.0 * chirp_slope); }
    double range_resolution() const { return max_range() / samples_per_chirp; }
    double velocity_resolution() const {
        return kSpeedOfLight / (2.0 * carrier_frequency * chirp_period() * chirps_per_frame);
    }

    void validate() const {
        auto pow2 = [](int n) { return n >= 1 && is_power_of_two(static_cast<std::size_t>(n)); };
        if (!pow2(samples_per_chirp) || !pow2(chirps_per_frame) || !pow2(azimuth_antennas) ||
            !pow2(elevation_antennas))
            throw ConfigError("radar: all FFT sizes must be powers of two");
        if (!(sample_rate > 0.0)) throw ConfigError("radar: sample_rate must be > 0");
        if (!(chirp_slope > 0.0)) throw ConfigError("radar: chirp_slope must be > 0");
        if (!(carrier_frequency > 0.0)) throw ConfigError("radar: carrier_frequency must be > 0");
        // Below half a wavelength some angle bins fall in invisible space
        // (|sin| > 1) and the angle axis is undefined there.
        if (!(antenna_spacing >= 0.5 && antenna_spacing <= 1.0))
            throw ConfigError("radar: antenna_spacing must lie in [0.5, 1]");
        if (!(noise_stddev >= 0.0)) throw ConfigError("radar: noise_stddev must be >= 0");
    }
};

struct Scatterer {
    double range = 0.0;            // m
    double azimuth = 0.0;          // rad
    double elevation = 0.0;        // rad
    double radial_velocity = 0.0;  // m/s
    double reflectivity = 1.0;     // linear amplitude
};

struct Scene {
    std::vector<Scatterer> scatterers;
};

/// Complex baseband samples indexed (fast_time, slow_time, az_antenna, el_antenna).
/// The same container carries the intermediate range/Doppler cube, whose
/// first two axes are then (range_bin, doppler_bin).
struct ComplexCube4 {
    std::array<int, 4> dims{0, 0, 0, 0};
    std::vector<std::complex<double>> data;

    ComplexCube4() = default;
    explicit ComplexCube4(std::array<int, 4> d)
        : dims(d), data(static_cast<std::size_t>(d[0]) * d[1] * d[2] * d[3]) {}

    std::size_t flat(int a, int b, int c, int e) const {
        return ((static_cast<std::size_t>(a) * dims[1] + b) * dims[2] + c) * dims[3] + e;
    }
    std::complex<double>& operator()(int a, int b, int c, int e) { return data[flat(a, b, c, e)]; }
    const std::complex<double>& operator()(int a, int b, int c, int e) const {
        return data[flat(a, b, c, e)];
    }
};

using AdcCube = ComplexCube4;
using RangeDopplerCube = ComplexCube4;

/// Physical coordinate of every bin centre, per axis.
struct PolarAxes {
    std::vector<double> range;      // m
    std::vector<double> azimuth;    // rad
    std::vector<double> elevation;  // rad
    std::vector<double> doppler;    // m/s
};

/// Power indexed (range_bin, azimuth_bin, elevation_bin, doppler_bin).
struct PolarTensor4D {
    std::array<int, 4> dims{0, 0, 0, 0};
    std::vector<double> power;
    PolarAxes axes;

    std::size_t flat(int r, int a, int e, int d) const {
        return ((static_cast<std::size_t>(r) * dims[1] + a) * dims[2] + e) * dims[3] + d;
    }
    double operator()(int r, int a, int e, int d) const { return power[flat(r, a, e, d)]; }
};

/// Doppler-collapsed power indexed (range_bin, azimuth_bin, elevation_bin).
struct PolarTensor3D {
    Array3 power;
    PolarAxes axes;
};

// ---------------------------------------------------------------------------
// Bin mappings

/// Physical axes implied by a configuration; angle and Doppler axes are
/// centre-shifted so the zero frequency sits at bin N/2.
inline PolarAxes polar_axes(const RadarConfig& cfg) {
    PolarAxes ax;
    ax.range.resize(cfg.samples_per_chirp);
    for (int k = 0; k < cfg.samples_per_chirp; ++k) ax.range[k] = k * cfg.range_resolution();
    auto angle_axis = [&](int n) {
        std::vector<double> out(n);
        for (int k = 0; k < n; ++k) {
            const double s = static_cast<double>(k - n / 2) / (n * cfg.antenna_spacing);
            out[k] = std::asin(std::clamp(s, -1.0, 1.0));
        }
        return out;
    };
    ax.azimuth = angle_axis(cfg.azimuth_antennas);
    ax.elevation = angle_axis(cfg.elevation_antennas);
    ax.doppler.resize(cfg.chirps_per_frame);
    for (int k = 0; k < cfg.chirps_per_frame; ++k)
        ax.doppler[k] = (k - cfg.chirps_per_frame / 2) * cfg.velocity_resolution();
    return ax;
}

/// Closed-form (range, azimuth, elevation, doppler) peak bin for a scatterer.
inline std::array<int, 4> predicted_bins(const Scatterer& s, const RadarConfig& cfg) {
    auto wrap = [](long k, int n) { return static_cast<int>(((k % n) + n) % n); };
    const long r = std::lround(2.0 * cfg.chirp_slope * s.range * cfg.samples_per_chirp /
                               (kSpeedOfLight * cfg.sample_rate));
    const int na = cfg.azimuth_antennas, ne = cfg.elevation_antennas, nd = cfg.chirps_per_frame;
    const long a = std::lround(na * cfg.antenna_spacing * std::sin(s.azimuth));
    const long e = std::lround(ne * cfg.antenna_spacing * std::sin(s.elevation));
    const long d = std::lround(2.0 * cfg.carrier_frequency * s.radial_velocity *
                               cfg.chirp_period() * nd / kSpeedOfLight);
    return {wrap(r, cfg.samples_per_chirp), wrap(a + na / 2, na), wrap(e + ne / 2, ne),
            wrap(d + nd / 2, nd)};
}

// ---------------------------------------------------------------------------
// FFT plumbing (FFTW, unitary scaling, optional Hann window)

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// In-place unitary 1D DFT along one axis of a 4D complex cube.
inline void fft_axis(ComplexCube4& cube, int axis, Window window) {
    const int n = cube.dims[axis];
    if (n == 1 && window == Window::rectangular) return;
    std::array<std::size_t, 4> stride{};
    stride[3] = 1;
    for (int i = 2; i >= 0; --i) stride[i] = stride[i + 1] * cube.dims[i + 1];

    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    std::vector<double> win(n, 1.0);
    if (window == Window::hann && n > 1)
        for (int i = 0; i < n; ++i)
            win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));

    const std::size_t total = cube.data.size();
    const std::size_t s = stride[axis];
    for (std::size_t base = 0; base < total; ++base) {
        // Visit each line once: its first element has a zero coordinate on `axis`.
        if ((base / s) % n != 0) continue;
        for (int i = 0; i < n; ++i) {
            const auto v = cube.data[base + i * s] * win[i];
            buf[i][0] = v.real();
            buf[i][1] = v.imag();
        }
        fftw_execute(plan);
        for (int i = 0; i < n; ++i)
            cube.data[base + i * s] = {buf[i][0] * scale, buf[i][1] * scale};
    }
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
}

/// Rotate an axis by N/2 so frequency zero maps to the middle bin.
inline void center_shift_axis(ComplexCube4& cube, int axis) {
    const int n = cube.dims[axis];
    if (n < 2) return;
    std::array<std::size_t, 4> stride{};
    stride[3] = 1;
    for (int i = 2; i >= 0; --i) stride[i] = stride[i + 1] * cube.dims[i + 1];
    const std::size_t s = stride[axis];
    std::vector<std::complex<double>> line(n);
    for (std::size_t base = 0; base < cube.data.size(); ++base) {
        if ((base / s) % n != 0) continue;
        for (int i = 0; i < n; ++i) line[(i + n / 2) % n] = cube.data[base + i * s];
        for (int i = 0; i < n; ++i) cube.data[base + i * s] = line[i];
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations

inline void validate_scene(const Scene& scene, const RadarConfig& cfg) {
    const double rmax = cfg.max_range();
    for (std::size_t i = 0; i < scene.scatterers.size(); ++i) {
        const auto& s = scene.scatterers[i];
        const std::string tag = "scatterer " + std::to_string(i) + ": ";
        if (!(s.range >= 0.0 && s.range < rmax))
            throw DataError(tag + "range outside [0, " + std::to_string(rmax) + ") m");
        if (!(std::abs(s.azimuth) < std::numbers::pi / 2) ||
            !(std::abs(s.elevation) < std::numbers::pi / 2))
            throw DataError(tag + "|azimuth| and |elevation| must be < pi/2");
        if (!(s.reflectivity > 0.0)) throw DataError(tag + "reflectivity must be > 0");
        if (!std::isfinite(s.radial_velocity)) throw DataError(tag + "velocity not finite");
    }
}

/// Coherent sum of per-scatterer exponentials plus optional circular
/// Gaussian noise (seeded).
inline AdcCube simulate_adc(const Scene& scene, const RadarConfig& cfg, std::uint64_t seed = 0) {
    cfg.validate();
    validate_scene(scene, cfg);
    const int nf = cfg.samples_per_chirp, ns = cfg.chirps_per_frame;
    const int na = cfg.azimuth_antennas, ne = cfg.elevation_antennas;
    AdcCube cube({nf, ns, na, ne});
    constexpr double two_pi = 2.0 * std::numbers::pi;

    std::vector<std::complex<double>> pf(nf), ps(ns), pa(na), pe(ne);
    for (const auto& s : scene.scatterers) {
        const double beat = 2.0 * cfg.chirp_slope * s.range / kSpeedOfLight;
        const double dop = 4.0 * std::numbers::pi * cfg.carrier_frequency * s.radial_velocity *
                           cfg.chirp_period() / kSpeedOfLight;
        const double az = two_pi * cfg.antenna_spacing * std::sin(s.azimuth);
        const double el = two_pi * cfg.antenna_spacing * std::sin(s.elevation);
        for (int n = 0; n < nf; ++n) pf[n] = std::polar(s.reflectivity, two_pi * beat * n / cfg.sample_rate);
        for (int m = 0; m < ns; ++m) ps[m] = std::polar(1.0, dop * m);
        for (int p = 0; p < na; ++p) pa[p] = std::polar(1.0, az * p);
        for (int q = 0; q < ne; ++q) pe[q] = std::polar(1.0, el * q);
        std::size_t f = 0;
        for (int n = 0; n < nf; ++n)
            for (int m = 0; m < ns; ++m) {
                const auto fs = pf[n] * ps[m];
                for (int p = 0; p < na; ++p) {
                    const auto fsa = fs * pa[p];
                    for (int q = 0; q < ne; ++q) cube.data[f++] += fsa * pe[q];
                }
            }
    }
    if (cfg.noise_stddev > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, cfg.noise_stddev / std::sqrt(2.0));
        for (auto& v : cube.data) {
            const double re = g(rng);
            const double im = g(rng);
            v += std::complex<double>(re, im);
        }
    }
    return cube;
}

/// Range FFT over fast time, Doppler FFT over slow time (centre-shifted).
inline RangeDopplerCube range_doppler_fft(const AdcCube& adc, Window window = Window::rectangular) {
    for (int i = 0; i < 2; ++i)
        if (!is_power_of_two(static_cast<std::size_t>(adc.dims[i])))
            throw ConfigError("range_doppler_fft: fast/slow dims must be powers of two");
    RangeDopplerCube rd = adc;
    detail::fft_axis(rd, 0, window);
    detail::fft_axis(rd, 1, window);
    detail::center_shift_axis(rd, 1);
    return rd;
}

/// Angle FFTs over both antenna axes, centre-shifted, then |.|^2 reordered
/// to (range, azimuth, elevation, doppler).
inline PolarTensor4D angle_fft(const RangeDopplerCube& rd, const RadarConfig& cfg,
                               Window window = Window::rectangular) {
    if (rd.dims[2] != cfg.azimuth_antennas || rd.dims[3] != cfg.elevation_antennas ||
        rd.dims[0] != cfg.samples_per_chirp || rd.dims[1] != cfg.chirps_per_frame)
        throw DataError("angle_fft: cube dims do not match radar configuration");
    ComplexCube4 c = rd;
    detail::fft_axis(c, 2, window);
    detail::fft_axis(c, 3, window);
    detail::center_shift_axis(c, 2);
    detail::center_shift_axis(c, 3);

    PolarTensor4D t;
    const int nr = c.dims[0], nd = c.dims[1], na = c.dims[2], ne = c.dims[3];
    t.dims = {nr, na, ne, nd};
    t.power.resize(c.data.size());
    for (int r = 0; r < nr; ++r)
        for (int d = 0; d < nd; ++d)
            for (int a = 0; a < na; ++a)
                for (int e = 0; e < ne; ++e) t.power[t.flat(r, a, e, d)] = std::norm(c(r, d, a, e));
    t.axes = polar_axes(cfg);
    return t;
}

/// Angle FFT stage without the power step, for energy bookkeeping.
inline ComplexCube4 angle_fft_complex(const RangeDopplerCube& rd, Window window = Window::rectangular) {
    ComplexCube4 c = rd;
    detail::fft_axis(c, 2, window);
    detail::fft_axis(c, 3, window);
    detail::center_shift_axis(c, 2);
    detail::center_shift_axis(c, 3);
    return c;
}

enum class DopplerReduce { mean, max };

inline PolarTensor3D collapse_doppler(const PolarTensor4D& t, DopplerReduce mode = DopplerReduce::mean) {
    PolarTensor3D out;
    const int nr = t.dims[0], na = t.dims[1], ne = t.dims[2], nd = t.dims[3];
    out.power = Array3(nr, na, ne);
    out.axes = t.axes;
    for (int r = 0; r < nr; ++r)
        for (int a = 0; a < na; ++a)
            for (int e = 0; e < ne; ++e) {
                const std::size_t base = t.flat(r, a, e, 0);
                double acc = mode == DopplerReduce::max ? t.power[base] : 0.0;
                for (int d = 0; d < nd; ++d) {
                    const double v = t.power[base + d];
                    if (mode == DopplerReduce::max) acc = std::max(acc, v);
                    else acc += v;
                }
                out.power(r, a, e) = mode == DopplerReduce::max ? acc : acc / nd;
            }
    return out;
}

/// Full chain: scene -> Doppler-collapsed 3D polar tensor.
inline PolarTensor4D simulate_polar(const Scene& scene, const RadarConfig& cfg, std::uint64_t seed = 0) {
    return angle_fft(range_doppler_fft(simulate_adc(scene, cfg, seed), cfg.window), cfg, cfg.window);
}

inline double total_energy(const ComplexCube4& c) {
    double e = 0.0;
    for (const auto& v : c.data) e += std::norm(v);
    return e;
}

}  // namespace p2t

#endif  // P2T_RADAR_SIM_HPP

#pragma once

#include "demosync/episode.hpp"
#include "demosync/geometry.hpp"
#include "demosync/report.hpp"
#include "demosync/session.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace demosync {

// Fixed linear model mapping jaw width to encoder counts before wrapping.
// The slope is steep enough that a full 0 -> 0.08 m open-close cycle crosses
// the 4096 wrap boundary more than twice.
constexpr double kSimEncoderBase = 3900.0;
constexpr double kSimEncoderSlope = 60000.0;  // counts per meter

// Deterministic random source: mt19937_64 plus an explicit Box-Muller
// transform, seeded from (seed, substream name) so every sensor draws from
// its own stream and adding a sensor never perturbs the others.
class RandomStream {
public:
    RandomStream(uint64_t seed, const std::string& substream);

    double uniform01();  // [0, 1)
    double normal();     // standard normal

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// One tactile contact: a Gaussian ring/dent blob painted while t is inside
// [start, end]. Center and radius are in pixels, depth in 8-bit intensity
// counts.
struct ContactEvent {
    double start = 0.0;
    double end = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double radius = 8.0;
    double depth = 60.0;
};

// Piecewise-linear jaw width knot.
struct WidthEvent {
    double t = 0.0;
    double width_m = 0.0;
};

// Complete description of a synthetic capture. serialize()/parse() round-trip
// through the "key = value" scenario file format with every field resolved,
// so the serialized form doubles as the ground-truth record for a run.
struct SimScenario {
    uint64_t seed = 1;
    std::string session_id = "sim";
    double duration = 10.0;

    double mocap_hz = 60.0;
    double video_hz = 30.0;
    double encoder_hz = 100.0;  // 0 disables the stream
    double tactile_hz = 30.0;   // 0 disables the stream

    // Tool path: x sweeps sinusoidally; optional transverse / vertical
    // components and a yaw oscillation share the sweep frequency at fixed
    // phase offsets.
    double sweep_amplitude = 0.2;  // meters
    double sweep_freq = 1.0;       // Hz
    double amplitude_y = 0.0;
    double amplitude_z = 0.0;
    double rot_amplitude_deg = 0.0;

    double latency_pose = 0.0;  // seconds added to each stream's timestamps
    double latency_marker = 0.0;
    double latency_encoder = 0.0;
    double latency_tactile = 0.0;

    RigidTransform mount_offset;  // controller pose relative to the tool frame

    double noise_sigma_pose = 0.0;     // meters, per position component
    double noise_sigma_marker = 0.0;   // pixels
    double noise_sigma_tactile = 0.0;  // intensity counts

    double marker_scale = 320.0;  // pixels per meter

    uint16_t tactile_height = 48;
    uint16_t tactile_width = 64;
    double tactile_base = 128.0;  // flat no-contact intensity

    std::vector<ContactEvent> contacts;
    std::vector<WidthEvent> width_events;  // defaulted to one open-close cycle

    // Marks a latency-calibration sweep; validate() then requires the
    // duration to cover at least five sweep periods.
    bool calibration_sweep = false;

    // Copy with defaults filled in (width profile, session id).
    SimScenario resolved() const;
    void validate() const;  // Error("InvalidScenario")

    std::string serialize() const;
    static SimScenario parse(const std::string& text);
    static SimScenario load(const std::string& path);

    // The canonical sweep used for latency calibration runs.
    static SimScenario calibration_default();
};

// Analytic answers for everything the simulator generated. Pure functions of
// the resolved scenario--no sampled state.
class GroundTruth {
public:
    explicit GroundTruth(SimScenario sc);

    const SimScenario& scenario() const { return sc_; }

    // Tool path before the mount offset, noise-free.
    Pose tool_pose(double t) const;
    double width_at(double t) const;
    double encoder_count_at(double t) const;  // unwrapped, unrounded
    bool in_contact(double t) const;

    // Pixels whose noiseless intensity deviates from the base level by more
    // than tau (in normalized units) at time t.
    size_t active_pixels(double t, double tau) const;

    double latency_of(StreamKind kind) const;

private:
    SimScenario sc_;
};

struct SimResult {
    RawSession session;
    GroundTruth truth;
};

// Deterministic: identical scenario -> bit-identical session.
SimResult generate_session(const SimScenario& sc);

// Per-axis accuracy of an episode against the analytic path, plus width RMS
// and the residual between the episode's latency and the injected one.
ErrorStats score_against_truth(const Episode& ep, const GroundTruth& gt);

}  // namespace demosync

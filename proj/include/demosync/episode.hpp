#pragma once

#include "demosync/calibration.hpp"
#include "demosync/geometry.hpp"
#include "demosync/latency.hpp"
#include "demosync/session.hpp"
#include "demosync/tactile.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace demosync {

// Everything needed to turn a raw session into a training-ready episode.
// delta_star places the pose stream on the video/hub clock: the pose stream's
// timestamps are shifted by -delta_star before resampling.
struct PipelineConfig {
    LatencyEstimate latency;
    std::optional<GripperCalibration> gripper_cal;
    ControllerCalibration controller_cal;
    double tactile_tau = kDefaultTactileTau;
    double tactile_hold_tolerance = 0.1;   // seconds
    double active_pixel_threshold = 0.01;  // active-pixel fraction for a "contact" frame

    void validate() const;  // Error("InvalidConfig") on non-positive tolerances
};

// One tactile sensor resampled onto the episode frame grid. Frames with no
// sensor frame within the hold tolerance are marked absent; raw bytes and
// fixed-point processed channels are stored side by side, zero-filled where
// absent, so every array has frame_count * height * width elements.
struct TactileTrack {
    bool enabled = false;  // sensor present with enough lead-in for a reference
    uint16_t height = 0;
    uint16_t width = 0;
    std::vector<uint8_t> present;
    std::vector<double> matched_time;  // timestamp of the held frame, 0 when absent
    std::vector<uint8_t> raw;
    std::vector<uint16_t> gray;
    std::vector<uint16_t> convex;
    std::vector<uint16_t> concave;
};

// Exact inputs that produced an episode, for audit and cache keys.
struct Provenance {
    std::string session_id;
    double latency_delta_s = 0.0;
    double tactile_tau = kDefaultTactileTau;
    double tactile_hold_tolerance_s = 0.1;
    uint32_t gripper_cal_digest = 0;  // content_digest(); 0 when no map supplied
    bool has_gripper_cal = false;
    uint32_t controller_cal_digest = 0;
};

struct Episode {
    std::vector<Timestamp> frame_times;  // video clock
    std::vector<uint32_t> frame_index;   // source video frame numbers
    std::vector<Pose> poses;             // corrected, resampled at frame_times
    std::vector<double> widths;          // meters, 0 when absent
    std::vector<uint8_t> width_present;
    std::vector<uint8_t> width_clamped;  // encoder query fell outside the calibrated range
    TactileTrack tactile_left;
    TactileTrack tactile_right;
    Provenance provenance;

    size_t frame_count() const { return frame_times.size(); }
};

// Side effects of a build worth surfacing without failing it.
struct BuildReport {
    std::vector<std::string> warnings;
    size_t video_frames_in = 0;
    size_t frames_dropped = 0;  // video frames outside the pose span
};

// Resamples a raw session onto its video frame grid: shifts the pose stream
// by -latency, applies the controller correction, interpolates poses and
// widths at each frame time, and matches tactile frames by holding the most
// recent one within the tolerance. Frames before the first or after the last
// pose sample are dropped, never extrapolated.
// Throws Error("MissingStream") when POSE or VIDEO_META is absent and
// Error("EmptySpan") when no frame time lands inside the pose span.
Episode build_episode(const RawSession& session, const PipelineConfig& cfg,
                      BuildReport* report = nullptr);

// Directory container: manifest.txt (schema, shapes, dtypes, per-file CRC32,
// provenance, and a trailing self-checksum) plus one little-endian binary
// file per array. read(write(ep)) == ep bit-exact.
// Throws Error("SchemaVersionMismatch") / Error("ChecksumMismatch") naming
// the damaged section.
void write_episode(const Episode& ep, const std::string& dir);
Episode read_episode(const std::string& dir);

struct SessionUsability {
    std::string session_id;
    bool usable = false;
    std::string reason;  // "ok" or the rejecting error code + context
    size_t frames_emitted = 0;
    size_t frames_dropped = 0;
    double active_tactile_fraction = 0.0;  // over frames with a matched tactile sample
};

struct UsabilityStats {
    std::vector<SessionUsability> sessions;
    double usable_fraction = 0.0;
};

// Runs build_episode over a batch and tabulates accept/reject per session.
// cfgs must have one entry per session or a single shared entry.
UsabilityStats usability_report(const std::vector<RawSession>& sessions,
                                const std::vector<PipelineConfig>& cfgs);

// Fraction of frames where at least one enabled tactile side has an
// active-pixel ratio >= threshold, over frames with any tactile present.
double episode_active_fraction(const Episode& ep, double threshold);

}  // namespace demosync

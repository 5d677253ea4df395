#pragma once

#include "demosync/geometry.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace demosync {

// 12-bit magnetic encoder count, wraps at 4096.
constexpr int kEncoderCountsPerRev = 4096;

struct EncoderReading {
    uint16_t raw = 0;  // [0, 4096)
};

// Minimal signed wrap-corrected difference in (-2048, 2048].
double wrap_diff(double raw, double prev_raw);

// Continuous count path from wrapped readings. output[0] == readings[0].raw;
// consecutive deltas are the minimal signed difference. Valid only while
// physical motion between samples stays under half a revolution, which the
// gripper linkage guarantees at the capture rate.
std::vector<double> unwrap_counts(const std::vector<EncoderReading>& readings);

// Monotone unwrapped-count -> jaw-width lookup built from a stepped
// calibration sweep. Linear between knots; linear extrapolation beyond the
// end knots clamped to [min_width - 5 mm, max_width + 5 mm].
class GripperCalibration {
public:
    struct Knot {
        double unwrapped_count = 0.0;
        double width_m = 0.0;
    };

    static GripperCalibration from_knots(std::vector<Knot> knots);

    const std::vector<Knot>& knots() const { return knots_; }
    double min_width() const { return min_width_; }
    double max_width() const { return max_width_; }
    double min_count() const { return knots_.front().unwrapped_count; }
    double max_count() const { return knots_.back().unwrapped_count; }

    // width at an unwrapped count; clamped extrapolation outside the knots.
    double width_at(double unwrapped_count) const;
    bool in_range(double unwrapped_count) const;

    std::string serialize() const;
    static GripperCalibration deserialize(const std::string& text);
    void save(const std::string& path) const;
    static GripperCalibration load(const std::string& path);

    // CRC32 over the knot rows alone, so the digest identifies the content
    // and survives save/load cycles (file metadata carries a timestamp).
    uint32_t content_digest() const;

private:
    std::vector<Knot> knots_;  // sorted by unwrapped_count
    double min_width_ = 0.0, max_width_ = 0.0;
};

// Builds the lookup from (reading, width) pairs recorded in sweep order.
// Readings are unwrapped first. Throws Error("NonMonotonic") when the
// unwrapped counts are not strictly monotone in width (a mis-run sweep).
GripperCalibration build_gripper_map(
    const std::vector<std::pair<EncoderReading, double>>& samples);

// Streaming count -> width conversion; the caller threads prev_unwrapped
// through so the function stays pure.
struct WidthSample {
    double width_m = 0.0;
    double unwrapped = 0.0;
};
WidthSample encoder_to_width(const GripperCalibration& cal, EncoderReading reading,
                             double prev_unwrapped);

// One-time mount correction: the transform recorded while the device is held
// at the agreed base pose, inverted, applied on the right (tool frame).
struct ControllerCalibration {
    RigidTransform correction;

    std::string serialize() const;
    static ControllerCalibration deserialize(const std::string& text);
    void save(const std::string& path) const;
    static ControllerCalibration load(const std::string& path);

    // CRC32 over the canonical transform row, independent of file metadata.
    uint32_t content_digest() const;
};

ControllerCalibration make_controller_calibration(const RigidTransform& recorded);
Pose apply_correction(const ControllerCalibration& cal, const Pose& raw);

}  // namespace demosync

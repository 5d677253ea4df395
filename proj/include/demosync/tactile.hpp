#pragma once

#include "demosync/geometry.hpp"

#include <cstdint>
#include <vector>

namespace demosync {

enum class TactileSide : uint8_t { Left = 0, Right = 1 };

// Raw 8-bit grayscale frame, row-major.
struct TactileFrame {
    Timestamp t = 0.0;
    TactileSide sensor_id = TactileSide::Left;
    uint16_t height = 0;
    uint16_t width = 0;
    std::vector<uint8_t> pixels;  // height * width

    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// Pixelwise mean of no-contact frames, kept real-valued in [0, 255].
struct ReferenceFrame {
    uint16_t height = 0;
    uint16_t width = 0;
    std::vector<double> pixels;
};

// 3-channel contact representation: normalized gray plus thresholded
// positive/negative deviation from the reference. convex and concave have
// disjoint support by construction.
struct ProcessedTactile {
    Timestamp t = 0.0;
    uint16_t height = 0;
    uint16_t width = 0;
    std::vector<double> gray;     // [0, 1]
    std::vector<double> convex;   // [0, 1]
    std::vector<double> concave;  // [0, 1]
};

constexpr int kMinReferenceFrames = 10;
constexpr double kDefaultTactileTau = 0.06;

// Pixelwise mean of >= min_frames no-contact frames.
// Throws Error("TooFewFrames") / Error("ShapeMismatch").
ReferenceFrame build_reference(const std::vector<TactileFrame>& frames,
                               int min_frames = kMinReferenceFrames);

// gray = frame/255; d = gray - ref/255; convex = max(d - tau, 0)/(1 - tau);
// concave = max(-d - tau, 0)/(1 - tau); channels clamped to [0, 1].
ProcessedTactile process_frame(const TactileFrame& frame, const ReferenceFrame& ref,
                               double tau = kDefaultTactileTau);

// Fraction of pixels with convex > 0 or concave > 0.
double active_ratio(const ProcessedTactile& p);

enum class ChunkDecision { Accept, Reject };

// A chunk is rejected only when EVERY frame's active ratio is below the
// threshold. Throws Error("EmptyChunk").
ChunkDecision curate_chunk(const std::vector<ProcessedTactile>& frames, double threshold);

// Processed channels persist as unsigned 16-bit fixed point (value * 65535,
// round half to even).
uint16_t to_fixed_u16(double v);
double from_fixed_u16(uint16_t v);

}  // namespace demosync

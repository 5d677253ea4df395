#include "demosync/tactile.hpp"

#include "demosync/error.hpp"

#include <algorithm>
#include <cmath>

namespace demosync {

ReferenceFrame build_reference(const std::vector<TactileFrame>& frames, int min_frames) {
    if (static_cast<int>(frames.size()) < min_frames)
        throw Error("TooFewFrames", "reference needs >= " + std::to_string(min_frames) +
                                        " frames, got " + std::to_string(frames.size()));
    const TactileFrame& first = frames.front();
    ReferenceFrame ref;
    ref.height = first.height;
    ref.width = first.width;
    ref.pixels.assign(first.pixel_count(), 0.0);
    for (const TactileFrame& f : frames) {
        if (f.height != ref.height || f.width != ref.width)
            throw Error("ShapeMismatch", "reference frames disagree on geometry");
        for (size_t i = 0; i < ref.pixels.size(); ++i) ref.pixels[i] += f.pixels[i];
    }
    const double inv = 1.0 / static_cast<double>(frames.size());
    for (double& p : ref.pixels) p *= inv;
    return ref;
}

ProcessedTactile process_frame(const TactileFrame& frame, const ReferenceFrame& ref,
                               double tau) {
    if (frame.height != ref.height || frame.width != ref.width)
        throw Error("ShapeMismatch", "frame and reference geometry differ");
    if (!(tau > 0.0 && tau < 1.0)) throw Error("InvalidConfig", "tau must be in (0, 1)");
    const size_t n = frame.pixel_count();
    ProcessedTactile out;
    out.t = frame.t;
    out.height = frame.height;
    out.width = frame.width;
    out.gray.resize(n);
    out.convex.resize(n);
    out.concave.resize(n);
    const double inv_span = 1.0 / (1.0 - tau);
    for (size_t i = 0; i < n; ++i) {
        const double gray = frame.pixels[i] / 255.0;
        const double d = gray - ref.pixels[i] / 255.0;
        out.gray[i] = gray;
        out.convex[i] = std::clamp(std::max(d - tau, 0.0) * inv_span, 0.0, 1.0);
        out.concave[i] = std::clamp(std::max(-d - tau, 0.0) * inv_span, 0.0, 1.0);
    }
    return out;
}

double active_ratio(const ProcessedTactile& p) {
    const size_t n = p.gray.size();
    if (n == 0) return 0.0;
    size_t active = 0;
    for (size_t i = 0; i < n; ++i)
        if (p.convex[i] > 0.0 || p.concave[i] > 0.0) ++active;
    return static_cast<double>(active) / static_cast<double>(n);
}

ChunkDecision curate_chunk(const std::vector<ProcessedTactile>& frames, double threshold) {
    if (frames.empty()) throw Error("EmptyChunk", "cannot curate an empty chunk");
    for (const ProcessedTactile& f : frames)
        if (!(active_ratio(f) < threshold)) return ChunkDecision::Accept;
    return ChunkDecision::Reject;
}

uint16_t to_fixed_u16(double v) {
    const double scaled = std::clamp(v, 0.0, 1.0) * 65535.0;
    // default FE_TONEAREST mode: ties round to even
    return static_cast<uint16_t>(std::nearbyint(scaled));
}

double from_fixed_u16(uint16_t v) { return v / 65535.0; }

}  // namespace demosync

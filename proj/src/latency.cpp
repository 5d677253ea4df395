#include "demosync/latency.hpp"

#include "demosync/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace demosync {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct MseResult {
    double mse = kInf;
    size_t used = 0;
};

// MSE over f's grid shifted by delta, skipping queries outside g's span.
MseResult mse_at_offset(const Trajectory1D& f, const Trajectory1D& g, double delta,
                        size_t min_samples) {
    const double g_lo = g.times.front();
    const double g_hi = g.times.back();
    double acc = 0.0;
    size_t used = 0;
    for (size_t i = 0; i < f.size(); ++i) {
        const double tq = f.times[i] + delta;
        if (tq < g_lo || tq > g_hi) continue;
        const double d = f.values[i] - interp_linear(g, tq);
        acc += d * d;
        ++used;
    }
    if (used < min_samples || used == 0) return {kInf, used};
    return {acc / static_cast<double>(used), used};
}

}  // namespace

Axis axis_from_string(const std::string& s) {
    if (s == "x" || s == "X") return Axis::X;
    if (s == "y" || s == "Y") return Axis::Y;
    if (s == "z" || s == "Z") return Axis::Z;
    throw Error("UsageError", "axis must be x, y or z, got '" + s + "'");
}

void LatencyConfig::validate() const {
    if (!(epsilon > 0.0)) throw Error("InvalidConfig", "epsilon must be > 0");
    if (window_n < 1) throw Error("InvalidConfig", "window_n must be >= 1");
    if (splits_m < 2 * window_n + 2)
        throw Error("InvalidConfig", "splits_m must be >= 2*window_n + 2");
    if (!(delta_min < delta_max)) throw Error("InvalidConfig", "delta_min must be < delta_max");
    if (!(min_overlap_fraction > 0.0 && min_overlap_fraction <= 1.0))
        throw Error("InvalidConfig", "min_overlap_fraction must be in (0, 1]");
}

Trajectory1D extract_axis(const std::vector<PoseSample>& track, Axis axis) {
    if (track.empty()) throw Error("EmptyTrack", "cannot extract axis from empty track");
    Trajectory1D out;
    out.times.reserve(track.size());
    out.values.reserve(track.size());
    for (const PoseSample& s : track) {
        out.times.push_back(s.t);
        switch (axis) {
            case Axis::X: out.values.push_back(s.pose.position.x); break;
            case Axis::Y: out.values.push_back(s.pose.position.y); break;
            case Axis::Z: out.values.push_back(s.pose.position.z); break;
        }
    }
    return out;
}

Trajectory1D zscore_normalize(const Trajectory1D& traj) {
    traj.validate();
    const size_t n = traj.size();
    if (n < 2) throw Error("DegenerateSignal", "need at least 2 samples to normalize");
    double mean = 0.0;
    for (double v : traj.values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : traj.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    if (var < 1e-12)
        throw Error("DegenerateSignal", "variance below 1e-12; constant signal cannot be aligned");
    const double inv_std = 1.0 / std::sqrt(var);
    Trajectory1D out;
    out.times = traj.times;
    out.values.reserve(n);
    for (double v : traj.values) out.values.push_back((v - mean) * inv_std);
    return out;
}

LatencyEstimate estimate_latency(const Trajectory1D& f_raw, const Trajectory1D& g_raw,
                                 const LatencyConfig& cfg) {
    cfg.validate();
    const Trajectory1D f = zscore_normalize(f_raw);
    const Trajectory1D g = zscore_normalize(g_raw);

    const size_t min_samples = static_cast<size_t>(
        std::ceil(cfg.min_overlap_fraction * static_cast<double>(f.size())));

    double lo = cfg.delta_min;
    double hi = cfg.delta_max;
    LatencyEstimate best;
    int passes = 0;
    // Width shrinks by 2N/M each pass, so the bound below is generous.
    const int max_passes = 64;
    do {
        if (++passes > max_passes)
            throw Error("InvalidConfig", "latency search failed to converge");
        const double step = (hi - lo) / cfg.splits_m;
        double best_mse = kInf;
        int best_k = -1;
        size_t best_used = 0;
        for (int k = 0; k <= cfg.splits_m; ++k) {
            const double delta = lo + step * k;
            const MseResult r = mse_at_offset(f, g, delta, min_samples);
            if (r.mse < best_mse) {
                best_mse = r.mse;
                best_k = k;
                best_used = r.used;
            }
        }
        if (best_k < 0)
            throw Error("NoValidOffset",
                        "no candidate offset keeps " +
                            std::to_string(100.0 * cfg.min_overlap_fraction) +
                            "% of the reference samples in range");
        const double delta_k = lo + step * best_k;
        best.delta_star = delta_k;
        best.residual_mse = best_mse;
        best.overlap_fraction =
            static_cast<double>(best_used) / static_cast<double>(f.size());
        lo = std::max(cfg.delta_min, delta_k - cfg.window_n * step);
        hi = std::min(cfg.delta_max, delta_k + cfg.window_n * step);
    } while (hi - lo >= cfg.epsilon);
    best.passes = passes;
    return best;
}

FlipAwareEstimate estimate_latency_allow_flip(const Trajectory1D& f, const Trajectory1D& g,
                                              const LatencyConfig& cfg) {
    const LatencyEstimate plain = estimate_latency(f, g, cfg);
    Trajectory1D neg = g;
    for (double& v : neg.values) v = -v;
    const LatencyEstimate mirrored = estimate_latency(f, neg, cfg);
    if (mirrored.residual_mse < plain.residual_mse) return {mirrored, true};
    return {plain, false};
}

std::vector<PoseSample> apply_latency(const std::vector<PoseSample>& track, double delta) {
    std::vector<PoseSample> out = track;
    for (PoseSample& s : out) s.t += delta;
    return out;
}

Trajectory1D apply_latency(const Trajectory1D& traj, double delta) {
    Trajectory1D out = traj;
    for (double& t : out.times) t += delta;
    return out;
}

}  // namespace demosync

#pragma once

#include "demosync/geometry.hpp"

#include <string>
#include <vector>

namespace demosync {

enum class Axis { X, Y, Z };

Axis axis_from_string(const std::string& s);

struct LatencyConfig {
    double epsilon = 1e-4;        // convergence width, seconds
    int splits_m = 100;           // grid points per refinement pass
    int window_n = 2;             // neighborhood half-width, in grid indices
    double delta_min = -0.5;      // search bounds, seconds
    double delta_max = 0.5;
    double min_overlap_fraction = 0.5;

    void validate() const;
};

struct LatencyEstimate {
    double delta_star = 0.0;      // seconds; f(t) ~ g(t + delta_star)
    double residual_mse = 0.0;    // at delta_star, z-scored units
    double overlap_fraction = 1.0;
    int passes = 0;
};

// Position component of a pose track as a 1-D trajectory.
// Throws Error("EmptyTrack") on an empty track.
Trajectory1D extract_axis(const std::vector<PoseSample>& track, Axis axis);

// Mean 0, sample (n-1) standard deviation 1; times unchanged.
// Throws Error("DegenerateSignal") when the variance is below 1e-12.
Trajectory1D zscore_normalize(const Trajectory1D& traj);

// Estimates the temporal offset of g relative to f by iterative grid search
// over the MSE objective: split the bounds into splits_m segments, evaluate
// mean squared error of f(t_i) - g(t_i + delta_k) on f's native grid, keep
// the argmin's +-window_n neighborhood (clipped to the original bounds) and
// repeat until the interval is narrower than epsilon. Both signals are
// z-score normalized internally. Grid samples where t_i + delta_k falls
// outside g's span are excluded; a candidate keeping fewer than
// min_overlap_fraction of f's samples scores +inf.
//
// Returns delta_star such that f(t) ~ g(t + delta_star): positive when g's
// timestamps run ahead of f's for the same signal content. To bring g's
// source stream onto f's clock, shift its timestamps by -delta_star.
//
// Throws Error("NoValidOffset") when every candidate lacks overlap and
// Error("DegenerateSignal") from normalization.
LatencyEstimate estimate_latency(const Trajectory1D& f, const Trajectory1D& g,
                                 const LatencyConfig& cfg);

// estimate_latency over both g and -g; picks the sign with the lower
// residual. flipped reports which one won.
struct FlipAwareEstimate {
    LatencyEstimate estimate;
    bool flipped = false;
};
FlipAwareEstimate estimate_latency_allow_flip(const Trajectory1D& f, const Trajectory1D& g,
                                              const LatencyConfig& cfg);

// Shifts every timestamp by +delta; order preserved.
std::vector<PoseSample> apply_latency(const std::vector<PoseSample>& track, double delta);
Trajectory1D apply_latency(const Trajectory1D& traj, double delta);

}  // namespace demosync

#include "demosync/geometry.hpp"

#include "demosync/error.hpp"
#include "demosync/textio.hpp"

#include <algorithm>
#include <cmath>

namespace demosync {

Quat Quat::from_axis_angle(const Vec3& axis, double angle_rad) {
    const double n = axis.norm();
    if (n == 0.0) return Quat::identity();
    const double h = 0.5 * angle_rad;
    const double s = std::sin(h) / n;
    return {std::cos(h), axis.x * s, axis.y * s, axis.z * s};
}

Quat Quat::normalized() const {
    const double n = norm();
    if (n < 1e-300) throw Error("DegenerateQuaternion", "zero-norm quaternion");
    return {w / n, x / n, y / n, z / n};
}

Vec3 Quat::rotate(const Vec3& v) const {
    const Vec3 u{x, y, z};
    const Vec3 uv = u.cross(v);
    const Vec3 uuv = u.cross(uv);
    return v + (uv * (2.0 * w)) + (uuv * 2.0);
}

double rotation_angle_between(const Quat& a, const Quat& b) {
    const double d = std::min(1.0, std::abs(a.dot(b)));
    return 2.0 * std::acos(d);
}

Quat slerp(const Quat& q0, const Quat& q1, double u) {
    Quat b = q1;
    double d = q0.dot(b);
    if (d < 0.0) {  // shortest arc
        b = b.negated();
        d = -d;
    }
    d = std::min(1.0, d);
    const double theta = std::acos(d);
    if (theta < 1e-6) {
        Quat r{q0.w + (b.w - q0.w) * u, q0.x + (b.x - q0.x) * u,
               q0.y + (b.y - q0.y) * u, q0.z + (b.z - q0.z) * u};
        return r.normalized();
    }
    const double s = std::sin(theta);
    const double c0 = std::sin((1.0 - u) * theta) / s;
    const double c1 = std::sin(u * theta) / s;
    Quat r{c0 * q0.w + c1 * b.w, c0 * q0.x + c1 * b.x,
           c0 * q0.y + c1 * b.y, c0 * q0.z + c1 * b.z};
    return r.normalized();
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {(a.rotation * b.rotation).normalized(),
            a.rotation.rotate(b.translation) + a.translation};
}

RigidTransform invert(const RigidTransform& a) {
    const Quat inv = a.rotation.conjugate();
    return {inv, inv.rotate(a.translation) * -1.0};
}

void Trajectory1D::validate() const {
    if (times.size() != values.size())
        throw Error("InvalidTrajectory", "times/values length mismatch");
    for (size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
            throw Error("InvalidTrajectory", "non-finite sample at index " + std::to_string(i));
        if (i > 0 && times[i] <= times[i - 1])
            throw Error("InvalidTrajectory",
                        "times not strictly increasing at index " + std::to_string(i));
    }
}

double interp_linear(const Trajectory1D& traj, Timestamp t) {
    if (traj.size() < 2) throw Error("InvalidTrajectory", "need at least 2 samples");
    if (t < traj.times.front() || t > traj.times.back())
        throw Error("OutOfDomain", "t=" + fmt_g17(t) + " outside [" +
                                       fmt_g17(traj.times.front()) + ", " +
                                       fmt_g17(traj.times.back()) + "]");
    auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
    if (it == traj.times.end()) return traj.values.back();
    size_t hi = static_cast<size_t>(it - traj.times.begin());
    if (hi == 0) return traj.values.front();
    size_t lo = hi - 1;
    const double t0 = traj.times[lo], t1 = traj.times[hi];
    const double u = (t - t0) / (t1 - t0);
    return traj.values[lo] + (traj.values[hi] - traj.values[lo]) * u;
}

Pose interp_pose(const std::vector<PoseSample>& track, Timestamp t) {
    if (track.size() < 2) throw Error("InvalidTrajectory", "need at least 2 pose samples");
    if (t < track.front().t || t > track.back().t)
        throw Error("OutOfDomain", "t=" + fmt_g17(t) + " outside pose track span");
    auto it = std::upper_bound(track.begin(), track.end(), t,
                               [](Timestamp v, const PoseSample& s) { return v < s.t; });
    if (it == track.end()) return track.back().pose;
    size_t hi = static_cast<size_t>(it - track.begin());
    if (hi == 0) return track.front().pose;
    size_t lo = hi - 1;
    const PoseSample& a = track[lo];
    const PoseSample& b = track[hi];
    const double u = (t - a.t) / (b.t - a.t);
    Pose out;
    out.position = a.pose.position + (b.pose.position - a.pose.position) * u;
    out.orientation = slerp(a.pose.orientation, b.pose.orientation, u);
    return out;
}

}  // namespace demosync

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace demosync {

// Seconds since the session epoch. Streams keep strictly increasing
// timestamps; cross-stream offsets are handled by the latency module.
using Timestamp = double;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

// Unit quaternion; w is the scalar part. q and -q encode the same rotation,
// serialization boundaries canonicalize to w >= 0.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }
    static Quat from_axis_angle(const Vec3& axis, double angle_rad);

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    Quat normalized() const;
    Quat conjugate() const { return {w, -x, -y, -z}; }
    Quat negated() const { return {-w, -x, -y, -z}; }
    // Canonical sign: scalar part non-negative.
    Quat canonicalized() const { return w < 0.0 ? negated() : *this; }

    Quat operator*(const Quat& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Vec3 rotate(const Vec3& v) const;
};

// Geodesic distance between the rotations, in radians, in [0, pi].
double rotation_angle_between(const Quat& a, const Quat& b);

// Shortest-arc spherical interpolation, u in [0,1]. Falls back to normalized
// linear interpolation when the inter-quaternion angle is below 1e-6 rad.
Quat slerp(const Quat& q0, const Quat& q1, double u);

struct Pose {
    Vec3 position;
    Quat orientation;
};

struct PoseSample {
    Timestamp t = 0.0;
    Pose pose;
};

struct RigidTransform {
    Quat rotation;
    Vec3 translation;

    static RigidTransform identity() { return {Quat::identity(), {0, 0, 0}}; }
    Vec3 apply(const Vec3& p) const { return rotation.rotate(p) + translation; }
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& a);

inline RigidTransform pose_to_transform(const Pose& p) { return {p.orientation, p.position}; }
inline Pose transform_to_pose(const RigidTransform& t) { return {t.translation, t.rotation}; }

// Scalar samples on a strictly increasing time grid.
struct Trajectory1D {
    std::vector<Timestamp> times;
    std::vector<double> values;

    size_t size() const { return times.size(); }
    // Throws Error("InvalidTrajectory") on length mismatch, non-monotone
    // times or non-finite values.
    void validate() const;
};

// Linear interpolation; exact at knots. Throws Error("OutOfDomain") for t
// outside [times.front(), times.back()] -- callers own the clamp/skip policy.
double interp_linear(const Trajectory1D& traj, Timestamp t);

// Position lerp + orientation slerp between the bracketing samples of a
// time-sorted track. Throws Error("OutOfDomain") outside the track span.
Pose interp_pose(const std::vector<PoseSample>& track, Timestamp t);

}  // namespace demosync

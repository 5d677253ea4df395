#include "demosync/geometry.hpp"

#include "demosync/error.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace demosync;
using testutil::error_code_of;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::mt19937_64 g_rng(987654321);

double unit_normal() {
    static std::normal_distribution<double> n(0.0, 1.0);
    return n(g_rng);
}

Quat random_unit_quat() {
    Quat q{unit_normal(), unit_normal(), unit_normal(), unit_normal()};
    return q.normalized();
}

Vec3 random_vec() { return {unit_normal(), unit_normal(), unit_normal()}; }

RigidTransform random_transform() { return {random_unit_quat(), random_vec()}; }

// Independent oracle for the geodesic angle: for unit quaternions the
// rotation angle between a and b is 2*atan2(|vec(d)|, |scalar(d)|) with
// d = conj(a)*b, using atan2 for numerical robustness near 0 and pi.
double angle_oracle(const Quat& a, const Quat& b) {
    Quat d = a.conjugate() * b;
    double vec_norm = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
    double ang = 2.0 * std::atan2(vec_norm, std::fabs(d.w));
    return ang;
}

// Rotation by quaternion via the 3x3 matrix, built independently of
// Quat::rotate's implementation.
Vec3 rotate_oracle(const Quat& q, const Vec3& v) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    double m[3][3] = {
        {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
        {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
        {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

}  // namespace

TEST_CASE("vector algebra identities") {
    for (int i = 0; i < 50; ++i) {
        Vec3 a = random_vec(), b = random_vec();
        CHECK(std::fabs(a.cross(b).dot(a)) <= 1e-12);
        CHECK(std::fabs(a.cross(b).dot(b)) <= 1e-12);
        CHECK((a - b).norm() == doctest::Approx((b - a).norm()));
        CHECK(a.dot(b) == doctest::Approx(b.dot(a)));
    }
}

TEST_CASE("quaternion rotation matches the rotation-matrix oracle") {
    for (int i = 0; i < 200; ++i) {
        Quat q = random_unit_quat();
        Vec3 v = random_vec();
        Vec3 got = q.rotate(v);
        Vec3 want = rotate_oracle(q, v);
        CHECK(got.x == doctest::Approx(want.x).epsilon(1e-12));
        CHECK(got.y == doctest::Approx(want.y).epsilon(1e-12));
        CHECK(got.z == doctest::Approx(want.z).epsilon(1e-12));
        // Rotation preserves length.
        CHECK(got.norm() == doctest::Approx(v.norm()).epsilon(1e-12));
    }
}

TEST_CASE("from_axis_angle produces known rotations") {
    // 90 degrees about z maps x-hat to y-hat.
    Quat qz = Quat::from_axis_angle({0, 0, 1}, kPi / 2);
    Vec3 r = qz.rotate({1, 0, 0});
    CHECK(std::fabs(r.x) <= 1e-15);
    CHECK(r.y == doctest::Approx(1.0));
    CHECK(std::fabs(r.z) <= 1e-15);

    // Axis length does not matter; angle does.
    Quat a = Quat::from_axis_angle({0, 0, 10}, 0.3);
    Quat b = Quat::from_axis_angle({0, 0, 1}, 0.3);
    CHECK(std::fabs(angle_oracle(a, b)) <= 1e-12);

    // Rotating by theta then -theta is the identity.
    Quat c = Quat::from_axis_angle({1, 2, 3}, 0.7) * Quat::from_axis_angle({1, 2, 3}, -0.7);
    CHECK(std::fabs(angle_oracle(c, Quat::identity())) <= 1e-12);
}

TEST_CASE("canonicalized flips only the sign and keeps the rotation") {
    for (int i = 0; i < 50; ++i) {
        Quat q = random_unit_quat();
        Quat c = q.canonicalized();
        CHECK(c.w >= 0.0);
        CHECK(std::fabs(angle_oracle(q, c)) <= 1e-12);
    }
    Quat neg{-0.5, 0.5, 0.5, 0.5};
    CHECK(neg.canonicalized().w == 0.5);
}

TEST_CASE("rotation_angle_between matches the oracle and is sign-invariant") {
    for (int i = 0; i < 200; ++i) {
        Quat a = random_unit_quat(), b = random_unit_quat();
        double got = rotation_angle_between(a, b);
        double want = angle_oracle(a, b);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
        CHECK(got >= 0.0);
        CHECK(got <= kPi + 1e-12);
        // q and -q are the same rotation.
        CHECK(rotation_angle_between(a.negated(), b) == doctest::Approx(got).epsilon(1e-9));
        CHECK(rotation_angle_between(a, b) == doctest::Approx(rotation_angle_between(b, a)));
    }
    CHECK(rotation_angle_between(Quat::identity(), Quat::identity()) == 0.0);
    // Known value: 90 degrees about z.
    CHECK(rotation_angle_between(Quat::identity(), Quat::from_axis_angle({0, 0, 1}, kPi / 2)) ==
          doctest::Approx(kPi / 2).epsilon(1e-12));
}

TEST_CASE("slerp hits the endpoints exactly and stays unit-norm") {
    for (int i = 0; i < 100; ++i) {
        Quat a = random_unit_quat(), b = random_unit_quat();
        Quat s0 = slerp(a, b, 0.0);
        Quat s1 = slerp(a, b, 1.0);
        CHECK(std::fabs(angle_oracle(s0, a)) <= 1e-9);
        CHECK(std::fabs(angle_oracle(s1, b)) <= 1e-9);
        for (double u : {0.1, 0.25, 0.5, 0.75, 0.9}) {
            CHECK(slerp(a, b, u).norm() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("slerp traverses the geodesic at constant angular speed") {
    for (int i = 0; i < 100; ++i) {
        Quat a = random_unit_quat(), b = random_unit_quat();
        double total = rotation_angle_between(a, b);
        for (double u : {0.2, 0.5, 0.8}) {
            Quat s = slerp(a, b, u);
            // Independently measured angles from each endpoint.
            CHECK(angle_oracle(a, s) == doctest::Approx(u * total).epsilon(1e-8));
            CHECK(angle_oracle(s, b) == doctest::Approx((1 - u) * total).epsilon(1e-8));
        }
    }
}

TEST_CASE("slerp takes the shortest arc regardless of representative signs") {
    Quat a = Quat::from_axis_angle({0, 0, 1}, 0.2);
    Quat b = Quat::from_axis_angle({0, 0, 1}, 0.6);
    // Same rotations, opposite-sign representative for b: the midpoint must
    // still be the 0.4 rad rotation, not a detour around the sphere.
    Quat mid1 = slerp(a, b, 0.5);
    Quat mid2 = slerp(a, b.negated(), 0.5);
    Quat want = Quat::from_axis_angle({0, 0, 1}, 0.4);
    CHECK(std::fabs(angle_oracle(mid1, want)) <= 1e-9);
    CHECK(std::fabs(angle_oracle(mid2, want)) <= 1e-9);
}

TEST_CASE("slerp between nearly identical rotations stays finite and exact") {
    Quat a = random_unit_quat();
    Quat b = (a * Quat::from_axis_angle({1, 0, 0}, 1e-9)).normalized();
    Quat s = slerp(a, b, 0.5);
    CHECK(std::isfinite(s.w));
    CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(angle_oracle(a, s) <= 1e-9);
}

TEST_CASE("rigid transform composition agrees with pointwise application") {
    for (int i = 0; i < 150; ++i) {
        RigidTransform a = random_transform(), b = random_transform();
        Vec3 p = random_vec();
        Vec3 composed = compose(a, b).apply(p);
        Vec3 nested = a.apply(b.apply(p));
        CHECK(composed.x == doctest::Approx(nested.x).epsilon(1e-10));
        CHECK(composed.y == doctest::Approx(nested.y).epsilon(1e-10));
        CHECK(composed.z == doctest::Approx(nested.z).epsilon(1e-10));
    }
}

TEST_CASE("rigid transforms satisfy the group laws") {
    const RigidTransform id = RigidTransform::identity();
    for (int i = 0; i < 120; ++i) {
        RigidTransform a = random_transform(), b = random_transform(), c = random_transform();
        Vec3 p = random_vec();

        // Associativity.
        Vec3 lhs = compose(compose(a, b), c).apply(p);
        Vec3 rhs = compose(a, compose(b, c)).apply(p);
        CHECK(std::fabs((lhs - rhs).norm()) <= 1e-9);

        // Identity element.
        Vec3 pi1 = compose(a, id).apply(p);
        Vec3 pi2 = compose(id, a).apply(p);
        Vec3 pa = a.apply(p);
        CHECK(std::fabs((pi1 - pa).norm()) <= 1e-10);
        CHECK(std::fabs((pi2 - pa).norm()) <= 1e-10);

        // Inverse: a^-1 ∘ a == id pointwise, both orders.
        Vec3 back1 = compose(invert(a), a).apply(p);
        Vec3 back2 = compose(a, invert(a)).apply(p);
        CHECK(std::fabs((back1 - p).norm()) <= 1e-9);
        CHECK(std::fabs((back2 - p).norm()) <= 1e-9);

        // invert(invert(a)) == a pointwise.
        Vec3 twice = invert(invert(a)).apply(p);
        CHECK(std::fabs((twice - pa).norm()) <= 1e-9);
    }
}

TEST_CASE("invert reverses apply for random points") {
    for (int i = 0; i < 100; ++i) {
        RigidTransform a = random_transform();
        Vec3 p = random_vec();
        Vec3 round = invert(a).apply(a.apply(p));
        CHECK(std::fabs((round - p).norm()) <= 1e-10);
    }
}

TEST_CASE("trajectory validation rejects malformed inputs") {
    Trajectory1D ok{{0.0, 1.0, 2.0}, {5.0, 6.0, 7.0}};
    CHECK(error_code_of([&] { ok.validate(); }).empty());

    Trajectory1D mismatch{{0.0, 1.0}, {5.0}};
    CHECK(error_code_of([&] { mismatch.validate(); }) == "InvalidTrajectory");

    Trajectory1D nonmono{{0.0, 1.0, 1.0}, {1.0, 2.0, 3.0}};
    CHECK(error_code_of([&] { nonmono.validate(); }) == "InvalidTrajectory");

    Trajectory1D backwards{{0.0, 2.0, 1.0}, {1.0, 2.0, 3.0}};
    CHECK(error_code_of([&] { backwards.validate(); }) == "InvalidTrajectory");

    Trajectory1D nan_val{{0.0, 1.0}, {1.0, std::nan("")}};
    CHECK(error_code_of([&] { nan_val.validate(); }) == "InvalidTrajectory");

    Trajectory1D nan_time{{0.0, std::nan("")}, {1.0, 2.0}};
    CHECK(error_code_of([&] { nan_time.validate(); }) == "InvalidTrajectory");
}

TEST_CASE("interp_linear is exact at knots and linear between them") {
    Trajectory1D traj{{0.0, 1.0, 3.0, 3.5}, {2.0, 4.0, -2.0, -2.0}};
    for (size_t i = 0; i < traj.size(); ++i)
        CHECK(interp_linear(traj, traj.times[i]) == traj.values[i]);
    CHECK(interp_linear(traj, 0.5) == doctest::Approx(3.0));
    CHECK(interp_linear(traj, 2.0) == doctest::Approx(1.0));
    CHECK(interp_linear(traj, 3.25) == doctest::Approx(-2.0));
    CHECK(error_code_of([&] { interp_linear(traj, -0.001); }) == "OutOfDomain");
    CHECK(error_code_of([&] { interp_linear(traj, 3.5001); }) == "OutOfDomain");
}

TEST_CASE("interp_linear error on a smooth signal obeys the h^2/8 bound") {
    // For f in C^2, linear interpolation error <= h^2/8 * max|f''|.
    // f = sin has |f''| <= 1.
    Trajectory1D traj;
    const double h = 0.05;
    for (int i = 0; i <= 200; ++i) {
        traj.times.push_back(i * h);
        traj.values.push_back(std::sin(i * h));
    }
    const double bound = h * h / 8.0 + 1e-12;
    std::uniform_real_distribution<double> u(0.0, 200 * h);
    for (int i = 0; i < 500; ++i) {
        double t = u(g_rng);
        CHECK(std::fabs(interp_linear(traj, t) - std::sin(t)) <= bound);
    }
}

TEST_CASE("interp_pose lerps position and slerps orientation") {
    std::vector<PoseSample> track;
    track.push_back({0.0, {{0, 0, 0}, Quat::identity()}});
    track.push_back({1.0, {{1, 2, 3}, Quat::from_axis_angle({0, 0, 1}, 0.8)}});
    track.push_back({3.0, {{1, 0, 3}, Quat::from_axis_angle({0, 0, 1}, 0.8)}});

    // Exact at knots.
    for (const auto& s : track) {
        Pose p = interp_pose(track, s.t);
        CHECK((p.position - s.pose.position).norm() == 0.0);
        CHECK(std::fabs(angle_oracle(p.orientation, s.pose.orientation)) <= 1e-12);
    }

    Pose mid = interp_pose(track, 0.5);
    CHECK(mid.position.x == doctest::Approx(0.5));
    CHECK(mid.position.y == doctest::Approx(1.0));
    CHECK(mid.position.z == doctest::Approx(1.5));
    CHECK(std::fabs(angle_oracle(mid.orientation, Quat::from_axis_angle({0, 0, 1}, 0.4))) <= 1e-9);

    Pose later = interp_pose(track, 2.0);
    CHECK(later.position.y == doctest::Approx(1.0));
    CHECK(std::fabs(angle_oracle(later.orientation, Quat::from_axis_angle({0, 0, 1}, 0.8))) <=
          1e-9);

    CHECK(error_code_of([&] { interp_pose(track, -0.1); }) == "OutOfDomain");
    CHECK(error_code_of([&] { interp_pose(track, 3.1); }) == "OutOfDomain");
    // Too few samples is a malformed track, not a domain miss.
    std::vector<PoseSample> empty;
    CHECK(error_code_of([&] { interp_pose(empty, 0.0); }) == "InvalidTrajectory");
}

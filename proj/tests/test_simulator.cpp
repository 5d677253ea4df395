#include "demosync/simulator.hpp"

#include "demosync/error.hpp"
#include "demosync/latency.hpp"
#include "demosync/textio.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace demosync;
using testutil::error_code_of;

namespace {

// Serializes a full session into one byte string for identity comparisons.
std::string session_fingerprint(const RawSession& s) {
    std::string out = s.header.serialize();
    auto append = [&out](const std::vector<uint8_t>& bytes) {
        out.append(bytes.begin(), bytes.end());
    };
    for (const PoseSample& p : s.poses)
        append(encode_record(StreamKind::Pose, p.t, encode_pose_payload(p.pose)));
    for (const EncoderSample& e : s.encoder)
        append(encode_record(StreamKind::Encoder, e.t, encode_encoder_payload(e.raw)));
    for (const TactileFrame& f : s.tactile)
        append(encode_record(StreamKind::Tactile, f.t, encode_tactile_payload(f)));
    for (const VideoFrameMeta& v : s.video)
        append(encode_record(StreamKind::VideoMeta, v.t, encode_video_meta_payload(v.index)));
    for (const MarkerSample& m : s.marker)
        append(encode_record(StreamKind::Marker, m.t, encode_marker_payload({m.u, m.v})));
    return out;
}

SimScenario small_scenario() {
    SimScenario sc;
    sc.duration = 2.0;
    sc.tactile_height = 8;
    sc.tactile_width = 8;
    return sc;
}

}  // namespace

TEST_CASE("random streams are deterministic per (seed, name) and independent") {
    RandomStream a(42, "pose");
    RandomStream b(42, "pose");
    for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());

    RandomStream c(42, "marker");
    RandomStream d(43, "pose");
    RandomStream e(42, "pose");
    bool differs_by_name = false, differs_by_seed = false;
    for (int i = 0; i < 20; ++i) {
        const double v = e.uniform01();
        if (c.uniform01() != v) differs_by_name = true;
        if (d.uniform01() != v) differs_by_seed = true;
    }
    CHECK(differs_by_name);
    CHECK(differs_by_seed);
}

TEST_CASE("uniform01 stays in [0,1) and normals have sane moments") {
    RandomStream rng(7, "check");
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    RandomStream nrm(7, "check2");
    for (int i = 0; i < n; ++i) {
        const double v = nrm.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("scenario defaults resolve and validate cleanly") {
    SimScenario sc;
    CHECK(error_code_of([&] { sc.validate(); }).empty());
    SimScenario r = sc.resolved();
    REQUIRE(r.width_events.size() == 3);
    CHECK(r.width_events[0].t == 0.0);
    CHECK(r.width_events[1].t == 5.0);
    CHECK(r.width_events[1].width_m == 0.08);
    CHECK(r.width_events[2].t == 10.0);
    CHECK(r.width_events[2].width_m == 0.0);

    SimScenario cal = SimScenario::calibration_default();
    CHECK(cal.calibration_sweep);
    CHECK(cal.encoder_hz == 0.0);
    CHECK(cal.tactile_hz == 0.0);
    CHECK(error_code_of([&] { cal.validate(); }).empty());
}

TEST_CASE("scenario validation rejects each malformed field") {
    auto broken = [](auto mut) {
        SimScenario sc;
        mut(sc);
        return error_code_of([&] { sc.validate(); });
    };
    CHECK(broken([](SimScenario& s) { s.duration = 0.0; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.mocap_hz = 0.0; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.video_hz = -1.0; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.encoder_hz = -2.0; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.sweep_amplitude = -0.1; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.marker_scale = 0.0; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.noise_sigma_pose = -1.0; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.tactile_height = 0; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.tactile_base = 300.0; }) == "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.mount_offset.rotation = {0, 0, 0, 0}; }) ==
          "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.contacts.push_back({2.0, 1.0, 0, 0, 8, 60}); }) ==
          "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.contacts.push_back({0.0, 1.0, 0, 0, -1, 60}); }) ==
          "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.width_events = {{0.0, 0.0}, {1.0, 0.5}}; }) ==
          "InvalidScenario");
    CHECK(broken([](SimScenario& s) { s.width_events = {{1.0, 0.0}, {1.0, 0.05}}; }) ==
          "InvalidScenario");
    // A flagged sweep that is too short for its period count.
    CHECK(broken([](SimScenario& s) {
              s.calibration_sweep = true;
              s.duration = 3.0;
              s.sweep_freq = 1.0;
          }) == "InvalidScenario");
}

TEST_CASE("scenario files round-trip through serialize/parse") {
    SimScenario sc;
    sc.seed = 12345;
    sc.session_id = "round trip";
    sc.duration = 7.5;
    sc.amplitude_y = 0.05;
    sc.rot_amplitude_deg = 12.0;
    sc.latency_pose = 0.137;
    sc.mount_offset = {Quat::from_axis_angle({0, 1, 0}, 0.3), {0.02, -0.01, 0.015}};
    sc.noise_sigma_pose = 0.002;
    sc.tactile_height = 24;
    sc.tactile_width = 32;
    sc.contacts.push_back({1.0, 2.5, 16.0, 12.0, 6.0, 55.0});
    sc.width_events = {{0.0, 0.01}, {3.0, 0.07}, {7.5, 0.02}};

    SimScenario back = SimScenario::parse(sc.serialize());
    CHECK(back.seed == sc.seed);
    CHECK(back.session_id == sc.session_id);
    CHECK(back.duration == sc.duration);
    CHECK(back.amplitude_y == sc.amplitude_y);
    CHECK(back.rot_amplitude_deg == sc.rot_amplitude_deg);
    CHECK(back.latency_pose == sc.latency_pose);
    CHECK(back.noise_sigma_pose == sc.noise_sigma_pose);
    CHECK(back.tactile_height == 24);
    REQUIRE(back.contacts.size() == 1);
    CHECK(back.contacts[0].end == 2.5);
    CHECK(back.contacts[0].depth == 55.0);
    REQUIRE(back.width_events.size() == 3);
    CHECK(back.width_events[1].width_m == 0.07);
    CHECK(rotation_angle_between(back.mount_offset.rotation, sc.mount_offset.rotation) <= 1e-12);
    CHECK(back.mount_offset.translation.x == 0.02);

    // With an identity mount every field is a pure text round trip, so the
    // serialized form is an exact fixed point of parse-then-serialize.
    SimScenario plain;
    plain.duration = 7.5;
    plain.noise_sigma_marker = 0.25;
    plain.contacts.push_back({1.0, 2.0, 8.0, 8.0, 4.0, 60.0});
    const std::string text = plain.serialize();
    CHECK(SimScenario::parse(text).serialize() == text);
}

TEST_CASE("scenario parser rejects unknown keys and bad versions") {
    CHECK(error_code_of([] { SimScenario::parse("sweep_amplitud 0.2\n"); }) ==
          "InvalidScenario");
    CHECK(error_code_of([] { SimScenario::parse("format_version 4\n"); }) ==
          "SchemaVersionMismatch");
    CHECK(error_code_of([] { SimScenario::parse("kind calibration\n"); }) == "InvalidScenario");
    CHECK(error_code_of([] { SimScenario::parse("seed -3\n"); }) == "InvalidScenario");
    CHECK(error_code_of([] { SimScenario::parse("mount_offset [1, 0, 0]\n"); }) ==
          "InvalidScenario");
    CHECK(error_code_of([] { SimScenario::parse("contact [1, 2]\n"); }) == "InvalidScenario");
    // An empty file is a valid scenario: all defaults.
    SimScenario sc = SimScenario::parse("");
    CHECK(sc.duration == 10.0);
}

TEST_CASE("generation is bit-identical for identical scenarios") {
    SimScenario sc = small_scenario();
    sc.noise_sigma_pose = 0.002;
    sc.noise_sigma_marker = 0.6;
    sc.noise_sigma_tactile = 2.0;
    sc.contacts.push_back({0.5, 1.2, 4.0, 4.0, 3.0, 60.0});
    SimResult a = generate_session(sc);
    SimResult b = generate_session(sc);
    CHECK(session_fingerprint(a.session) == session_fingerprint(b.session));

    SimScenario other = sc;
    other.seed = 2;
    SimResult c = generate_session(other);
    CHECK(session_fingerprint(a.session) != session_fingerprint(c.session));
}

TEST_CASE("per-stream record counts follow duration and rate") {
    SimScenario sc = small_scenario();  // 2 s
    sc.mocap_hz = 60.0;
    sc.video_hz = 30.0;
    sc.encoder_hz = 100.0;
    sc.tactile_hz = 10.0;
    SimResult r = generate_session(sc);
    CHECK(r.session.poses.size() == 121);
    CHECK(r.session.video.size() == 61);
    CHECK(r.session.marker.size() == 61);
    CHECK(r.session.encoder.size() == 201);
    // Left sensor: 21 samples on [0, 2]; right offset by half a period: 20.
    CHECK(r.session.tactile.size() == 41);

    // Frame indexes are consecutive from zero.
    for (size_t i = 0; i < r.session.video.size(); ++i)
        CHECK(r.session.video[i].index == i);

    // All streams strictly monotone in time.
    for (size_t i = 1; i < r.session.tactile.size(); ++i)
        CHECK(r.session.tactile[i].t > r.session.tactile[i - 1].t);

    // Disabling a stream removes its records and its header entry.
    SimScenario no_enc = sc;
    no_enc.encoder_hz = 0.0;
    no_enc.tactile_hz = 0.0;
    SimResult r2 = generate_session(no_enc);
    CHECK(r2.session.encoder.empty());
    CHECK(r2.session.tactile.empty());
    CHECK(!r2.session.has_stream(StreamKind::Encoder));
    CHECK(!r2.session.has_stream(StreamKind::Tactile));
    CHECK(r2.session.has_stream(StreamKind::Pose));
}

TEST_CASE("stream independence: changing one latency leaves other streams untouched") {
    SimScenario base = small_scenario();
    base.noise_sigma_pose = 0.001;
    base.noise_sigma_marker = 0.5;
    SimScenario shifted = base;
    shifted.latency_pose = 0.08;

    SimResult a = generate_session(base);
    SimResult b = generate_session(shifted);

    // Pose: same content, timestamps moved by exactly the latency.
    REQUIRE(a.session.poses.size() == b.session.poses.size());
    for (size_t i = 0; i < a.session.poses.size(); ++i) {
        CHECK(b.session.poses[i].t == a.session.poses[i].t + 0.08);
        CHECK(b.session.poses[i].pose.position.x == a.session.poses[i].pose.position.x);
        CHECK(b.session.poses[i].pose.orientation.w == a.session.poses[i].pose.orientation.w);
    }
    // Marker and video: byte-identical.
    REQUIRE(a.session.marker.size() == b.session.marker.size());
    for (size_t i = 0; i < a.session.marker.size(); ++i) {
        CHECK(a.session.marker[i].t == b.session.marker[i].t);
        CHECK(a.session.marker[i].u == b.session.marker[i].u);
        CHECK(a.session.marker[i].v == b.session.marker[i].v);
    }
}

TEST_CASE("marker track equals the scaled pose x/y at shared sample times") {
    SimScenario sc = small_scenario();
    sc.amplitude_y = 0.07;  // give v a nonzero signal too
    // No noise, no latency, identity mount: the 30 Hz video grid is a subset
    // of the 60 Hz mocap grid, so shared times match exactly.
    SimResult r = generate_session(sc);
    std::map<double, const PoseSample*> by_time;
    for (const PoseSample& p : r.session.poses) by_time[p.t] = &p;
    size_t checked = 0;
    for (const MarkerSample& m : r.session.marker) {
        auto it = by_time.find(m.t);
        if (it == by_time.end()) continue;
        ++checked;
        CHECK(std::fabs(m.u / sc.marker_scale - it->second->pose.position.x) <= 1e-9);
        CHECK(std::fabs(m.v / sc.marker_scale - it->second->pose.position.y) <= 1e-9);
    }
    CHECK(checked == r.session.marker.size());
}

TEST_CASE("ground truth matches the generated streams pointwise") {
    SimScenario sc = small_scenario();
    sc.encoder_hz = 50.0;
    SimResult r = generate_session(sc);
    const GroundTruth& gt = r.truth;

    // Poses without noise/mount equal the analytic tool path at their times.
    for (const PoseSample& p : r.session.poses) {
        const Pose want = gt.tool_pose(p.t);
        CHECK(std::fabs(p.pose.position.x - want.position.x) <= 1e-15);
        CHECK(std::fabs(p.pose.position.y - want.position.y) <= 1e-15);
        CHECK(std::fabs(p.pose.position.z - want.position.z) <= 1e-15);
    }
    // Encoder counts are the rounded wrapped analytic counts.
    for (const EncoderSample& e : r.session.encoder) {
        long want = std::lround(gt.encoder_count_at(e.t)) % 4096;
        if (want < 0) want += 4096;
        CHECK(e.raw == static_cast<uint16_t>(want));
    }
}

TEST_CASE("injected pose latency is recovered by the estimator") {
    SimScenario sc = SimScenario::calibration_default();
    sc.latency_pose = 0.137;
    SimResult r = generate_session(sc);

    Trajectory1D f;  // marker u, reference clock
    for (const MarkerSample& m : r.session.marker) {
        f.times.push_back(m.t);
        f.values.push_back(m.u);
    }
    Trajectory1D g = extract_axis(r.session.poses, Axis::X);
    LatencyEstimate est = estimate_latency(f, g, LatencyConfig{});
    CHECK(std::fabs(est.delta_star - 0.137) < 5e-4);
}

TEST_CASE("width profile drives the encoder across the wrap at least twice") {
    SimScenario sc;  // default 10 s open-close cycle, 0 -> 0.08 -> 0 m
    SimResult r = generate_session(sc);
    size_t wraps = 0;
    for (size_t i = 1; i < r.session.encoder.size(); ++i) {
        const double d = std::fabs(static_cast<double>(r.session.encoder[i].raw) -
                                   static_cast<double>(r.session.encoder[i - 1].raw));
        if (d > 2048.0) ++wraps;
    }
    CHECK(wraps >= 2);

    // Ground-truth widths at the width-event knots.
    GroundTruth gt(sc);
    CHECK(gt.width_at(0.0) == 0.0);
    CHECK(gt.width_at(5.0) == 0.08);
    CHECK(gt.width_at(10.0) == 0.0);
    CHECK(gt.width_at(2.5) == doctest::Approx(0.04));
    CHECK(gt.width_at(-1.0) == 0.0);   // clamped to the first knot
    CHECK(gt.width_at(11.0) == 0.0);   // clamped to the last knot
    CHECK(gt.encoder_count_at(5.0) == doctest::Approx(3900.0 + 60000.0 * 0.08));
}

TEST_CASE("contact events control in_contact and the tactile image content") {
    SimScenario sc = small_scenario();
    sc.tactile_hz = 20.0;
    sc.tactile_height = 16;
    sc.tactile_width = 16;
    sc.contacts.push_back({0.5, 1.0, 8.0, 8.0, 4.0, 80.0});
    SimResult r = generate_session(sc);
    const GroundTruth& gt = r.truth;

    CHECK(!gt.in_contact(0.4));
    CHECK(gt.in_contact(0.5));
    CHECK(gt.in_contact(0.75));
    CHECK(gt.in_contact(1.0));
    CHECK(!gt.in_contact(1.1));
    CHECK(gt.active_pixels(0.75, 0.06) > 0);
    CHECK(gt.active_pixels(0.2, 0.06) == 0);

    // Frames inside the window deviate from the base level; outside they are
    // exactly flat (no noise configured).
    for (const TactileFrame& f : r.session.tactile) {
        bool flat = true;
        for (uint8_t px : f.pixels)
            if (px != static_cast<uint8_t>(sc.tactile_base)) flat = false;
        if (f.t >= 0.5 && f.t <= 1.0)
            CHECK(!flat);
        else
            CHECK(flat);
    }
}

TEST_CASE("score_against_truth reduces hand-built errors correctly") {
    // Build a 2-frame episode with known deviations from a rotation-free,
    // width-constant truth and check every statistic by hand.
    SimScenario sc;
    sc.sweep_amplitude = 0.0;  // truth path is the origin
    sc.width_events = {{0.0, 0.05}, {10.0, 0.05}};
    GroundTruth gt(sc);

    Episode ep;
    ep.frame_times = {1.0, 2.0};
    ep.frame_index = {0, 1};
    Pose p0;
    p0.position = {0.003, -0.004, 0.0};
    p0.orientation = Quat::identity();
    Pose p1;
    p1.position = {-0.001, 0.0, 0.002};
    p1.orientation = Quat::from_axis_angle({0, 0, 1}, 0.0174532925199432957692);  // 1 degree
    ep.poses = {p0, p1};
    ep.widths = {0.053, 0.0};  // second frame has no width
    ep.width_present = {1, 0};
    ep.width_clamped = {0, 0};
    ep.tactile_left.present.assign(2, 0);
    ep.tactile_left.matched_time.assign(2, 0.0);
    ep.tactile_right.present.assign(2, 0);
    ep.tactile_right.matched_time.assign(2, 0.0);
    ep.provenance.latency_delta_s = 0.0125;

    ErrorStats st = score_against_truth(ep, gt);
    CHECK(st.frames == 2);
    CHECK(st.pos_mean_mm[0] == doctest::Approx(2.0));   // (3 + 1) / 2
    CHECK(st.pos_mean_mm[1] == doctest::Approx(2.0));   // (4 + 0) / 2
    CHECK(st.pos_mean_mm[2] == doctest::Approx(1.0));   // (0 + 2) / 2
    CHECK(st.pos_max_mm[0] == doctest::Approx(3.0));
    CHECK(st.pos_max_mm[1] == doctest::Approx(4.0));
    CHECK(st.pos_max_mm[2] == doctest::Approx(2.0));
    CHECK(st.rot_mean_deg == doctest::Approx(0.5));
    CHECK(st.rot_max_deg == doctest::Approx(1.0));
    CHECK(st.width_rms_mm == doctest::Approx(3.0));  // only the present frame
    CHECK(st.latency_residual_ms == doctest::Approx(12.5));

    Episode empty;
    ErrorStats zero = score_against_truth(empty, gt);
    CHECK(zero.frames == 0);
    CHECK(zero.pos_mean_mm[0] == 0.0);
}

TEST_CASE("generate_session validates the scenario first") {
    SimScenario bad = small_scenario();
    bad.duration = -1.0;
    CHECK(error_code_of([&] { generate_session(bad); }) == "InvalidScenario");
}

#include "demosync/simulator.hpp"

#include "demosync/error.hpp"
#include "demosync/textio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace demosync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPhaseY = std::numbers::pi / 3.0;
constexpr double kPhaseZ = 2.0 * std::numbers::pi / 3.0;

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

size_t sample_count(double duration, double hz) {
    return static_cast<size_t>(std::floor(duration * hz + 1e-9)) + 1;
}

// Signed intensity change of the contact blobs at one pixel: a bright ring
// at the contact radius minus a dark dent at the center.
double blob_delta(const SimScenario& sc, double t, int row, int col) {
    double delta = 0.0;
    for (const ContactEvent& c : sc.contacts) {
        if (t < c.start || t > c.end) continue;
        const double dx = col - c.cx;
        const double dy = row - c.cy;
        const double d = std::sqrt(dx * dx + dy * dy);
        const double s_ring = c.radius / 4.0;
        const double s_dent = c.radius / 2.0;
        delta += c.depth * (std::exp(-(d - c.radius) * (d - c.radius) / (2.0 * s_ring * s_ring)) -
                            std::exp(-d * d / (2.0 * s_dent * s_dent)));
    }
    return delta;
}

std::string seven_tuple(const RigidTransform& tf) {
    const Quat q = tf.rotation.canonicalized();
    const Vec3& t = tf.translation;
    return "[" + fmt_g17(q.w) + ", " + fmt_g17(q.x) + ", " + fmt_g17(q.y) + ", " + fmt_g17(q.z) +
           ", " + fmt_g17(t.x) + ", " + fmt_g17(t.y) + ", " + fmt_g17(t.z) + "]";
}

std::vector<double> parse_list(const std::string& value, size_t want, const std::string& what) {
    const std::vector<std::string> parts = split_bracket_list(value);
    if (parts.size() != want)
        throw Error("InvalidScenario",
                    what + " needs " + std::to_string(want) + " values, got '" + value + "'");
    std::vector<double> out;
    out.reserve(want);
    for (const std::string& p : parts) out.push_back(parse_double(p, what));
    return out;
}

}  // namespace

RandomStream::RandomStream(uint64_t seed, const std::string& substream) {
    const uint64_t h = fnv1a64(substream);
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(h), static_cast<uint32_t>(h >> 32)};
    engine_.seed(seq);
}

double RandomStream::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = kTwoPi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

SimScenario SimScenario::resolved() const {
    SimScenario sc = *this;
    if (sc.width_events.empty()) {
        sc.width_events = {{0.0, 0.0}, {sc.duration / 2.0, 0.08}, {sc.duration, 0.0}};
    }
    const double n = sc.mount_offset.rotation.norm();
    if (n > 0.0) sc.mount_offset.rotation = sc.mount_offset.rotation.normalized();
    return sc;
}

void SimScenario::validate() const {
    auto bad = [](const std::string& what) -> void { throw Error("InvalidScenario", what); };
    if (!(duration > 0.0)) bad("duration must be positive");
    if (!(mocap_hz > 0.0)) bad("mocap_hz must be positive");
    if (!(video_hz > 0.0)) bad("video_hz must be positive");
    if (encoder_hz < 0.0) bad("encoder_hz must be >= 0");
    if (tactile_hz < 0.0) bad("tactile_hz must be >= 0");
    if (sweep_amplitude < 0.0 || amplitude_y < 0.0 || amplitude_z < 0.0)
        bad("amplitudes must be >= 0");
    if (sweep_freq < 0.0) bad("sweep_freq must be >= 0");
    if (marker_scale == 0.0) bad("marker_scale must be nonzero");
    if (noise_sigma_pose < 0.0 || noise_sigma_marker < 0.0 || noise_sigma_tactile < 0.0)
        bad("noise sigmas must be >= 0");
    if (tactile_hz > 0.0) {
        if (tactile_height == 0 || tactile_width == 0)
            bad("tactile geometry must be nonzero when the stream is enabled");
        if (tactile_base < 0.0 || tactile_base > 255.0) bad("tactile_base must be in [0, 255]");
    }
    if (mount_offset.rotation.norm() <= 0.0) bad("mount_offset rotation must be nonzero");
    for (const ContactEvent& c : contacts) {
        if (!(c.end > c.start)) bad("contact events need end > start");
        if (!(c.radius > 0.0)) bad("contact radius must be positive");
        if (!std::isfinite(c.depth)) bad("contact depth must be finite");
    }
    for (size_t i = 0; i < width_events.size(); ++i) {
        if (width_events[i].width_m < 0.0 || width_events[i].width_m > 0.2)
            bad("width events must stay in [0, 0.2] m");
        if (i && !(width_events[i].t > width_events[i - 1].t))
            bad("width event times must be strictly increasing");
    }
    if (calibration_sweep && duration * sweep_freq < 5.0)
        bad("a calibration sweep must cover at least five sweep periods");
}

std::string SimScenario::serialize() const {
    const SimScenario sc = resolved();
    KvFile kv;
    kv.add("format_version", "1");
    kv.add("kind", "scenario");
    kv.add("seed", std::to_string(sc.seed));
    kv.add("session_id", sc.session_id);
    kv.add("duration", fmt_g17(sc.duration));
    kv.add("mocap_hz", fmt_g17(sc.mocap_hz));
    kv.add("video_hz", fmt_g17(sc.video_hz));
    kv.add("encoder_hz", fmt_g17(sc.encoder_hz));
    kv.add("tactile_hz", fmt_g17(sc.tactile_hz));
    kv.add("sweep_amplitude", fmt_g17(sc.sweep_amplitude));
    kv.add("sweep_freq", fmt_g17(sc.sweep_freq));
    kv.add("amplitude_y", fmt_g17(sc.amplitude_y));
    kv.add("amplitude_z", fmt_g17(sc.amplitude_z));
    kv.add("rot_amplitude_deg", fmt_g17(sc.rot_amplitude_deg));
    kv.add("latency_pose", fmt_g17(sc.latency_pose));
    kv.add("latency_marker", fmt_g17(sc.latency_marker));
    kv.add("latency_encoder", fmt_g17(sc.latency_encoder));
    kv.add("latency_tactile", fmt_g17(sc.latency_tactile));
    kv.add("mount_offset", seven_tuple(sc.mount_offset));
    kv.add("noise_sigma_pose", fmt_g17(sc.noise_sigma_pose));
    kv.add("noise_sigma_marker", fmt_g17(sc.noise_sigma_marker));
    kv.add("noise_sigma_tactile", fmt_g17(sc.noise_sigma_tactile));
    kv.add("marker_scale", fmt_g17(sc.marker_scale));
    kv.add_long("tactile_height", sc.tactile_height);
    kv.add_long("tactile_width", sc.tactile_width);
    kv.add("tactile_base", fmt_g17(sc.tactile_base));
    kv.add_long("calibration_sweep", sc.calibration_sweep ? 1 : 0);
    for (const ContactEvent& c : sc.contacts)
        kv.add("contact", "[" + fmt_g17(c.start) + ", " + fmt_g17(c.end) + ", " + fmt_g17(c.cx) +
                              ", " + fmt_g17(c.cy) + ", " + fmt_g17(c.radius) + ", " +
                              fmt_g17(c.depth) + "]");
    for (const WidthEvent& w : sc.width_events)
        kv.add("width_event", "[" + fmt_g17(w.t) + ", " + fmt_g17(w.width_m) + "]");
    return kv.serialize();
}

SimScenario SimScenario::parse(const std::string& text) {
    const KvFile kv = KvFile::parse(text);
    static const std::set<std::string> known = {
        "format_version", "kind", "seed", "session_id", "duration", "mocap_hz", "video_hz",
        "encoder_hz", "tactile_hz", "sweep_amplitude", "sweep_freq", "amplitude_y", "amplitude_z",
        "rot_amplitude_deg", "latency_pose", "latency_marker", "latency_encoder",
        "latency_tactile", "mount_offset", "noise_sigma_pose", "noise_sigma_marker",
        "noise_sigma_tactile", "marker_scale", "tactile_height", "tactile_width", "tactile_base",
        "calibration_sweep", "contact", "width_event"};
    for (const auto& [key, value] : kv.entries)
        if (!known.count(key)) throw Error("InvalidScenario", "unknown scenario key '" + key + "'");
    if (kv.has("format_version") && kv.get("format_version", "ParseError") != "1")
        throw Error("SchemaVersionMismatch", "unsupported scenario format_version");
    if (kv.has("kind") && kv.get("kind", "ParseError") != "scenario")
        throw Error("InvalidScenario", "file kind is not 'scenario'");

    SimScenario sc;
    if (kv.has("seed")) {
        const long v = parse_long(kv.get("seed", "ParseError"), "seed");
        if (v < 0) throw Error("InvalidScenario", "seed must be >= 0");
        sc.seed = static_cast<uint64_t>(v);
    }
    sc.session_id = kv.get_or("session_id", sc.session_id);
    sc.duration = kv.get_double_or("duration", sc.duration);
    sc.mocap_hz = kv.get_double_or("mocap_hz", sc.mocap_hz);
    sc.video_hz = kv.get_double_or("video_hz", sc.video_hz);
    sc.encoder_hz = kv.get_double_or("encoder_hz", sc.encoder_hz);
    sc.tactile_hz = kv.get_double_or("tactile_hz", sc.tactile_hz);
    sc.sweep_amplitude = kv.get_double_or("sweep_amplitude", sc.sweep_amplitude);
    sc.sweep_freq = kv.get_double_or("sweep_freq", sc.sweep_freq);
    sc.amplitude_y = kv.get_double_or("amplitude_y", sc.amplitude_y);
    sc.amplitude_z = kv.get_double_or("amplitude_z", sc.amplitude_z);
    sc.rot_amplitude_deg = kv.get_double_or("rot_amplitude_deg", sc.rot_amplitude_deg);
    sc.latency_pose = kv.get_double_or("latency_pose", sc.latency_pose);
    sc.latency_marker = kv.get_double_or("latency_marker", sc.latency_marker);
    sc.latency_encoder = kv.get_double_or("latency_encoder", sc.latency_encoder);
    sc.latency_tactile = kv.get_double_or("latency_tactile", sc.latency_tactile);
    if (kv.has("mount_offset")) {
        const std::vector<double> v =
            parse_list(kv.get("mount_offset", "ParseError"), 7, "mount_offset");
        sc.mount_offset.rotation = Quat{v[0], v[1], v[2], v[3]};
        sc.mount_offset.translation = {v[4], v[5], v[6]};
    }
    sc.noise_sigma_pose = kv.get_double_or("noise_sigma_pose", sc.noise_sigma_pose);
    sc.noise_sigma_marker = kv.get_double_or("noise_sigma_marker", sc.noise_sigma_marker);
    sc.noise_sigma_tactile = kv.get_double_or("noise_sigma_tactile", sc.noise_sigma_tactile);
    sc.marker_scale = kv.get_double_or("marker_scale", sc.marker_scale);
    const long th = kv.get_long_or("tactile_height", sc.tactile_height);
    const long tw = kv.get_long_or("tactile_width", sc.tactile_width);
    if (th < 0 || th > 0xffff || tw < 0 || tw > 0xffff)
        throw Error("InvalidScenario", "tactile geometry out of range");
    sc.tactile_height = static_cast<uint16_t>(th);
    sc.tactile_width = static_cast<uint16_t>(tw);
    sc.tactile_base = kv.get_double_or("tactile_base", sc.tactile_base);
    sc.calibration_sweep = kv.get_long_or("calibration_sweep", 0) != 0;
    for (const std::string& row : kv.get_all("contact")) {
        const std::vector<double> v = parse_list(row, 6, "contact");
        sc.contacts.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
    }
    for (const std::string& row : kv.get_all("width_event")) {
        const std::vector<double> v = parse_list(row, 2, "width_event");
        sc.width_events.push_back({v[0], v[1]});
    }
    return sc;
}

SimScenario SimScenario::load(const std::string& path) {
    return parse(read_file_bytes(path));
}

SimScenario SimScenario::calibration_default() {
    SimScenario sc;
    sc.calibration_sweep = true;
    sc.encoder_hz = 0.0;  // a sweep only exercises the pose and marker streams
    sc.tactile_hz = 0.0;
    return sc;
}

GroundTruth::GroundTruth(SimScenario sc) : sc_(sc.resolved()) {}

Pose GroundTruth::tool_pose(double t) const {
    const double w = kTwoPi * sc_.sweep_freq;
    Pose p;
    p.position = {sc_.sweep_amplitude * std::sin(w * t), sc_.amplitude_y * std::sin(w * t + kPhaseY),
                  sc_.amplitude_z * std::sin(w * t + kPhaseZ)};
    const double yaw = sc_.rot_amplitude_deg * (std::numbers::pi / 180.0) * std::sin(w * t);
    p.orientation = (yaw == 0.0) ? Quat::identity() : Quat::from_axis_angle({0.0, 0.0, 1.0}, yaw);
    return p;
}

double GroundTruth::width_at(double t) const {
    const std::vector<WidthEvent>& ev = sc_.width_events;
    if (t <= ev.front().t) return ev.front().width_m;
    if (t >= ev.back().t) return ev.back().width_m;
    size_t hi = 1;
    while (ev[hi].t < t) ++hi;
    const WidthEvent& a = ev[hi - 1];
    const WidthEvent& b = ev[hi];
    const double u = (t - a.t) / (b.t - a.t);
    return a.width_m + u * (b.width_m - a.width_m);
}

double GroundTruth::encoder_count_at(double t) const {
    return kSimEncoderBase + kSimEncoderSlope * width_at(t);
}

bool GroundTruth::in_contact(double t) const {
    for (const ContactEvent& c : sc_.contacts)
        if (t >= c.start && t <= c.end) return true;
    return false;
}

size_t GroundTruth::active_pixels(double t, double tau) const {
    if (!in_contact(t)) return 0;
    size_t count = 0;
    for (int r = 0; r < sc_.tactile_height; ++r)
        for (int c = 0; c < sc_.tactile_width; ++c)
            if (std::fabs(blob_delta(sc_, t, r, c)) / 255.0 > tau) ++count;
    return count;
}

double GroundTruth::latency_of(StreamKind kind) const {
    switch (kind) {
        case StreamKind::Pose: return sc_.latency_pose;
        case StreamKind::Marker: return sc_.latency_marker;
        case StreamKind::Encoder: return sc_.latency_encoder;
        case StreamKind::Tactile: return sc_.latency_tactile;
        case StreamKind::VideoMeta: return 0.0;
    }
    return 0.0;
}

SimResult generate_session(const SimScenario& raw) {
    SimScenario sc = raw.resolved();
    sc.validate();
    GroundTruth truth(sc);

    RawSession s;
    s.header.session_id = sc.session_id;
    s.header.tactile_height = sc.tactile_height;
    s.header.tactile_width = sc.tactile_width;
    s.header.streams = {StreamKind::Pose, StreamKind::VideoMeta, StreamKind::Marker};
    if (sc.encoder_hz > 0.0) s.header.streams.insert(s.header.streams.begin() + 1, StreamKind::Encoder);
    if (sc.tactile_hz > 0.0) {
        auto it = std::find(s.header.streams.begin(), s.header.streams.end(), StreamKind::VideoMeta);
        s.header.streams.insert(it, StreamKind::Tactile);
    }

    {
        RandomStream rng(sc.seed, "pose");
        const size_t n = sample_count(sc.duration, sc.mocap_hz);
        s.poses.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / sc.mocap_hz;
            const Pose tool = truth.tool_pose(t);
            Pose p = transform_to_pose(compose(pose_to_transform(tool), sc.mount_offset));
            p.position.x += sc.noise_sigma_pose * rng.normal();
            p.position.y += sc.noise_sigma_pose * rng.normal();
            p.position.z += sc.noise_sigma_pose * rng.normal();
            s.poses.push_back({t + sc.latency_pose, p});
        }
    }

    {
        RandomStream rng(sc.seed, "marker");
        const size_t n = sample_count(sc.duration, sc.video_hz);
        s.video.reserve(n);
        s.marker.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / sc.video_hz;
            s.video.push_back({t, static_cast<uint32_t>(i)});
            const Pose tool = truth.tool_pose(t);
            const double u = sc.marker_scale * tool.position.x + sc.noise_sigma_marker * rng.normal();
            const double v = sc.marker_scale * tool.position.y + sc.noise_sigma_marker * rng.normal();
            s.marker.push_back({t + sc.latency_marker, u, v});
        }
    }

    if (sc.encoder_hz > 0.0) {
        const size_t n = sample_count(sc.duration, sc.encoder_hz);
        s.encoder.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / sc.encoder_hz;
            long c = std::lround(truth.encoder_count_at(t)) % kEncoderCountsPerRev;
            if (c < 0) c += kEncoderCountsPerRev;
            s.encoder.push_back({t + sc.latency_encoder, static_cast<uint16_t>(c)});
        }
    }

    if (sc.tactile_hz > 0.0) {
        RandomStream rng_left(sc.seed, "tactile/left");
        RandomStream rng_right(sc.seed, "tactile/right");
        const double period = 1.0 / sc.tactile_hz;
        const size_t px = static_cast<size_t>(sc.tactile_height) * sc.tactile_width;
        auto make_frame = [&](double t, TactileSide side, RandomStream& rng) {
            TactileFrame f;
            f.t = t + sc.latency_tactile;
            f.sensor_id = side;
            f.height = sc.tactile_height;
            f.width = sc.tactile_width;
            f.pixels.resize(px);
            size_t k = 0;
            for (int r = 0; r < sc.tactile_height; ++r) {
                for (int c = 0; c < sc.tactile_width; ++c, ++k) {
                    const double v = sc.tactile_base + blob_delta(sc, t, r, c) +
                                     sc.noise_sigma_tactile * rng.normal();
                    f.pixels[k] = static_cast<uint8_t>(
                        std::lround(std::clamp(v, 0.0, 255.0)));
                }
            }
            return f;
        };
        // The right sensor samples half a period after the left so the shared
        // stream keeps strictly increasing timestamps.
        for (size_t i = 0;; ++i) {
            const double tl = static_cast<double>(i) * period;
            if (tl > sc.duration + 1e-9) break;
            s.tactile.push_back(make_frame(tl, TactileSide::Left, rng_left));
            const double tr = tl + period / 2.0;
            if (tr <= sc.duration + 1e-9)
                s.tactile.push_back(make_frame(tr, TactileSide::Right, rng_right));
        }
    }

    return {std::move(s), truth};
}

ErrorStats score_against_truth(const Episode& ep, const GroundTruth& gt) {
    ErrorStats st;
    st.frames = ep.frame_count();
    if (st.frames == 0) return st;

    std::array<double, 3> pos_sum{0.0, 0.0, 0.0};
    double rot_sum = 0.0, width_sq = 0.0;
    size_t width_n = 0;
    for (size_t i = 0; i < st.frames; ++i) {
        const double t = ep.frame_times[i];
        const Pose truth = gt.tool_pose(t);
        const Vec3 d = ep.poses[i].position - truth.position;
        const double abs_axis[3] = {std::fabs(d.x), std::fabs(d.y), std::fabs(d.z)};
        for (int a = 0; a < 3; ++a) {
            pos_sum[a] += abs_axis[a];
            st.pos_max_mm[a] = std::max(st.pos_max_mm[a], abs_axis[a] * 1000.0);
        }
        const double ang =
            rotation_angle_between(ep.poses[i].orientation, truth.orientation) *
            (180.0 / std::numbers::pi);
        rot_sum += ang;
        st.rot_max_deg = std::max(st.rot_max_deg, ang);
        if (ep.width_present[i]) {
            const double dw = ep.widths[i] - gt.width_at(t);
            width_sq += dw * dw;
            ++width_n;
        }
    }
    for (int a = 0; a < 3; ++a)
        st.pos_mean_mm[a] = pos_sum[a] / static_cast<double>(st.frames) * 1000.0;
    st.rot_mean_deg = rot_sum / static_cast<double>(st.frames);
    st.width_rms_mm = width_n ? std::sqrt(width_sq / static_cast<double>(width_n)) * 1000.0 : 0.0;
    st.latency_residual_ms =
        std::fabs(ep.provenance.latency_delta_s - gt.scenario().latency_pose) * 1000.0;
    return st;
}

}  // namespace demosync

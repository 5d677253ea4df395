#include "demosync/episode.hpp"

#include "demosync/error.hpp"
#include "demosync/protocol.hpp"
#include "demosync/textio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>

namespace fs = std::filesystem;

namespace demosync {

void PipelineConfig::validate() const {
    if (!(tactile_tau > 0.0 && tactile_tau < 1.0))
        throw Error("InvalidConfig", "tactile_tau must be in (0, 1)");
    if (!(tactile_hold_tolerance > 0.0))
        throw Error("InvalidConfig", "tactile_hold_tolerance must be positive");
    if (!(active_pixel_threshold >= 0.0 && active_pixel_threshold <= 1.0))
        throw Error("InvalidConfig", "active_pixel_threshold must be in [0, 1]");
}

namespace {

// Resamples one sensor onto the frame grid by holding the most recent frame
// within tolerance. The first kMinReferenceFrames frames of the session are
// taken as the no-contact lead-in for the reference image.
TactileTrack build_tactile_track(const std::vector<TactileFrame>& frames,
                                 const std::vector<Timestamp>& frame_times,
                                 const PipelineConfig& cfg, const char* side_name,
                                 BuildReport& report) {
    TactileTrack track;
    const size_t n = frame_times.size();
    track.present.assign(n, 0);
    track.matched_time.assign(n, 0.0);
    if (frames.empty()) return track;
    if (frames.size() < static_cast<size_t>(kMinReferenceFrames)) {
        report.warnings.push_back(std::string(side_name) +
                                  " tactile: too few frames for a reference image, side skipped");
        return track;
    }
    const std::vector<TactileFrame> lead(frames.begin(), frames.begin() + kMinReferenceFrames);
    const ReferenceFrame ref = build_reference(lead);
    track.enabled = true;
    track.height = frames.front().height;
    track.width = frames.front().width;
    const size_t px = static_cast<size_t>(track.height) * track.width;
    track.raw.assign(n * px, 0);
    track.gray.assign(n * px, 0);
    track.convex.assign(n * px, 0);
    track.concave.assign(n * px, 0);

    size_t j = 0;
    ProcessedTactile processed;
    size_t processed_for = static_cast<size_t>(-1);
    for (size_t i = 0; i < n; ++i) {
        const double t = frame_times[i];
        while (j + 1 < frames.size() && frames[j + 1].t <= t) ++j;
        if (frames[j].t > t || t - frames[j].t > cfg.tactile_hold_tolerance) continue;
        if (processed_for != j) {
            processed = process_frame(frames[j], ref, cfg.tactile_tau);
            processed_for = j;
        }
        track.present[i] = 1;
        track.matched_time[i] = frames[j].t;
        std::copy(frames[j].pixels.begin(), frames[j].pixels.end(), track.raw.begin() + i * px);
        for (size_t k = 0; k < px; ++k) {
            track.gray[i * px + k] = to_fixed_u16(processed.gray[k]);
            track.convex[i * px + k] = to_fixed_u16(processed.convex[k]);
            track.concave[i * px + k] = to_fixed_u16(processed.concave[k]);
        }
    }
    return track;
}

}  // namespace

Episode build_episode(const RawSession& session, const PipelineConfig& cfg, BuildReport* report) {
    cfg.validate();
    BuildReport local_report;
    BuildReport& rep = report ? *report : local_report;

    if (session.poses.empty()) throw Error("MissingStream", "session has no POSE samples");
    if (session.video.empty()) throw Error("MissingStream", "session has no VIDEO_META records");

    // Put the pose stream on the video/hub clock, then fold in the one-time
    // mount correction.
    std::vector<PoseSample> track = apply_latency(session.poses, -cfg.latency.delta_star);
    for (PoseSample& s : track) s.pose = apply_correction(cfg.controller_cal, s.pose);

    rep.video_frames_in = session.video.size();
    Episode ep;
    const double pose_t0 = track.front().t;
    const double pose_t1 = track.back().t;
    for (const VideoFrameMeta& v : session.video) {
        if (v.t < pose_t0 || v.t > pose_t1) {
            ++rep.frames_dropped;
            continue;
        }
        ep.frame_times.push_back(v.t);
        ep.frame_index.push_back(v.index);
    }
    if (ep.frame_times.empty())
        throw Error("EmptySpan", "no video frame falls inside the pose span [" +
                                     fmt_g17(pose_t0) + ", " + fmt_g17(pose_t1) + "]");

    const size_t n = ep.frame_times.size();
    ep.poses.reserve(n);
    for (double t : ep.frame_times) {
        Pose p = interp_pose(track, t);
        p.orientation = p.orientation.canonicalized();
        ep.poses.push_back(p);
    }

    ep.widths.assign(n, 0.0);
    ep.width_present.assign(n, 0);
    ep.width_clamped.assign(n, 0);
    if (session.encoder.empty() || !cfg.gripper_cal) {
        rep.warnings.push_back(session.encoder.empty()
                                   ? "encoder stream absent; widths marked absent"
                                   : "no gripper map supplied; widths marked absent");
    } else {
        std::vector<EncoderReading> readings;
        readings.reserve(session.encoder.size());
        for (const EncoderSample& s : session.encoder) readings.push_back({s.raw});
        const std::vector<double> counts = unwrap_counts(readings);
        Trajectory1D count_traj, width_traj;
        count_traj.times.reserve(counts.size());
        count_traj.values.reserve(counts.size());
        for (size_t i = 0; i < counts.size(); ++i) {
            count_traj.times.push_back(session.encoder[i].t);
            count_traj.values.push_back(counts[i]);
        }
        count_traj.validate();
        width_traj.times = count_traj.times;
        width_traj.values.reserve(counts.size());
        for (double c : counts) width_traj.values.push_back(cfg.gripper_cal->width_at(c));
        for (size_t i = 0; i < n; ++i) {
            const double t = ep.frame_times[i];
            if (t < count_traj.times.front() || t > count_traj.times.back()) continue;
            ep.widths[i] = interp_linear(width_traj, t);
            ep.width_present[i] = 1;
            if (!cfg.gripper_cal->in_range(interp_linear(count_traj, t))) ep.width_clamped[i] = 1;
        }
    }

    std::vector<TactileFrame> left, right;
    for (const TactileFrame& f : session.tactile)
        (f.sensor_id == TactileSide::Left ? left : right).push_back(f);
    ep.tactile_left = build_tactile_track(left, ep.frame_times, cfg, "left", rep);
    ep.tactile_right = build_tactile_track(right, ep.frame_times, cfg, "right", rep);
    if (session.tactile.empty()) rep.warnings.push_back("tactile stream absent");

    ep.provenance.session_id = session.header.session_id;
    ep.provenance.latency_delta_s = cfg.latency.delta_star;
    ep.provenance.tactile_tau = cfg.tactile_tau;
    ep.provenance.tactile_hold_tolerance_s = cfg.tactile_hold_tolerance;
    if (cfg.gripper_cal) {
        ep.provenance.has_gripper_cal = true;
        ep.provenance.gripper_cal_digest = cfg.gripper_cal->content_digest();
    }
    ep.provenance.controller_cal_digest = cfg.controller_cal.content_digest();
    return ep;
}

namespace {

constexpr const char* kManifestName = "manifest.txt";

struct ArrayBlob {
    std::string name;
    std::string dtype;
    std::vector<size_t> shape;
    std::string bytes;
};

std::string shape_str(const std::vector<size_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

size_t dtype_size(const std::string& dtype) {
    if (dtype == "u8") return 1;
    if (dtype == "u16") return 2;
    if (dtype == "u32") return 4;
    if (dtype == "f64") return 8;
    throw Error("ParseError", "unknown dtype '" + dtype + "'");
}

std::string pack_f64(const std::vector<double>& v) {
    std::vector<uint8_t> out;
    out.reserve(v.size() * 8);
    for (double x : v) put_f64le(out, x);
    return std::string(out.begin(), out.end());
}

std::string pack_u32(const std::vector<uint32_t>& v) {
    std::vector<uint8_t> out;
    out.reserve(v.size() * 4);
    for (uint32_t x : v) put_u32le(out, x);
    return std::string(out.begin(), out.end());
}

std::string pack_u16(const std::vector<uint16_t>& v) {
    std::vector<uint8_t> out;
    out.reserve(v.size() * 2);
    for (uint16_t x : v) put_u16le(out, x);
    return std::string(out.begin(), out.end());
}

std::string pack_u8(const std::vector<uint8_t>& v) {
    return std::string(v.begin(), v.end());
}

std::vector<double> unpack_f64(const std::string& b) {
    std::vector<double> v(b.size() / 8);
    for (size_t i = 0; i < v.size(); ++i)
        v[i] = get_f64le(reinterpret_cast<const uint8_t*>(b.data()) + i * 8);
    return v;
}

std::vector<uint32_t> unpack_u32(const std::string& b) {
    std::vector<uint32_t> v(b.size() / 4);
    for (size_t i = 0; i < v.size(); ++i)
        v[i] = get_u32le(reinterpret_cast<const uint8_t*>(b.data()) + i * 4);
    return v;
}

std::vector<uint16_t> unpack_u16(const std::string& b) {
    std::vector<uint16_t> v(b.size() / 2);
    for (size_t i = 0; i < v.size(); ++i)
        v[i] = get_u16le(reinterpret_cast<const uint8_t*>(b.data()) + i * 2);
    return v;
}

std::vector<uint8_t> unpack_u8(const std::string& b) {
    return std::vector<uint8_t>(b.begin(), b.end());
}

uint32_t parse_hex32(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(s.c_str(), &end, 16);
    if (s.empty() || end != s.c_str() + s.size() || v > 0xffffffffUL)
        throw Error("ChecksumMismatch", what + ": bad checksum field '" + s + "'");
    return static_cast<uint32_t>(v);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t') {
            if (!cur.empty()) parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
}

void add_side_meta(KvFile& kv, const char* side, const TactileTrack& t) {
    const std::string p = std::string("tactile_") + side + "_";
    kv.add_long(p + "enabled", t.enabled ? 1 : 0);
    kv.add_long(p + "height", t.height);
    kv.add_long(p + "width", t.width);
}

void collect_side(std::vector<ArrayBlob>& arrays, const char* side, const TactileTrack& t,
                  size_t n) {
    const std::string p = std::string("tactile_") + side + "_";
    const size_t px = static_cast<size_t>(t.height) * t.width;
    if (t.present.size() != n || t.matched_time.size() != n || t.raw.size() != n * px ||
        t.gray.size() != n * px || t.convex.size() != n * px || t.concave.size() != n * px)
        throw Error("ShapeMismatch", p + "* arrays do not match the frame count");
    arrays.push_back({p + "present", "u8", {n}, pack_u8(t.present)});
    arrays.push_back({p + "time", "f64", {n}, pack_f64(t.matched_time)});
    arrays.push_back({p + "raw", "u8", {n, t.height, t.width}, pack_u8(t.raw)});
    arrays.push_back({p + "gray", "u16", {n, t.height, t.width}, pack_u16(t.gray)});
    arrays.push_back({p + "convex", "u16", {n, t.height, t.width}, pack_u16(t.convex)});
    arrays.push_back({p + "concave", "u16", {n, t.height, t.width}, pack_u16(t.concave)});
}

}  // namespace

void write_episode(const Episode& ep, const std::string& dir) {
    const size_t n = ep.frame_count();
    if (ep.frame_index.size() != n || ep.poses.size() != n || ep.widths.size() != n ||
        ep.width_present.size() != n || ep.width_clamped.size() != n)
        throw Error("ShapeMismatch", "episode arrays do not match the frame count");

    std::vector<double> pose_rows;
    pose_rows.reserve(n * 7);
    for (const Pose& p : ep.poses) {
        pose_rows.push_back(p.orientation.w);
        pose_rows.push_back(p.orientation.x);
        pose_rows.push_back(p.orientation.y);
        pose_rows.push_back(p.orientation.z);
        pose_rows.push_back(p.position.x);
        pose_rows.push_back(p.position.y);
        pose_rows.push_back(p.position.z);
    }

    std::vector<ArrayBlob> arrays;
    arrays.push_back({"frame_times", "f64", {n}, pack_f64(ep.frame_times)});
    arrays.push_back({"frame_index", "u32", {n}, pack_u32(ep.frame_index)});
    arrays.push_back({"poses", "f64", {n, 7}, pack_f64(pose_rows)});
    arrays.push_back({"widths", "f64", {n}, pack_f64(ep.widths)});
    arrays.push_back({"width_present", "u8", {n}, pack_u8(ep.width_present)});
    arrays.push_back({"width_clamped", "u8", {n}, pack_u8(ep.width_clamped)});
    collect_side(arrays, "left", ep.tactile_left, n);
    collect_side(arrays, "right", ep.tactile_right, n);

    KvFile kv;
    kv.add("format_version", "1");
    kv.add("kind", "episode");
    kv.add("session_id", ep.provenance.session_id.empty() ? "-" : ep.provenance.session_id);
    kv.add_long("frame_count", static_cast<long>(n));
    kv.add("latency_delta_s", fmt_g17(ep.provenance.latency_delta_s));
    kv.add("tactile_tau", fmt_g17(ep.provenance.tactile_tau));
    kv.add("tactile_hold_tolerance_s", fmt_g17(ep.provenance.tactile_hold_tolerance_s));
    kv.add("gripper_cal_digest",
           ep.provenance.has_gripper_cal ? fmt_hex32(ep.provenance.gripper_cal_digest) : "-");
    kv.add("controller_cal_digest", fmt_hex32(ep.provenance.controller_cal_digest));
    add_side_meta(kv, "left", ep.tactile_left);
    add_side_meta(kv, "right", ep.tactile_right);
    for (const ArrayBlob& a : arrays)
        kv.add("array", a.name + " " + a.dtype + " " + shape_str(a.shape) + " " +
                            fmt_hex32(crc32_of(a.bytes)) + " " + a.name + ".bin");

    std::string manifest = kv.serialize();
    manifest += "manifest_crc32 " + fmt_hex32(crc32_of(manifest)) + "\n";

    fs::create_directories(dir);
    for (const ArrayBlob& a : arrays)
        write_file_bytes((fs::path(dir) / (a.name + ".bin")).string(), a.bytes);
    write_file_bytes((fs::path(dir) / kManifestName).string(), manifest);
}

Episode read_episode(const std::string& dir) {
    const std::string text = read_file_bytes((fs::path(dir) / kManifestName).string());

    // The self-checksum line comes last; verify it before trusting anything
    // else in the manifest.
    const size_t pos = text.rfind("\nmanifest_crc32 ");
    if (pos == std::string::npos)
        throw Error("ChecksumMismatch", "manifest: self-checksum line missing or damaged");
    const std::string body = text.substr(0, pos + 1);
    std::string tail = text.substr(pos + 1);
    while (!tail.empty() && (tail.back() == '\n' || tail.back() == '\r')) tail.pop_back();
    const std::vector<std::string> tail_parts = split_ws(tail);
    if (tail_parts.size() != 2)
        throw Error("ChecksumMismatch", "manifest: self-checksum line missing or damaged");
    const uint32_t want = parse_hex32(tail_parts[1], "manifest");
    const uint32_t got = crc32_of(body);
    if (got != want)
        throw Error("ChecksumMismatch", "manifest: stored " + fmt_hex32(want) + ", computed " +
                                            fmt_hex32(got));

    const KvFile kv = KvFile::parse(body);
    if (kv.get("format_version", "ParseError") != "1")
        throw Error("SchemaVersionMismatch", "unsupported episode format_version");
    if (kv.get("kind", "ParseError") != "episode")
        throw Error("SchemaVersionMismatch", "container kind is not 'episode'");

    Episode ep;
    const std::string sid = kv.get("session_id", "ParseError");
    ep.provenance.session_id = (sid == "-") ? "" : sid;
    ep.provenance.latency_delta_s = kv.get_double("latency_delta_s", "ParseError");
    ep.provenance.tactile_tau = kv.get_double("tactile_tau", "ParseError");
    ep.provenance.tactile_hold_tolerance_s = kv.get_double("tactile_hold_tolerance_s", "ParseError");
    const std::string gdig = kv.get("gripper_cal_digest", "ParseError");
    if (gdig != "-") {
        ep.provenance.has_gripper_cal = true;
        ep.provenance.gripper_cal_digest = parse_hex32(gdig, "gripper_cal_digest");
    }
    ep.provenance.controller_cal_digest =
        parse_hex32(kv.get("controller_cal_digest", "ParseError"), "controller_cal_digest");

    const size_t n = static_cast<size_t>(kv.get_long_or("frame_count", -1));
    if (static_cast<long>(n) < 0) throw Error("ParseError", "manifest missing frame_count");

    std::map<std::string, ArrayBlob> blobs;
    for (const std::string& row : kv.get_all("array")) {
        const std::vector<std::string> parts = split_ws(row);
        if (parts.size() != 5)
            throw Error("ParseError", "bad array row '" + row + "'");
        ArrayBlob a;
        a.name = parts[0];
        a.dtype = parts[1];
        size_t elems = 1;
        for (const std::string& d : split_bracket_list(parts[2])) {
            const long v = parse_long(d, "array shape");
            if (v < 0) throw Error("ParseError", "negative array dimension in '" + row + "'");
            a.shape.push_back(static_cast<size_t>(v));
            elems *= static_cast<size_t>(v);
        }
        const uint32_t want_crc = parse_hex32(parts[3], "array '" + a.name + "'");
        a.bytes = read_file_bytes((fs::path(dir) / parts[4]).string());
        if (a.bytes.size() != elems * dtype_size(a.dtype))
            throw Error("ChecksumMismatch",
                        "array '" + a.name + "': file size does not match its declared shape");
        const uint32_t got_crc = crc32_of(a.bytes);
        if (got_crc != want_crc)
            throw Error("ChecksumMismatch", "array '" + a.name + "': stored " +
                                                fmt_hex32(want_crc) + ", computed " +
                                                fmt_hex32(got_crc));
        blobs[a.name] = std::move(a);
    }

    auto fetch = [&](const std::string& name, const std::string& dtype) -> const ArrayBlob& {
        auto it = blobs.find(name);
        if (it == blobs.end())
            throw Error("ParseError", "manifest missing array '" + name + "'");
        if (it->second.dtype != dtype)
            throw Error("ParseError", "array '" + name + "' has dtype " + it->second.dtype +
                                          ", expected " + dtype);
        return it->second;
    };

    ep.frame_times = unpack_f64(fetch("frame_times", "f64").bytes);
    ep.frame_index = unpack_u32(fetch("frame_index", "u32").bytes);
    const std::vector<double> pose_rows = unpack_f64(fetch("poses", "f64").bytes);
    if (ep.frame_times.size() != n || ep.frame_index.size() != n || pose_rows.size() != n * 7)
        throw Error("ParseError", "array lengths disagree with frame_count");
    ep.poses.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Pose p;
        p.orientation = {pose_rows[i * 7 + 0], pose_rows[i * 7 + 1], pose_rows[i * 7 + 2],
                         pose_rows[i * 7 + 3]};
        p.position = {pose_rows[i * 7 + 4], pose_rows[i * 7 + 5], pose_rows[i * 7 + 6]};
        ep.poses.push_back(p);
    }
    ep.widths = unpack_f64(fetch("widths", "f64").bytes);
    ep.width_present = unpack_u8(fetch("width_present", "u8").bytes);
    ep.width_clamped = unpack_u8(fetch("width_clamped", "u8").bytes);

    for (const char* side : {"left", "right"}) {
        TactileTrack& t = (std::string(side) == "left") ? ep.tactile_left : ep.tactile_right;
        const std::string p = std::string("tactile_") + side + "_";
        t.enabled = kv.get_long_or(p + "enabled", 0) != 0;
        t.height = static_cast<uint16_t>(kv.get_long_or(p + "height", 0));
        t.width = static_cast<uint16_t>(kv.get_long_or(p + "width", 0));
        t.present = unpack_u8(fetch(p + "present", "u8").bytes);
        t.matched_time = unpack_f64(fetch(p + "time", "f64").bytes);
        t.raw = unpack_u8(fetch(p + "raw", "u8").bytes);
        t.gray = unpack_u16(fetch(p + "gray", "u16").bytes);
        t.convex = unpack_u16(fetch(p + "convex", "u16").bytes);
        t.concave = unpack_u16(fetch(p + "concave", "u16").bytes);
    }
    return ep;
}

UsabilityStats usability_report(const std::vector<RawSession>& sessions,
                                const std::vector<PipelineConfig>& cfgs) {
    if (sessions.empty())
        throw Error("InvalidConfig", "usability report needs at least one session");
    if (cfgs.size() != 1 && cfgs.size() != sessions.size())
        throw Error("InvalidConfig", "config list must have one entry or one per session");

    UsabilityStats stats;
    size_t usable = 0;
    for (size_t i = 0; i < sessions.size(); ++i) {
        const PipelineConfig& cfg = (cfgs.size() == 1) ? cfgs[0] : cfgs[i];
        SessionUsability row;
        row.session_id = sessions[i].header.session_id;
        BuildReport rep;
        try {
            const Episode ep = build_episode(sessions[i], cfg, &rep);
            row.usable = true;
            row.reason = "ok";
            row.frames_emitted = ep.frame_count();
            row.frames_dropped = rep.frames_dropped;
            row.active_tactile_fraction = episode_active_fraction(ep, cfg.active_pixel_threshold);
            ++usable;
        } catch (const Error& e) {
            row.usable = false;
            row.reason = e.what();
            row.frames_dropped = rep.frames_dropped;
        }
        stats.sessions.push_back(std::move(row));
    }
    stats.usable_fraction = static_cast<double>(usable) / sessions.size();
    return stats;
}

double episode_active_fraction(const Episode& ep, double threshold) {
    const size_t n = ep.frame_count();
    size_t matched = 0, active = 0;
    for (size_t i = 0; i < n; ++i) {
        bool any_present = false;
        bool any_active = false;
        for (const TactileTrack* t : {&ep.tactile_left, &ep.tactile_right}) {
            if (!t->enabled || !t->present[i]) continue;
            any_present = true;
            const size_t px = static_cast<size_t>(t->height) * t->width;
            if (px == 0) continue;
            size_t on = 0;
            for (size_t k = 0; k < px; ++k)
                if (t->convex[i * px + k] > 0 || t->concave[i * px + k] > 0) ++on;
            if (static_cast<double>(on) / px >= threshold) any_active = true;
        }
        if (any_present) ++matched;
        if (any_active) ++active;
    }
    return matched ? static_cast<double>(active) / matched : 0.0;
}

}  // namespace demosync

#include "demosync/calibration.hpp"

#include "demosync/error.hpp"
#include "demosync/textio.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>

namespace demosync {

namespace {

constexpr double kWidthSlack = 0.005;  // extrapolation clamp beyond end knots, m
constexpr double kMaxWidth = 0.2;      // physical jaw limit, m

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

double wrap_diff(double raw, double prev_raw) {
    double d = std::fmod(raw - prev_raw, static_cast<double>(kEncoderCountsPerRev));
    if (d > kEncoderCountsPerRev / 2) d -= kEncoderCountsPerRev;
    if (d <= -kEncoderCountsPerRev / 2) d += kEncoderCountsPerRev;
    return d;
}

std::vector<double> unwrap_counts(const std::vector<EncoderReading>& readings) {
    std::vector<double> out;
    out.reserve(readings.size());
    double prev = 0.0;
    for (size_t i = 0; i < readings.size(); ++i) {
        if (readings[i].raw >= kEncoderCountsPerRev)
            throw Error("InvalidReading", "encoder count " + std::to_string(readings[i].raw) +
                                              " out of [0, 4096)");
        if (i == 0) {
            prev = readings[i].raw;
        } else {
            prev += wrap_diff(readings[i].raw, prev);
        }
        out.push_back(prev);
    }
    return out;
}

GripperCalibration GripperCalibration::from_knots(std::vector<Knot> knots) {
    if (knots.size() < 2) throw Error("NonMonotonic", "need at least 2 calibration knots");
    std::sort(knots.begin(), knots.end(),
              [](const Knot& a, const Knot& b) { return a.unwrapped_count < b.unwrapped_count; });
    const bool increasing = knots[1].width_m > knots[0].width_m;
    for (size_t i = 1; i < knots.size(); ++i) {
        if (knots[i].unwrapped_count <= knots[i - 1].unwrapped_count)
            throw Error("NonMonotonic", "duplicate unwrapped count in calibration sweep");
        const bool step_up = knots[i].width_m > knots[i - 1].width_m;
        if (step_up != increasing || knots[i].width_m == knots[i - 1].width_m)
            throw Error("NonMonotonic", "widths not strictly monotone in count");
    }
    for (const Knot& k : knots) {
        if (!(k.width_m >= 0.0 && k.width_m <= kMaxWidth))
            throw Error("NonMonotonic",
                        "width " + fmt_g17(k.width_m) + " outside [0, 0.2] m");
    }
    GripperCalibration cal;
    cal.knots_ = std::move(knots);
    cal.min_width_ = std::min(cal.knots_.front().width_m, cal.knots_.back().width_m);
    cal.max_width_ = std::max(cal.knots_.front().width_m, cal.knots_.back().width_m);
    return cal;
}

double GripperCalibration::width_at(double c) const {
    const Knot& first = knots_.front();
    const Knot& last = knots_.back();
    double w;
    if (c <= first.unwrapped_count) {
        const Knot& next = knots_[1];
        const double slope = (next.width_m - first.width_m) /
                             (next.unwrapped_count - first.unwrapped_count);
        w = first.width_m + slope * (c - first.unwrapped_count);
    } else if (c >= last.unwrapped_count) {
        const Knot& prev = knots_[knots_.size() - 2];
        const double slope = (last.width_m - prev.width_m) /
                             (last.unwrapped_count - prev.unwrapped_count);
        w = last.width_m + slope * (c - last.unwrapped_count);
    } else {
        auto it = std::upper_bound(
            knots_.begin(), knots_.end(), c,
            [](double v, const Knot& k) { return v < k.unwrapped_count; });
        const Knot& hi = *it;
        const Knot& lo = *(it - 1);
        const double u = (c - lo.unwrapped_count) / (hi.unwrapped_count - lo.unwrapped_count);
        w = lo.width_m + (hi.width_m - lo.width_m) * u;
    }
    const double lo_clamp = std::max(0.0, min_width_ - kWidthSlack);
    const double hi_clamp = max_width_ + kWidthSlack;
    return std::clamp(w, lo_clamp, hi_clamp);
}

bool GripperCalibration::in_range(double c) const {
    return c >= knots_.front().unwrapped_count && c <= knots_.back().unwrapped_count;
}

namespace {

std::string gripper_rows(const std::vector<GripperCalibration::Knot>& knots) {
    std::string out;
    for (const auto& k : knots)
        out += fmt_g17(k.unwrapped_count) + " " + fmt_g17(k.width_m) + "\n";
    return out;
}

}  // namespace

std::string GripperCalibration::serialize() const {
    KvFile kv;
    kv.add("format_version", "1");
    kv.add("created_at", iso_now());
    kv.add("kind", "gripper");
    kv.add_long("knots", static_cast<long>(knots_.size()));
    return kv.serialize() + gripper_rows(knots_);
}

uint32_t GripperCalibration::content_digest() const {
    return crc32_of(gripper_rows(knots_));
}

GripperCalibration GripperCalibration::deserialize(const std::string& text) {
    KvFile kv = KvFile::parse(text);
    if (kv.get("format_version", "ParseError") != "1")
        throw Error("SchemaVersionMismatch", "unsupported calibration format_version");
    if (kv.get("kind", "ParseError") != "gripper")
        throw Error("ParseError", "calibration kind is not 'gripper'");
    // Knot rows parse as "<count> <width>" entries after the header.
    std::vector<Knot> knots;
    for (const auto& [key, value] : kv.entries) {
        if (key == "format_version" || key == "created_at" || key == "kind" || key == "knots")
            continue;
        Knot k;
        k.unwrapped_count = parse_double(key, "knot count");
        k.width_m = parse_double(value, "knot width");
        knots.push_back(k);
    }
    return from_knots(std::move(knots));
}

void GripperCalibration::save(const std::string& path) const {
    write_file_bytes(path, serialize());
}

GripperCalibration GripperCalibration::load(const std::string& path) {
    return deserialize(read_file_bytes(path));
}

GripperCalibration build_gripper_map(
    const std::vector<std::pair<EncoderReading, double>>& samples) {
    if (samples.size() < 2) throw Error("NonMonotonic", "need at least 2 sweep samples");
    std::vector<EncoderReading> readings;
    readings.reserve(samples.size());
    for (const auto& [r, w] : samples) readings.push_back(r);
    const std::vector<double> unwrapped = unwrap_counts(readings);
    std::vector<GripperCalibration::Knot> knots;
    knots.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
        knots.push_back({unwrapped[i], samples[i].second});
    return GripperCalibration::from_knots(std::move(knots));
}

WidthSample encoder_to_width(const GripperCalibration& cal, EncoderReading reading,
                             double prev_unwrapped) {
    if (reading.raw >= kEncoderCountsPerRev)
        throw Error("InvalidReading", "encoder count out of [0, 4096)");
    double prev_wrapped = std::fmod(prev_unwrapped, static_cast<double>(kEncoderCountsPerRev));
    if (prev_wrapped < 0.0) prev_wrapped += kEncoderCountsPerRev;
    const double unwrapped = prev_unwrapped + wrap_diff(reading.raw, prev_wrapped);
    return {cal.width_at(unwrapped), unwrapped};
}

namespace {

std::string controller_row(const RigidTransform& tf) {
    const Quat q = tf.rotation.canonicalized();
    const Vec3& t = tf.translation;
    return fmt_g17(q.w) + " " + fmt_g17(q.x) + " " + fmt_g17(q.y) + " " + fmt_g17(q.z) +
           " " + fmt_g17(t.x) + " " + fmt_g17(t.y) + " " + fmt_g17(t.z) + "\n";
}

}  // namespace

std::string ControllerCalibration::serialize() const {
    KvFile kv;
    kv.add("format_version", "1");
    kv.add("created_at", iso_now());
    kv.add("kind", "controller");
    return kv.serialize() + controller_row(correction);
}

uint32_t ControllerCalibration::content_digest() const {
    return crc32_of(controller_row(correction));
}

ControllerCalibration ControllerCalibration::deserialize(const std::string& text) {
    KvFile kv = KvFile::parse(text);
    if (kv.get("format_version", "ParseError") != "1")
        throw Error("SchemaVersionMismatch", "unsupported calibration format_version");
    if (kv.get("kind", "ParseError") != "controller")
        throw Error("ParseError", "calibration kind is not 'controller'");
    for (const auto& [key, value] : kv.entries) {
        if (key == "format_version" || key == "created_at" || key == "kind") continue;
        // Row is "qw qx qy qz tx ty tz"; KvFile split it at the first space.
        std::vector<std::string> parts;
        parts.push_back(key);
        std::string cur;
        for (char c : value) {
            if (c == ' ' || c == '\t') {
                if (!cur.empty()) parts.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) parts.push_back(cur);
        if (parts.size() != 7)
            throw Error("ParseError", "controller calibration row needs 7 values");
        ControllerCalibration cal;
        // Keep the parsed bits verbatim: re-normalizing would perturb the
        // components by an ulp and change the content digest across a
        // save/load cycle. Reject rows that are not unit quaternions.
        const Quat q{parse_double(parts[0], "qw"), parse_double(parts[1], "qx"),
                     parse_double(parts[2], "qy"), parse_double(parts[3], "qz")};
        if (std::fabs(q.norm() - 1.0) > 1e-6)
            throw Error("ParseError", "controller rotation is not unit-norm");
        cal.correction.rotation = q;
        cal.correction.translation = {parse_double(parts[4], "tx"), parse_double(parts[5], "ty"),
                                      parse_double(parts[6], "tz")};
        return cal;
    }
    throw Error("ParseError", "controller calibration has no transform row");
}

void ControllerCalibration::save(const std::string& path) const {
    write_file_bytes(path, serialize());
}

ControllerCalibration ControllerCalibration::load(const std::string& path) {
    return deserialize(read_file_bytes(path));
}

ControllerCalibration make_controller_calibration(const RigidTransform& recorded) {
    return {invert(recorded)};
}

Pose apply_correction(const ControllerCalibration& cal, const Pose& raw) {
    return transform_to_pose(compose(pose_to_transform(raw), cal.correction));
}

}  // namespace demosync

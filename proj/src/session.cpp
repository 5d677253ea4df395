#include "demosync/session.hpp"

#include "demosync/error.hpp"
#include "demosync/textio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

namespace fs = std::filesystem;

namespace demosync {

namespace {

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

const StreamKind kAllStreams[] = {StreamKind::Pose, StreamKind::Encoder, StreamKind::Tactile,
                                  StreamKind::VideoMeta, StreamKind::Marker};

}  // namespace

std::string SessionHeader::serialize() const {
    KvFile kv;
    kv.add("format_version", "1");
    kv.add("session_id", session_id);
    kv.add_double("epoch", epoch);
    kv.add_long("tactile_height", tactile_height);
    kv.add_long("tactile_width", tactile_width);
    std::string inventory;
    for (StreamKind k : streams) {
        if (!inventory.empty()) inventory += ",";
        inventory += stream_name(k);
    }
    kv.add("streams", inventory);
    kv.add_long("out_of_order_drops", out_of_order_drops);
    return kv.serialize();
}

SessionHeader SessionHeader::deserialize(const std::string& text) {
    KvFile kv = KvFile::parse(text);
    if (kv.get("format_version", "ParseError") != "1")
        throw Error("SchemaVersionMismatch", "unsupported session header format_version");
    SessionHeader h;
    h.session_id = kv.get_or("session_id", "");
    h.epoch = kv.get_double_or("epoch", 0.0);
    h.tactile_height = static_cast<uint16_t>(kv.get_long_or("tactile_height", 240));
    h.tactile_width = static_cast<uint16_t>(kv.get_long_or("tactile_width", 320));
    h.out_of_order_drops = kv.get_long_or("out_of_order_drops", 0);
    for (const std::string& name : split_bracket_list(kv.get_or("streams", ""))) {
        if (name.empty()) continue;
        auto kind = stream_from_name(name);
        if (!kind) throw Error("ParseError", "unknown stream '" + name + "' in header");
        h.streams.push_back(*kind);
    }
    return h;
}

bool RawSession::has_stream(StreamKind kind) const {
    return std::find(header.streams.begin(), header.streams.end(), kind) !=
           header.streams.end();
}

LogScan scan_log(const std::string& path, const std::string& log_name) {
    const std::string bytes = read_file_bytes(path);
    const uint8_t* data = reinterpret_cast<const uint8_t*>(bytes.data());
    LogScan scan;
    size_t pos = 0;
    double last_t = -std::numeric_limits<double>::infinity();
    while (pos < bytes.size()) {
        size_t used = 0;
        WireRecord rec;
        try {
            rec = decode_record(data + pos, bytes.size() - pos, &used);
        } catch (const Error& e) {
            scan.issue = LogIssue{log_name, pos, e.code(), e.what()};
            return scan;
        }
        if (!std::isfinite(rec.timestamp) || rec.timestamp <= last_t) {
            scan.issue = LogIssue{log_name, pos, "CorruptLog",
                                  "non-monotone timestamp in " + log_name};
            return scan;
        }
        last_t = rec.timestamp;
        scan.records.push_back(std::move(rec));
        pos += used;
    }
    return scan;
}

namespace {

void raise_if_strict(LoadPolicy policy, const LogIssue& issue) {
    if (policy == LoadPolicy::Strict)
        throw Error("CorruptLog", issue.log_name + " at byte offset " +
                                      std::to_string(issue.byte_offset) + ": " + issue.message);
}

}  // namespace

LoadedSession load_session(const std::string& dir, LoadPolicy policy) {
    LoadedSession out;
    out.session.header = SessionHeader::deserialize(read_file_bytes(join(dir, "header.txt")));

    for (StreamKind kind : kAllStreams) {
        const std::string log_name = std::string(stream_name(kind)) + ".log";
        const std::string path = join(dir, log_name);
        const bool listed = out.session.has_stream(kind);
        if (!fs::exists(path)) {
            if (listed)
                out.warnings.push_back("stream log missing: " + log_name);
            continue;
        }
        if (!listed) out.warnings.push_back("stream log not in header inventory: " + log_name);
        LogScan scan = scan_log(path, log_name);
        if (scan.issue) {
            raise_if_strict(policy, *scan.issue);
            out.issues.push_back(*scan.issue);
        }
        for (size_t i = 0; i < scan.records.size(); ++i) {
            const WireRecord& rec = scan.records[i];
            if (rec.stream_id != kind) {
                LogIssue issue{log_name, 0, "CorruptLog",
                               "record of stream '" + std::string(stream_name(rec.stream_id)) +
                                   "' inside " + log_name};
                raise_if_strict(policy, issue);
                out.issues.push_back(issue);
                break;
            }
            try {
                switch (kind) {
                    case StreamKind::Pose:
                        out.session.poses.push_back({rec.timestamp,
                                                     decode_pose_payload(rec.payload)});
                        break;
                    case StreamKind::Encoder:
                        out.session.encoder.push_back(
                            {rec.timestamp, decode_encoder_payload(rec.payload)});
                        break;
                    case StreamKind::Tactile:
                        out.session.tactile.push_back(
                            decode_tactile_payload(rec.payload, rec.timestamp));
                        break;
                    case StreamKind::VideoMeta:
                        out.session.video.push_back(
                            {rec.timestamp, decode_video_meta_payload(rec.payload)});
                        break;
                    case StreamKind::Marker: {
                        const MarkerPoint p = decode_marker_payload(rec.payload);
                        out.session.marker.push_back({rec.timestamp, p.u, p.v});
                        break;
                    }
                }
            } catch (const Error& e) {
                LogIssue issue{log_name, 0, e.code(), e.what()};
                raise_if_strict(policy, issue);
                out.issues.push_back(issue);
                break;
            }
        }
    }
    return out;
}

void write_session(const std::string& dir, const RawSession& session) {
    fs::create_directories(dir);
    write_file_bytes(join(dir, "header.txt"), session.header.serialize());

    auto dump = [&](StreamKind kind, const std::string& bytes) {
        write_file_bytes(join(dir, std::string(stream_name(kind)) + ".log"), bytes);
    };

    if (session.has_stream(StreamKind::Pose)) {
        std::string bytes;
        for (const PoseSample& s : session.poses) {
            auto rec = encode_record(StreamKind::Pose, s.t, encode_pose_payload(s.pose));
            bytes.append(rec.begin(), rec.end());
        }
        dump(StreamKind::Pose, bytes);
    }
    if (session.has_stream(StreamKind::Encoder)) {
        std::string bytes;
        for (const EncoderSample& s : session.encoder) {
            auto rec = encode_record(StreamKind::Encoder, s.t, encode_encoder_payload(s.raw));
            bytes.append(rec.begin(), rec.end());
        }
        dump(StreamKind::Encoder, bytes);
    }
    if (session.has_stream(StreamKind::Tactile)) {
        std::string bytes;
        for (const TactileFrame& f : session.tactile) {
            auto rec = encode_record(StreamKind::Tactile, f.t, encode_tactile_payload(f));
            bytes.append(rec.begin(), rec.end());
        }
        dump(StreamKind::Tactile, bytes);
    }
    if (session.has_stream(StreamKind::VideoMeta)) {
        std::string bytes;
        for (const VideoFrameMeta& m : session.video) {
            auto rec =
                encode_record(StreamKind::VideoMeta, m.t, encode_video_meta_payload(m.index));
            bytes.append(rec.begin(), rec.end());
        }
        dump(StreamKind::VideoMeta, bytes);
    }
    if (session.has_stream(StreamKind::Marker)) {
        std::string bytes;
        for (const MarkerSample& s : session.marker) {
            auto rec = encode_record(StreamKind::Marker, s.t, encode_marker_payload({s.u, s.v}));
            bytes.append(rec.begin(), rec.end());
        }
        dump(StreamKind::Marker, bytes);
    }
}

SessionReplay SessionReplay::open(const std::string& dir, LoadPolicy policy) {
    SessionReplay replay;
    replay.policy_ = policy;

    struct StreamCursor {
        StreamKind kind;
        std::vector<WireRecord> records;
        size_t pos = 0;
    };
    std::vector<StreamCursor> cursors;
    for (StreamKind kind : kAllStreams) {
        const std::string log_name = std::string(stream_name(kind)) + ".log";
        const std::string path = join(dir, log_name);
        if (!fs::exists(path)) continue;
        LogScan scan = scan_log(path, log_name);
        if (scan.issue) replay.issues_.push_back(*scan.issue);
        cursors.push_back({kind, std::move(scan.records), 0});
    }

    // Merge by (timestamp, stream id); stream-local order is preserved
    // because each cursor is consumed front to back.
    for (;;) {
        StreamCursor* best = nullptr;
        for (StreamCursor& c : cursors) {
            if (c.pos >= c.records.size()) continue;
            if (!best) {
                best = &c;
                continue;
            }
            const WireRecord& a = c.records[c.pos];
            const WireRecord& b = best->records[best->pos];
            if (a.timestamp < b.timestamp ||
                (a.timestamp == b.timestamp &&
                 static_cast<uint8_t>(c.kind) < static_cast<uint8_t>(best->kind)))
                best = &c;
        }
        if (!best) break;
        replay.records_.emplace_back(best->kind, std::move(best->records[best->pos]));
        ++best->pos;
    }
    return replay;
}

std::optional<std::pair<StreamKind, WireRecord>> SessionReplay::next() {
    if (pos_ < records_.size()) return records_[pos_++];
    if (policy_ == LoadPolicy::Strict && !issues_.empty()) {
        const LogIssue& issue = issues_.front();
        throw Error("CorruptLog", issue.log_name + " at byte offset " +
                                      std::to_string(issue.byte_offset) + ": " + issue.message);
    }
    return std::nullopt;
}

}  // namespace demosync

#pragma once

#include "demosync/protocol.hpp"

#include <optional>
#include <string>
#include <vector>

namespace demosync {

// Session directory layout: header.txt plus one append-only record log per
// stream (pose.log, encoder.log, tactile.log, video_meta.log, marker.log).

struct SessionHeader {
    std::string session_id;
    double epoch = 0.0;
    uint16_t tactile_height = 240;
    uint16_t tactile_width = 320;
    std::vector<StreamKind> streams;
    long out_of_order_drops = 0;

    std::string serialize() const;
    static SessionHeader deserialize(const std::string& text);
};

struct EncoderSample {
    Timestamp t = 0.0;
    uint16_t raw = 0;
};

struct VideoFrameMeta {
    Timestamp t = 0.0;
    uint32_t index = 0;
};

struct MarkerSample {
    Timestamp t = 0.0;
    double u = 0.0;
    double v = 0.0;
};

struct RawSession {
    SessionHeader header;
    std::vector<PoseSample> poses;
    std::vector<EncoderSample> encoder;
    std::vector<TactileFrame> tactile;
    std::vector<VideoFrameMeta> video;
    std::vector<MarkerSample> marker;

    bool has_stream(StreamKind kind) const;
};

// Damage found while scanning a log; byte_offset points at the first byte
// of the offending record.
struct LogIssue {
    std::string log_name;
    uint64_t byte_offset = 0;
    std::string code;
    std::string message;
};

struct LogScan {
    std::vector<WireRecord> records;
    std::optional<LogIssue> issue;
};

// Valid prefix of a record log. Stops at the first damaged or
// non-monotone-timestamp record and reports it.
LogScan scan_log(const std::string& path, const std::string& log_name);

enum class LoadPolicy {
    TolerateTail,  // keep valid prefixes, collect issues
    Strict,        // throw Error("CorruptLog") on any damage
};

struct LoadedSession {
    RawSession session;
    std::vector<LogIssue> issues;
    std::vector<std::string> warnings;  // e.g. missing stream logs
};

LoadedSession load_session(const std::string& dir, LoadPolicy policy = LoadPolicy::TolerateTail);

// Serializes a session into a directory (header + per-stream logs).
void write_session(const std::string& dir, const RawSession& session);

// Merged iteration over every stream log in global timestamp order, ties
// broken by stream id then stream-local order. With Strict policy, next()
// throws Error("CorruptLog") after the last valid record when a log was
// damaged; with TolerateTail the issues are only reported.
class SessionReplay {
public:
    static SessionReplay open(const std::string& dir, LoadPolicy policy = LoadPolicy::Strict);

    std::optional<std::pair<StreamKind, WireRecord>> next();
    const std::vector<LogIssue>& issues() const { return issues_; }
    size_t total_records() const { return records_.size(); }

private:
    std::vector<std::pair<StreamKind, WireRecord>> records_;
    std::vector<LogIssue> issues_;
    size_t pos_ = 0;
    LoadPolicy policy_ = LoadPolicy::Strict;
};

}  // namespace demosync

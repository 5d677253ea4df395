#include "demosync/protocol.hpp"

#include "demosync/error.hpp"

#include <bit>
#include <cstring>

namespace demosync {

namespace {

bool known_stream(uint8_t id) { return id >= 1 && id <= 5; }

// Expected payload size for fixed-size kinds; -1 for variable (tactile).
long expected_payload_size(StreamKind kind) {
    switch (kind) {
        case StreamKind::Pose: return 56;
        case StreamKind::Encoder: return 2;
        case StreamKind::Tactile: return -1;
        case StreamKind::VideoMeta: return 4;
        case StreamKind::Marker: return 16;
    }
    return -1;
}

void check_payload_size(StreamKind kind, size_t got) {
    const long want = expected_payload_size(kind);
    if (want >= 0 && static_cast<size_t>(want) != got)
        throw Error("MalformedPayload", std::string(stream_name(kind)) + " payload must be " +
                                            std::to_string(want) + " bytes, got " +
                                            std::to_string(got));
    if (kind == StreamKind::Tactile && got < 5)
        throw Error("MalformedPayload", "tactile payload shorter than its header");
}

}  // namespace

const char* stream_name(StreamKind kind) {
    switch (kind) {
        case StreamKind::Pose: return "pose";
        case StreamKind::Encoder: return "encoder";
        case StreamKind::Tactile: return "tactile";
        case StreamKind::VideoMeta: return "video_meta";
        case StreamKind::Marker: return "marker";
    }
    return "unknown";
}

std::optional<StreamKind> stream_from_name(const std::string& name) {
    for (uint8_t id = 1; id <= 5; ++id) {
        const StreamKind k = static_cast<StreamKind>(id);
        if (name == stream_name(k)) return k;
    }
    return std::nullopt;
}

bool WireRecord::operator==(const WireRecord& o) const {
    return stream_id == o.stream_id && payload == o.payload &&
           std::bit_cast<uint64_t>(timestamp) == std::bit_cast<uint64_t>(o.timestamp);
}

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64le(std::vector<uint8_t>& out, double v) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((bits >> (8 * i)) & 0xff));
}

uint16_t get_u16le(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (static_cast<uint16_t>(p[1]) << 8));
}

uint32_t get_u32le(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

double get_f64le(const uint8_t* p) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

std::vector<uint8_t> encode_record(const WireRecord& rec) {
    check_payload_size(rec.stream_id, rec.payload.size());
    if (rec.payload.size() > kMaxPayload)
        throw Error("OversizePayload", "payload exceeds 1 MiB");
    std::vector<uint8_t> out;
    out.reserve(kWireHeaderSize + rec.payload.size());
    out.insert(out.end(), kWireMagic, kWireMagic + 4);
    out.push_back(static_cast<uint8_t>(rec.stream_id));
    put_f64le(out, rec.timestamp);
    put_u32le(out, static_cast<uint32_t>(rec.payload.size()));
    out.insert(out.end(), rec.payload.begin(), rec.payload.end());
    return out;
}

std::vector<uint8_t> encode_record(StreamKind kind, Timestamp t, std::vector<uint8_t> payload) {
    WireRecord rec;
    rec.stream_id = kind;
    rec.timestamp = t;
    rec.payload = std::move(payload);
    return encode_record(rec);
}

WireRecord decode_record(const uint8_t* data, size_t len, size_t* consumed) {
    if (len < kWireHeaderSize) throw Error("TruncatedRecord", "record header incomplete");
    if (std::memcmp(data, kWireMagic, 4) != 0) throw Error("BadMagic", "record magic mismatch");
    const uint8_t id = data[4];
    if (!known_stream(id))
        throw Error("UnknownStream", "stream id " + std::to_string(id));
    const uint32_t payload_len = get_u32le(data + 13);
    if (payload_len > kMaxPayload)
        throw Error("OversizePayload", "payload length " + std::to_string(payload_len));
    if (len < kWireHeaderSize + payload_len)
        throw Error("TruncatedRecord", "payload incomplete");
    WireRecord rec;
    rec.stream_id = static_cast<StreamKind>(id);
    rec.timestamp = get_f64le(data + 5);
    rec.payload.assign(data + kWireHeaderSize, data + kWireHeaderSize + payload_len);
    if (consumed) *consumed = kWireHeaderSize + payload_len;
    return rec;
}

std::vector<WireRecord> WireParser::feed(const uint8_t* data, size_t len) {
    buffer_.insert(buffer_.end(), data, data + len);
    std::vector<WireRecord> out;
    size_t pos = 0;
    while (buffer_.size() - pos >= kWireHeaderSize) {
        const uint8_t* p = buffer_.data() + pos;
        if (std::memcmp(p, kWireMagic, 4) != 0)
            throw Error("BadMagic", "record magic mismatch at stream offset " +
                                        std::to_string(consumed_ + pos));
        const uint8_t id = p[4];
        if (!known_stream(id))
            throw Error("UnknownStream", "stream id " + std::to_string(id) +
                                             " at stream offset " + std::to_string(consumed_ + pos));
        const uint32_t payload_len = get_u32le(p + 13);
        if (payload_len > kMaxPayload)
            throw Error("OversizePayload", "payload length " + std::to_string(payload_len) +
                                               " at stream offset " +
                                               std::to_string(consumed_ + pos));
        if (buffer_.size() - pos < kWireHeaderSize + payload_len) break;
        size_t used = 0;
        out.push_back(decode_record(p, buffer_.size() - pos, &used));
        pos += used;
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + pos);
    consumed_ += pos;
    return out;
}

std::vector<uint8_t> encode_pose_payload(const Pose& pose) {
    std::vector<uint8_t> out;
    out.reserve(56);
    const Quat q = pose.orientation.canonicalized();
    put_f64le(out, q.w);
    put_f64le(out, q.x);
    put_f64le(out, q.y);
    put_f64le(out, q.z);
    put_f64le(out, pose.position.x);
    put_f64le(out, pose.position.y);
    put_f64le(out, pose.position.z);
    return out;
}

Pose decode_pose_payload(const std::vector<uint8_t>& payload) {
    check_payload_size(StreamKind::Pose, payload.size());
    const uint8_t* p = payload.data();
    Pose pose;
    pose.orientation = {get_f64le(p), get_f64le(p + 8), get_f64le(p + 16), get_f64le(p + 24)};
    pose.position = {get_f64le(p + 32), get_f64le(p + 40), get_f64le(p + 48)};
    return pose;
}

std::vector<uint8_t> encode_encoder_payload(uint16_t raw_count) {
    std::vector<uint8_t> out;
    put_u16le(out, raw_count);
    return out;
}

uint16_t decode_encoder_payload(const std::vector<uint8_t>& payload) {
    check_payload_size(StreamKind::Encoder, payload.size());
    return get_u16le(payload.data());
}

std::vector<uint8_t> encode_tactile_payload(const TactileFrame& frame) {
    if (frame.pixels.size() != frame.pixel_count())
        throw Error("ShapeMismatch", "tactile pixel buffer does not match geometry");
    std::vector<uint8_t> out;
    out.reserve(5 + frame.pixels.size());
    out.push_back(static_cast<uint8_t>(frame.sensor_id));
    put_u16le(out, frame.height);
    put_u16le(out, frame.width);
    out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
    return out;
}

TactileFrame decode_tactile_payload(const std::vector<uint8_t>& payload, Timestamp t) {
    check_payload_size(StreamKind::Tactile, payload.size());
    TactileFrame frame;
    frame.t = t;
    const uint8_t side = payload[0];
    if (side > 1) throw Error("MalformedPayload", "tactile sensor id must be 0 or 1");
    frame.sensor_id = static_cast<TactileSide>(side);
    frame.height = get_u16le(payload.data() + 1);
    frame.width = get_u16le(payload.data() + 3);
    if (payload.size() != 5 + frame.pixel_count())
        throw Error("MalformedPayload", "tactile payload size does not match geometry");
    frame.pixels.assign(payload.begin() + 5, payload.end());
    return frame;
}

std::vector<uint8_t> encode_video_meta_payload(uint32_t frame_index) {
    std::vector<uint8_t> out;
    put_u32le(out, frame_index);
    return out;
}

uint32_t decode_video_meta_payload(const std::vector<uint8_t>& payload) {
    check_payload_size(StreamKind::VideoMeta, payload.size());
    return get_u32le(payload.data());
}

std::vector<uint8_t> encode_marker_payload(const MarkerPoint& p) {
    std::vector<uint8_t> out;
    out.reserve(16);
    put_f64le(out, p.u);
    put_f64le(out, p.v);
    return out;
}

MarkerPoint decode_marker_payload(const std::vector<uint8_t>& payload) {
    check_payload_size(StreamKind::Marker, payload.size());
    return {get_f64le(payload.data()), get_f64le(payload.data() + 8)};
}

}  // namespace demosync

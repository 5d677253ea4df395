#pragma once

#include "demosync/geometry.hpp"
#include "demosync/tactile.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace demosync {

// Wire record, little-endian throughout:
//
//   offset  size  field
//   0       4     magic "EXU1" (0x45 0x58 0x55 0x31; trailing '1' is the
//                 protocol version)
//   4       1     stream id
//   5       8     timestamp, IEEE-754 double, seconds
//   13      4     payload length (u32, <= 1 MiB)
//   17      n     payload
//
// Payload layout per stream:
//   POSE        7 doubles: qw qx qy qz tx ty tz
//   ENCODER     u16 raw count
//   TACTILE     u8 sensor id, u16 height, u16 width, height*width bytes
//   VIDEO_META  u32 frame index
//   MARKER      2 doubles: u v (pixels)

enum class StreamKind : uint8_t {
    Pose = 1,
    Encoder = 2,
    Tactile = 3,
    VideoMeta = 4,
    Marker = 5,
};

constexpr uint8_t kWireMagic[4] = {0x45, 0x58, 0x55, 0x31};  // "EXU1"
constexpr size_t kWireHeaderSize = 17;
constexpr uint32_t kMaxPayload = 1u << 20;

const char* stream_name(StreamKind kind);
std::optional<StreamKind> stream_from_name(const std::string& name);

struct WireRecord {
    StreamKind stream_id = StreamKind::Pose;
    Timestamp timestamp = 0.0;
    std::vector<uint8_t> payload;

    bool operator==(const WireRecord& o) const;
};

// Encodes one record; validates the payload size for the stream kind.
std::vector<uint8_t> encode_record(const WireRecord& rec);
std::vector<uint8_t> encode_record(StreamKind kind, Timestamp t,
                                   std::vector<uint8_t> payload);

// Decodes exactly one record from the front of data and reports its size.
// Throws Error("BadMagic") / Error("TruncatedRecord") /
// Error("OversizePayload") / Error("UnknownStream").
WireRecord decode_record(const uint8_t* data, size_t len, size_t* consumed = nullptr);

// Incremental parser over an arbitrary byte chunking of a record stream.
// Any prefix of a valid stream yields complete records plus at most one
// partial tail held internally.
class WireParser {
public:
    // Appends bytes and returns every record completed by them.
    std::vector<WireRecord> feed(const uint8_t* data, size_t len);
    // Bytes of an incomplete record still buffered.
    size_t pending_bytes() const { return buffer_.size(); }
    // Total bytes consumed into complete records so far.
    uint64_t consumed_bytes() const { return consumed_; }

private:
    std::vector<uint8_t> buffer_;
    uint64_t consumed_ = 0;
};

// Typed payload codecs.
std::vector<uint8_t> encode_pose_payload(const Pose& pose);
Pose decode_pose_payload(const std::vector<uint8_t>& payload);

std::vector<uint8_t> encode_encoder_payload(uint16_t raw_count);
uint16_t decode_encoder_payload(const std::vector<uint8_t>& payload);

std::vector<uint8_t> encode_tactile_payload(const TactileFrame& frame);
TactileFrame decode_tactile_payload(const std::vector<uint8_t>& payload, Timestamp t);

std::vector<uint8_t> encode_video_meta_payload(uint32_t frame_index);
uint32_t decode_video_meta_payload(const std::vector<uint8_t>& payload);

struct MarkerPoint {
    double u = 0.0;
    double v = 0.0;
};
std::vector<uint8_t> encode_marker_payload(const MarkerPoint& p);
MarkerPoint decode_marker_payload(const std::vector<uint8_t>& payload);

// Low-level little-endian packing helpers shared with the container code.
void put_u16le(std::vector<uint8_t>& out, uint16_t v);
void put_u32le(std::vector<uint8_t>& out, uint32_t v);
void put_f64le(std::vector<uint8_t>& out, double v);
uint16_t get_u16le(const uint8_t* p);
uint32_t get_u32le(const uint8_t* p);
double get_f64le(const uint8_t* p);

}  // namespace demosync

#include "qoslab/streamgen.hpp"

#include <cmath>

#include "qoslab/crc32.hpp"
#include "qoslab/rng.hpp"

namespace qoslab {

namespace {

constexpr std::int64_t kNanosPerMinute = 60ll * kNanosPerSecond;

void validate(const StreamProfile& p) {
    if (p.name.empty())
        throw InvalidProfile("profile name must not be empty");
    if (p.duration_s <= 0)
        throw InvalidProfile("profile '" + p.name + "': duration_s must be > 0");
    if (p.packets_per_minute == 0)
        throw InvalidProfile("profile '" + p.name + "': packets_per_minute must be > 0");
    if (p.packet_payload_bytes < kMinPayloadBytes)
        throw InvalidProfile("profile '" + p.name + "': packet_payload_bytes must be >= " +
                             std::to_string(kMinPayloadBytes));
}

Bytes make_payload(std::uint32_t size, Rng& rng) {
    Bytes payload(size);
    const std::size_t body = size - 4;
    for (std::size_t i = 0; i < body; ++i)
        payload[i] = static_cast<std::uint8_t>(rng.next_u64() & 0xFF);
    const std::uint32_t tag = crc32(std::span(payload).first(body));
    payload[body] = static_cast<std::uint8_t>(tag >> 24);
    payload[body + 1] = static_cast<std::uint8_t>((tag >> 16) & 0xFF);
    payload[body + 2] = static_cast<std::uint8_t>((tag >> 8) & 0xFF);
    payload[body + 3] = static_cast<std::uint8_t>(tag & 0xFF);
    return payload;
}

// Send instants in nanoseconds from t=0, exact rational spacing for CBR.
std::vector<Nanos> send_times(const StreamProfile& p, Rng& rng) {
    const Nanos duration_ns = to_nanos(p.duration_s);
    std::vector<Nanos> times;

    if (p.mode == RateMode::CBR) {
        const std::int64_t ppm = p.packets_per_minute;
        // i-th instant is i*60e9/ppm; count all instants below duration.
        const std::int64_t count =
            (duration_ns * ppm + kNanosPerMinute - 1) / kNanosPerMinute;
        times.reserve(static_cast<std::size_t>(count));
        for (std::int64_t i = 0; i < count; ++i)
            times.push_back(i * kNanosPerMinute / ppm);
        return times;
    }

    // VBR: each second's packet count is nominal scaled by a uniform factor
    // in [0.5, 1.5); a fractional carry keeps the long-run mean at nominal.
    const double nominal_per_s = static_cast<double>(p.packets_per_minute) / 60.0;
    double quota = 0.0;
    std::int64_t emitted = 0;
    for (Nanos sec_start = 0; sec_start < duration_ns; sec_start += kNanosPerSecond) {
        const Nanos sec_len = std::min<Nanos>(kNanosPerSecond, duration_ns - sec_start);
        const double fraction = static_cast<double>(sec_len) / kNanosPerSecond;
        quota += rng.uniform(0.5, 1.5) * nominal_per_s * fraction;
        const std::int64_t target = static_cast<std::int64_t>(quota);
        const std::int64_t count = target - emitted;
        for (std::int64_t k = 0; k < count; ++k)
            times.push_back(sec_start + k * sec_len / count);
        emitted = target;
    }
    return times;
}

} // namespace

std::vector<SentPacket> generate(const StreamProfile& profile) {
    validate(profile);
    Rng rng(profile.seed);
    const std::uint32_t ssrc = static_cast<std::uint32_t>(derive_seed(profile.seed, 0));
    const std::vector<Nanos> times = send_times(profile, rng);

    std::vector<SentPacket> out;
    out.reserve(times.size());
    std::uint16_t seq = 0;
    for (Nanos t : times) {
        SentPacket sp;
        sp.rtp.sequence_number = seq;
        sp.rtp.ssrc = ssrc;
        // 90 kHz media clock ticks derived from the send instant.
        sp.rtp.rtp_timestamp = static_cast<std::uint32_t>(t * 9 / 100000);
        sp.rtp.payload = make_payload(profile.packet_payload_bytes, rng);

        sp.record.stream_id = profile.name;
        sp.record.seq = seq;
        sp.record.send_ts_ns = t;
        sp.record.size_bytes = profile.packet_payload_bytes;
        sp.record.src_port = profile.src_port;
        sp.record.dst_port = profile.dst_port;
        out.push_back(std::move(sp));
        seq = seq_succ(seq);
    }
    return out;
}

bool payload_crc_ok(std::span<const std::uint8_t> payload) {
    if (payload.size() < 4)
        return false;
    const std::size_t body = payload.size() - 4;
    const std::uint32_t stored = (static_cast<std::uint32_t>(payload[body]) << 24) |
                                 (static_cast<std::uint32_t>(payload[body + 1]) << 16) |
                                 (static_cast<std::uint32_t>(payload[body + 2]) << 8) |
                                 static_cast<std::uint32_t>(payload[body + 3]);
    return crc32(payload.first(body)) == stored;
}

const std::vector<StreamProfile>& builtin_profiles() {
    static const std::vector<StreamProfile> profiles = {
        {"stream1-camera", RateMode::CBR, 1372, 4000, 60.0, 1, 5000, 1240},
        {"stream2-vod", RateMode::CBR, 1370, 5000, 60.0, 2, 5001, 1241},
        {"stream3-dvb", RateMode::CBR, 1372, 20000, 60.0, 3, 5002, 1242},
    };
    return profiles;
}

std::optional<StreamProfile> find_builtin_profile(const std::string& name) {
    for (const StreamProfile& p : builtin_profiles())
        if (p.name == name)
            return p;
    return std::nullopt;
}

} // namespace qoslab

#ifndef QOSLAB_CHANNEL_HPP
#define QOSLAB_CHANNEL_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "qoslab/packet.hpp"

namespace qoslab {

/// Out-of-range probabilities or otherwise unusable impairment parameters.
class InvalidSpec : public ConfigError {
public:
    using ConfigError::ConfigError;
};

struct JitterModel {
    enum class Kind { None, Uniform, Normal };
    Kind kind = Kind::None;
    double seconds = 0.0; // uniform: half-width; normal: sigma

    static JitterModel none() { return {}; }
    static JitterModel uniform(double half_width_s) {
        return {Kind::Uniform, half_width_s};
    }
    static JitterModel normal(double sigma_s) { return {Kind::Normal, sigma_s}; }
};

/// Seeded impairment parameters for one stream's path. Loss and corruption
/// are mutually exclusive per-packet draws; reordering delays the selected
/// packet by reorder_extra_delay_s so the arrival sort delivers it late.
struct ImpairmentSpec {
    double base_delay_s = 0.0;
    JitterModel jitter_model;
    double loss_prob = 0.0;
    double reorder_prob = 0.0;
    double reorder_extra_delay_s = 0.01;
    double corrupt_prob = 0.0;
    double clock_offset_s = 0.0; // signed receiver-clock skew added to recv_ts
    std::uint64_t seed = 0;

    void validate() const;

    static ImpairmentSpec identity() { return {}; }
};

/// What the channel actually did, in send order; the oracle for every loss,
/// corruption and reorder test. Within one sequence-wrap epoch the seq sets
/// are disjoint by construction. Delays exclude the clock offset.
struct ChannelGroundTruth {
    std::vector<std::uint16_t> dropped_seqs;
    std::vector<std::uint16_t> corrupted_seqs;
    std::vector<std::uint16_t> reordered_seqs;
    std::vector<std::pair<std::uint16_t, Nanos>> per_packet_delay_ns; // survivors
};

struct ChannelResult {
    std::vector<SentPacket> arrivals; // sorted by recv_ts
    ChannelGroundTruth truth;
};

/// Applies the impairment spec to a send-ordered timeline. Survivors get
/// recv_ts = send_ts + base delay + jitter draw (+ reorder extra) + clock
/// offset; dropped packets are omitted; corrupted packets keep flowing with
/// one payload byte flipped and the record flagged.
ChannelResult apply_channel(const std::vector<SentPacket>& timeline, const ImpairmentSpec& spec);

/// Record-only convenience for metric tests; corruption flags without
/// flipping payload bytes.
ChannelResult apply_channel(const std::vector<PacketRecord>& timeline, const ImpairmentSpec& spec);

} // namespace qoslab

#endif

#include "qoslab/channel.hpp"

#include <algorithm>
#include <limits>

#include "qoslab/rng.hpp"

namespace qoslab {

namespace {

bool prob_ok(double p) { return p >= 0.0 && p <= 1.0; }

Nanos draw_jitter_ns(const JitterModel& m, Rng& rng) {
    switch (m.kind) {
    case JitterModel::Kind::Uniform:
        return to_nanos(rng.uniform(-m.seconds, m.seconds));
    case JitterModel::Kind::Normal:
        return to_nanos(rng.normal(0.0, m.seconds));
    case JitterModel::Kind::None:
        break;
    }
    return 0;
}

} // namespace

void ImpairmentSpec::validate() const {
    if (base_delay_s < 0)
        throw InvalidSpec("impairment base_delay_s must be >= 0");
    if (!prob_ok(loss_prob))
        throw InvalidSpec("impairment loss_prob must be in [0,1]");
    if (!prob_ok(reorder_prob))
        throw InvalidSpec("impairment reorder_prob must be in [0,1]");
    if (!prob_ok(corrupt_prob))
        throw InvalidSpec("impairment corrupt_prob must be in [0,1]");
    if (loss_prob + corrupt_prob > 1.0)
        throw InvalidSpec("impairment loss_prob + corrupt_prob must be <= 1");
    if (reorder_prob > 0 && reorder_extra_delay_s <= 0)
        throw InvalidSpec("impairment reorder_extra_delay_s must be > 0");
    if (jitter_model.kind != JitterModel::Kind::None && jitter_model.seconds < 0)
        throw InvalidSpec("impairment jitter magnitude must be >= 0");
}

ChannelResult apply_channel(const std::vector<SentPacket>& timeline, const ImpairmentSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const Nanos base_ns = to_nanos(spec.base_delay_s);
    const Nanos extra_ns = to_nanos(spec.reorder_extra_delay_s);
    const Nanos offset_ns = to_nanos(spec.clock_offset_s);

    ChannelResult result;
    result.arrivals.reserve(timeline.size());

    // The main path is FIFO: a packet never overtakes its predecessor, its
    // delay grows instead (queueing). Only reorder-selected packets leave
    // the queue for a slower path, so they alone can arrive out of order.
    Nanos last_main_arrival_ns = std::numeric_limits<Nanos>::min();

    for (const SentPacket& sent : timeline) {
        if (!sent.record.send_ts_ns)
            throw DataError("channel: timeline record for seq " +
                            std::to_string(sent.record.seq) + " has no send timestamp");
        // Per-packet draws happen unconditionally so a packet's fate never
        // shifts the randomness seen by its successors.
        const double u = rng.uniform01();
        const double v = rng.uniform01();
        const Nanos jitter_ns = draw_jitter_ns(spec.jitter_model, rng);

        const std::uint16_t seq = sent.record.seq;
        if (u < spec.loss_prob) {
            result.truth.dropped_seqs.push_back(seq);
            continue;
        }
        const bool corrupted = u < spec.loss_prob + spec.corrupt_prob;
        const bool reordered = !corrupted && v < spec.reorder_prob;

        // Delays are clamped non-negative so a zero-offset receiver never
        // sees recv_ts < send_ts.
        const Nanos send_ns = *sent.record.send_ts_ns;
        Nanos arrival_ns = send_ns + std::max<Nanos>(base_ns + jitter_ns, 0);
        if (reordered) {
            arrival_ns += extra_ns;
        } else {
            arrival_ns = std::max(arrival_ns, last_main_arrival_ns);
            last_main_arrival_ns = arrival_ns;
        }
        const Nanos delay_ns = arrival_ns - send_ns;

        SentPacket arrival = sent;
        arrival.record.recv_ts_ns = arrival_ns + offset_ns;
        if (corrupted) {
            arrival.record.corrupted = true;
            if (!arrival.rtp.payload.empty()) {
                const std::size_t idx = static_cast<std::size_t>(
                    rng.uniform_int(0, arrival.rtp.payload.size() - 1));
                arrival.rtp.payload[idx] ^= 0xFF;
            }
            result.truth.corrupted_seqs.push_back(seq);
        } else if (reordered) {
            result.truth.reordered_seqs.push_back(seq);
        }
        result.truth.per_packet_delay_ns.emplace_back(seq, delay_ns);
        result.arrivals.push_back(std::move(arrival));
    }

    std::stable_sort(result.arrivals.begin(), result.arrivals.end(),
                     [](const SentPacket& a, const SentPacket& b) {
                         return *a.record.recv_ts_ns < *b.record.recv_ts_ns;
                     });
    return result;
}

ChannelResult apply_channel(const std::vector<PacketRecord>& timeline, const ImpairmentSpec& spec) {
    std::vector<SentPacket> wrapped;
    wrapped.reserve(timeline.size());
    for (const PacketRecord& r : timeline)
        wrapped.push_back(SentPacket{r, RtpPacket{}});
    return apply_channel(wrapped, spec);
}

} // namespace qoslab

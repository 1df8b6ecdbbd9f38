#ifndef QOSLAB_METRICS_HPP
#define QOSLAB_METRICS_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "qoslab/capture.hpp"
#include "qoslab/packet.hpp"

namespace qoslab {

class EmptyStream : public DataError {
public:
    using DataError::DataError;
};

class MissingTimestamp : public DataError {
public:
    using DataError::DataError;
};

class EmptySeries : public DataError {
public:
    using DataError::DataError;
};

class NoPackets : public DataError {
public:
    using DataError::DataError;
};

// Largest forward sequence gap still read as packet loss; anything bigger is
// treated as a wrap or reordering artifact.
inline constexpr std::uint32_t kDefaultLossWindow = 3000;

// ---------------------------------------------------------------------------
// Series types
// ---------------------------------------------------------------------------

/// One-way delays in seconds, one per received packet in arrival order.
struct DelaySeries {
    std::vector<double> delays;
    std::size_t n() const { return delays.size(); }
};

/// Signed consecutive-delay differences: jitters[i] = delays[i+1] - delays[i].
/// Empty when fewer than two receptions exist.
struct JitterSeries {
    std::vector<double> jitters;
    std::size_t n() const { return jitters.size(); }
};

struct DelayStats {
    double mean_s = 0;
    double min_s = 0;
    double max_s = 0;
};

struct JitterStats {
    double mean_abs_s = 0;
    double min_s = 0; // signed extremes
    double max_s = 0;
};

/// One detected loss: `gap` packets missing between after_seq and
/// before_seq, reported at the gap-closing packet's arrival time.
struct LossEvent {
    Nanos detected_at_ns = 0;
    std::uint32_t gap = 0;
    std::uint16_t after_seq = 0;
    std::uint16_t before_seq = 0;

    bool operator==(const LossEvent&) const = default;
};

struct TrafficRate {
    double bytes_per_s = 0;
    double bits_per_s = 0;
    std::uint64_t total_bytes = 0;
    double duration_s = 0;
};

/// Per-stream aggregate of every measured quantity. Under reordering,
/// lost_count is an upper bound: a late packet that fills an already
/// reported gap never decrements the count. Corrupted packets are declared
/// lost, so they appear both in corrupted_count and as sequence gaps.
struct QosReport {
    std::uint64_t total_bytes = 0;
    double transmission_duration_s = 0;
    double traffic_rate_bps = 0;  // bits per second
    double traffic_rate_Bps = 0;  // bytes per second
    std::optional<DelayStats> delay;
    std::optional<JitterStats> jitter;
    std::uint64_t received_count = 0;
    std::uint64_t lost_count = 0;
    double loss_percent = 0;
    std::uint64_t corrupted_count = 0;
    double per_percent = 0;
    std::uint64_t reordered_count = 0;
    std::vector<LossEvent> loss_events;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Total bytes over the transmission duration (bytes/s and bits/s). With no
/// explicit duration, uses last recv_ts - first recv_ts.
TrafficRate traffic_rate(const std::vector<PacketRecord>& records,
                         std::optional<double> duration_s = {});

/// Delay_i = recv_ts - send_ts per received record, arrival order;
/// never-received records are ignored.
DelaySeries delay_series(const std::vector<PacketRecord>& records);

DelayStats mean_one_way_delay(const DelaySeries& series);

JitterSeries jitter_series(const DelaySeries& series);

/// Mean of absolute jitters plus the signed extremes.
JitterStats mean_abs_jitter(const JitterSeries& series);

struct LossDetection {
    std::vector<LossEvent> events;
    std::uint64_t lost_count = 0;
};

/// Streams over consecutive arrivals: a forward sequence gap g with
/// 1 <= g <= window is g lost packets, reported when the gap-closing packet
/// arrives. Feed it the valid (uncorrupted) stream.
LossDetection detect_losses(const std::vector<PacketRecord>& arrivals,
                            std::uint32_t window = kDefaultLossWindow);

struct ReorderDetection {
    std::uint64_t reordered_count = 0;
    std::vector<std::uint16_t> seqs;
};

/// An arrival whose sequence number precedes its predecessor's (signed
/// mod-2^16 difference in (-2^15, 0)) counts as reordered.
ReorderDetection detect_reorders(const std::vector<PacketRecord>& arrivals);

/// Packet error rate: corrupted over received, as a percentage.
double per(std::uint64_t corrupted_count, std::uint64_t received_count);

struct AnalyzeOptions {
    std::optional<double> duration_s;
    std::uint32_t loss_window = kDefaultLossWindow;
};

/// Full per-stream report over received records in arrival order. The send
/// log anchors the expected first/last sequence numbers so losses at the
/// stream edges are counted too. Corrupted arrivals are declared lost:
/// excluded from the valid stream before loss/reorder/delay computation.
QosReport analyze(const std::vector<PacketRecord>& arrivals, const SendLog& log,
                  const AnalyzeOptions& options = {});

/// Degraded variant without a send log: rate and loss only; delay and
/// jitter are omitted and stream-edge losses cannot be anchored.
QosReport analyze(const std::vector<PacketRecord>& arrivals,
                  const AnalyzeOptions& options = {});

} // namespace qoslab

#endif

#include "qoslab/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace qoslab {

TrafficRate traffic_rate(const std::vector<PacketRecord>& records,
                         std::optional<double> duration_s) {
    if (records.empty())
        throw EmptyStream("traffic_rate: no records");

    std::uint64_t total = 0;
    for (const PacketRecord& r : records)
        total += r.size_bytes;

    double duration = 0;
    if (duration_s) {
        duration = *duration_s;
    } else {
        std::optional<Nanos> first, last;
        for (const PacketRecord& r : records) {
            if (!r.recv_ts_ns)
                continue;
            if (!first) {
                first = *r.recv_ts_ns;
                last = *r.recv_ts_ns;
            } else {
                first = std::min(*first, *r.recv_ts_ns);
                last = std::max(*last, *r.recv_ts_ns);
            }
        }
        if (!first)
            throw EmptyStream("traffic_rate: no received records to derive duration from");
        duration = to_seconds(*last - *first);
    }
    if (duration <= 0)
        throw ConfigError("traffic_rate: duration must be > 0 (pass it explicitly for "
                          "single-packet captures)");

    TrafficRate rate;
    rate.total_bytes = total;
    rate.duration_s = duration;
    rate.bytes_per_s = static_cast<double>(total) / duration;
    rate.bits_per_s = static_cast<double>(total * 8) / duration;
    return rate;
}

DelaySeries delay_series(const std::vector<PacketRecord>& records) {
    DelaySeries series;
    series.delays.reserve(records.size());
    for (const PacketRecord& r : records) {
        if (!r.recv_ts_ns)
            continue;
        if (!r.send_ts_ns)
            throw MissingTimestamp("delay_series: received record for seq " +
                                   std::to_string(r.seq) + " has no send timestamp");
        series.delays.push_back(to_seconds(*r.recv_ts_ns - *r.send_ts_ns));
    }
    return series;
}

DelayStats mean_one_way_delay(const DelaySeries& series) {
    if (series.delays.empty())
        throw EmptySeries("mean_one_way_delay: empty delay series");
    double sum = 0;
    for (double d : series.delays)
        sum += d;
    const auto [min_it, max_it] =
        std::minmax_element(series.delays.begin(), series.delays.end());
    return {sum / static_cast<double>(series.n()), *min_it, *max_it};
}

JitterSeries jitter_series(const DelaySeries& series) {
    JitterSeries jitter;
    if (series.delays.size() < 2)
        return jitter;
    jitter.jitters.reserve(series.delays.size() - 1);
    for (std::size_t i = 0; i + 1 < series.delays.size(); ++i)
        jitter.jitters.push_back(series.delays[i + 1] - series.delays[i]);
    return jitter;
}

JitterStats mean_abs_jitter(const JitterSeries& series) {
    if (series.jitters.empty())
        throw EmptySeries("mean_abs_jitter: fewer than two delays");
    double sum_abs = 0;
    for (double j : series.jitters)
        sum_abs += std::abs(j);
    const auto [min_it, max_it] =
        std::minmax_element(series.jitters.begin(), series.jitters.end());
    return {sum_abs / static_cast<double>(series.n()), *min_it, *max_it};
}

LossDetection detect_losses(const std::vector<PacketRecord>& arrivals,
                            std::uint32_t window) {
    LossDetection result;
    for (std::size_t i = 1; i < arrivals.size(); ++i) {
        const std::uint16_t prev = arrivals[i - 1].seq;
        const std::uint16_t cur = arrivals[i].seq;
        const std::uint16_t gap = static_cast<std::uint16_t>(cur - prev - 1);
        if (gap >= 1 && gap <= window) {
            LossEvent event;
            event.detected_at_ns = arrivals[i].recv_ts_ns.value_or(0);
            event.gap = gap;
            event.after_seq = prev;
            event.before_seq = cur;
            result.events.push_back(event);
            result.lost_count += gap;
        }
    }
    return result;
}

ReorderDetection detect_reorders(const std::vector<PacketRecord>& arrivals) {
    ReorderDetection result;
    for (std::size_t i = 1; i < arrivals.size(); ++i) {
        if (seq_less(arrivals[i].seq, arrivals[i - 1].seq)) {
            result.seqs.push_back(arrivals[i].seq);
            ++result.reordered_count;
        }
    }
    return result;
}

double per(std::uint64_t corrupted_count, std::uint64_t received_count) {
    if (received_count == 0)
        throw NoPackets("per: no received packets");
    return 100.0 * static_cast<double>(corrupted_count) /
           static_cast<double>(received_count);
}

namespace {

struct StreamBounds {
    std::uint16_t first_seq = 0;
    std::uint16_t last_seq = 0;
    bool known = false;
};

QosReport analyze_impl(const std::vector<PacketRecord>& arrivals,
                       const StreamBounds& bounds, bool compute_delays,
                       const AnalyzeOptions& options) {
    if (arrivals.empty())
        throw EmptyStream("analyze: no arrivals");

    QosReport report;
    report.received_count = arrivals.size();

    std::vector<PacketRecord> valid;
    valid.reserve(arrivals.size());
    for (const PacketRecord& r : arrivals) {
        if (r.corrupted)
            ++report.corrupted_count;
        else
            valid.push_back(r);
    }
    if (valid.empty())
        throw EmptySeries("analyze: every arrival was corrupted");

    // Loss detection over the valid stream, with the send log anchoring the
    // expected first and last sequence numbers so edge losses count.
    LossDetection losses = detect_losses(valid, options.loss_window);
    if (bounds.known) {
        const std::uint16_t head_gap = seq_forward(bounds.first_seq, valid.front().seq);
        if (head_gap >= 1 && head_gap <= options.loss_window) {
            LossEvent event;
            event.detected_at_ns = valid.front().recv_ts_ns.value_or(0);
            event.gap = head_gap;
            event.after_seq = static_cast<std::uint16_t>(bounds.first_seq - 1);
            event.before_seq = valid.front().seq;
            losses.events.insert(losses.events.begin(), event);
            losses.lost_count += head_gap;
        }
        const std::uint16_t tail_gap = seq_forward(valid.back().seq, bounds.last_seq);
        if (tail_gap >= 1 && tail_gap <= options.loss_window) {
            LossEvent event;
            event.detected_at_ns = valid.back().recv_ts_ns.value_or(0);
            event.gap = tail_gap;
            event.after_seq = valid.back().seq;
            event.before_seq = static_cast<std::uint16_t>(bounds.last_seq + 1);
            losses.events.push_back(event);
            losses.lost_count += tail_gap;
        }
    }
    report.lost_count = losses.lost_count;
    report.loss_events = std::move(losses.events);
    report.loss_percent =
        100.0 * static_cast<double>(report.lost_count) /
        static_cast<double>(report.received_count + report.lost_count);

    report.reordered_count = detect_reorders(valid).reordered_count;
    report.per_percent = per(report.corrupted_count, report.received_count);

    const TrafficRate rate = traffic_rate(arrivals, options.duration_s);
    report.total_bytes = rate.total_bytes;
    report.transmission_duration_s = rate.duration_s;
    report.traffic_rate_bps = rate.bits_per_s;
    report.traffic_rate_Bps = rate.bytes_per_s;

    if (compute_delays) {
        const DelaySeries delays = delay_series(valid);
        report.delay = mean_one_way_delay(delays);
        const JitterSeries jitters = jitter_series(delays);
        if (!jitters.jitters.empty())
            report.jitter = mean_abs_jitter(jitters);
    }
    return report;
}

} // namespace

QosReport analyze(const std::vector<PacketRecord>& arrivals, const SendLog& log,
                  const AnalyzeOptions& options) {
    if (arrivals.empty())
        throw EmptyStream("analyze: no arrivals");

    const std::string& stream_id = arrivals.front().stream_id;
    StreamBounds bounds;
    for (const SendLogEntry& e : log.entries) {
        if (e.stream_id != stream_id)
            continue;
        if (!bounds.known) {
            bounds.first_seq = e.seq;
            bounds.known = true;
        }
        bounds.last_seq = e.seq;
    }
    return analyze_impl(arrivals, bounds, /*compute_delays=*/true, options);
}

QosReport analyze(const std::vector<PacketRecord>& arrivals,
                  const AnalyzeOptions& options) {
    bool have_send_ts = !arrivals.empty();
    for (const PacketRecord& r : arrivals)
        if (!r.send_ts_ns)
            have_send_ts = false;
    return analyze_impl(arrivals, StreamBounds{}, have_send_ts, options);
}

} // namespace qoslab

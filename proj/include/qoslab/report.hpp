#ifndef QOSLAB_REPORT_HPP
#define QOSLAB_REPORT_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qoslab/metrics.hpp"

namespace qoslab {

enum class RankMark { Best, Worst, Neutral };

/// Cross-stream comparison: one row per QoS parameter, one column per
/// stream, each cell marked best / worst / neutral. Best means max for
/// rate, min for delay, loss and jitter magnitudes; ties stay neutral.
struct RankingTable {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::vector<double>> values; // [row][col]
    std::vector<std::vector<RankMark>> marks;
};

const char* to_string(RankMark mark);

/// The three per-stream output files: `received.csv` (index, seq,
/// recv_ts_ns), `loss_events.csv` (detected_at_ns, gap) and
/// `loss_cumulative.csv` (detected_at_ns, running loss total).
void emit_stream_files(const QosReport& report,
                       const std::vector<PacketRecord>& arrivals,
                       const std::filesystem::path& dir);

/// Plot-ready series: per-packet delay and jitter in integer nanoseconds
/// plus a windowed rate series (default window one second).
void emit_timeseries(const QosReport& report,
                     const std::vector<PacketRecord>& arrivals,
                     const std::filesystem::path& dir, double rate_window_s = 1.0);

/// Writes `summary.json` (every report field per port pair) and
/// `ranking.csv`, returning the ranking table.
RankingTable emit_summary(const std::map<std::string, QosReport>& reports,
                          const std::filesystem::path& dir);

RankingTable build_ranking(const std::map<std::string, QosReport>& reports);

// JSON round trip for QosReport; delay/jitter keys are omitted when absent.
std::string qos_report_to_json(const QosReport& report);
QosReport qos_report_from_json(const std::string& text);

} // namespace qoslab

#endif

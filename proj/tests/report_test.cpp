#include "qoslab/report.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include <json.hpp>

#include "qoslab/channel.hpp"
#include "qoslab/rng.hpp"
#include "test_util.hpp"

namespace qoslab {
namespace {

using test::log_from_records;
using test::make_sent_records;
using test::read_file;
using test::receive_all;
using test::temp_dir;

QosReport sample_report() {
    QosReport report;
    report.total_bytes = 5'488'000;
    report.transmission_duration_s = 60.0;
    report.traffic_rate_bps = 5'488'000.0 * 8 / 60.0;
    report.traffic_rate_Bps = 5'488'000.0 / 60.0;
    report.delay = DelayStats{0.2816069, 0.2600981, 0.2999594};
    report.jitter = JitterStats{0.0109990, -0.0284344, 0.0386253};
    report.received_count = 3986;
    report.lost_count = 14;
    report.loss_percent = 0.35;
    report.corrupted_count = 2;
    report.per_percent = 0.0501756;
    report.reordered_count = 3;
    report.loss_events = {{123'456'789, 1, 10, 12}, {987'654'321, 2, 50, 53}};
    return report;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        lines.push_back(line);
    return lines;
}

TEST(StreamFiles, CumulativeColumnIsPrefixSumOfGaps) {
    QosReport report;
    report.loss_events = {{100, 1, 0, 2}, {200, 2, 5, 8}, {300, 1, 9, 11}};
    const auto dir = temp_dir("stream_files");
    emit_stream_files(report, {}, dir);

    const auto cumulative = lines_of(read_file(dir / "loss_cumulative.csv"));
    ASSERT_EQ(cumulative.size(), 4u);
    EXPECT_EQ(cumulative[0], "detected_at_ns,cumulative_lost");
    EXPECT_EQ(cumulative[1], "100,1");
    EXPECT_EQ(cumulative[2], "200,3");
    EXPECT_EQ(cumulative[3], "300,4");

    const auto events = lines_of(read_file(dir / "loss_events.csv"));
    ASSERT_EQ(events.size(), 4u);
    EXPECT_EQ(events[1], "100,1");
    EXPECT_EQ(events[2], "200,2");
}

TEST(StreamFiles, ZeroLossReportWritesHeadersOnly) {
    const auto dir = temp_dir("stream_files_clean");
    emit_stream_files(QosReport{}, {}, dir);
    EXPECT_EQ(read_file(dir / "loss_events.csv"), "detected_at_ns,gap\n");
    EXPECT_EQ(read_file(dir / "loss_cumulative.csv"),
              "detected_at_ns,cumulative_lost\n");
    EXPECT_EQ(read_file(dir / "received.csv"), "index,seq,recv_ts_ns\n");
}

TEST(StreamFiles, ReceivedFileIndexesArrivals) {
    const auto arrivals = receive_all(make_sent_records(3, 100), 5);
    const auto dir = temp_dir("stream_files_rcv");
    emit_stream_files(QosReport{}, arrivals, dir);
    const auto lines = lines_of(read_file(dir / "received.csv"));
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[1], "0,100,5");
    EXPECT_EQ(lines[2], "1,101,1000005");
    EXPECT_EQ(lines[3], "2,102,2000005");
}

TEST(StreamFiles, PaperStream2FinalCumulativeValueIs71) {
    // 44386 sent, 71 dropped: the cumulative file must end at 71.
    const auto sent = make_sent_records(44386);
    const SendLog log = log_from_records(sent);
    auto arrivals = receive_all(sent, 2'000'000);
    Rng rng(71);
    std::set<std::size_t> drop;
    while (drop.size() < 71)
        drop.insert(1 + rng.uniform_int(0, arrivals.size() - 3));
    std::vector<PacketRecord> kept;
    for (std::size_t i = 0; i < arrivals.size(); ++i)
        if (!drop.contains(i))
            kept.push_back(arrivals[i]);
    const QosReport report = analyze(kept, log);
    ASSERT_EQ(report.lost_count, 71u);

    const auto dir = temp_dir("stream_files_71");
    emit_stream_files(report, kept, dir);
    const auto lines = lines_of(read_file(dir / "loss_cumulative.csv"));
    ASSERT_GE(lines.size(), 2u);
    const std::string& last = lines.back();
    EXPECT_EQ(last.substr(last.find(',') + 1), "71");
}

TEST(Timeseries, DelayAndJitterSeriesAreIntegerNanoseconds) {
    auto arrivals = receive_all(make_sent_records(4), 0);
    *arrivals[0].recv_ts_ns += 10;
    *arrivals[1].recv_ts_ns += 25;
    *arrivals[2].recv_ts_ns += 15;
    *arrivals[3].recv_ts_ns += 15;
    const auto dir = temp_dir("timeseries");
    emit_timeseries(QosReport{}, arrivals, dir);

    const auto delays = lines_of(read_file(dir / "delay_series.csv"));
    ASSERT_EQ(delays.size(), 5u);
    EXPECT_EQ(delays[1], "0,10");
    EXPECT_EQ(delays[2], "1,25");

    const auto jitters = lines_of(read_file(dir / "jitter_series.csv"));
    ASSERT_EQ(jitters.size(), 4u);
    EXPECT_EQ(jitters[1], "0,15");
    EXPECT_EQ(jitters[2], "1,-10");
    EXPECT_EQ(jitters[3], "2,0");
}

TEST(Timeseries, WindowedRateSumsBytesPerSecond) {
    // 10 packets 100 ms apart: windows of 1 s hold 10, then 10, then 1.
    const auto arrivals = receive_all(make_sent_records(21, 0, 100'000'000), 0);
    const auto dir = temp_dir("timeseries_rate");
    emit_timeseries(QosReport{}, arrivals, dir, 1.0);
    const auto lines = lines_of(read_file(dir / "rate_windowed.csv"));
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "window_index,bytes,bits_per_s");
    EXPECT_EQ(lines[1].substr(0, 8), "0,13720,");
    EXPECT_EQ(lines[2].substr(0, 8), "1,13720,");
    EXPECT_EQ(lines[3].substr(0, 7), "2,1372,");
}

TEST(Timeseries, MissingSendTimestampsSkipDelayFiles) {
    auto arrivals = receive_all(make_sent_records(5), 0);
    for (PacketRecord& r : arrivals)
        r.send_ts_ns.reset();
    const auto dir = temp_dir("timeseries_degraded");
    emit_timeseries(QosReport{}, arrivals, dir);
    EXPECT_FALSE(std::filesystem::exists(dir / "delay_series.csv"));
    EXPECT_FALSE(std::filesystem::exists(dir / "jitter_series.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "rate_windowed.csv"));
    EXPECT_THROW(emit_timeseries(QosReport{}, {}, dir), EmptySeries);
}

TEST(ReportJson, RoundTripsToFullPrecision) {
    const QosReport report = sample_report();
    const QosReport parsed = qos_report_from_json(qos_report_to_json(report));
    EXPECT_EQ(parsed.total_bytes, report.total_bytes);
    EXPECT_EQ(parsed.transmission_duration_s, report.transmission_duration_s);
    EXPECT_EQ(parsed.traffic_rate_bps, report.traffic_rate_bps);
    EXPECT_EQ(parsed.traffic_rate_Bps, report.traffic_rate_Bps);
    ASSERT_TRUE(parsed.delay.has_value());
    EXPECT_EQ(parsed.delay->mean_s, report.delay->mean_s);
    EXPECT_EQ(parsed.delay->min_s, report.delay->min_s);
    EXPECT_EQ(parsed.delay->max_s, report.delay->max_s);
    ASSERT_TRUE(parsed.jitter.has_value());
    EXPECT_EQ(parsed.jitter->mean_abs_s, report.jitter->mean_abs_s);
    EXPECT_EQ(parsed.jitter->min_s, report.jitter->min_s);
    EXPECT_EQ(parsed.jitter->max_s, report.jitter->max_s);
    EXPECT_EQ(parsed.received_count, report.received_count);
    EXPECT_EQ(parsed.lost_count, report.lost_count);
    EXPECT_EQ(parsed.loss_percent, report.loss_percent);
    EXPECT_EQ(parsed.corrupted_count, report.corrupted_count);
    EXPECT_EQ(parsed.per_percent, report.per_percent);
    EXPECT_EQ(parsed.reordered_count, report.reordered_count);
    EXPECT_EQ(parsed.loss_events, report.loss_events);

    QosReport degraded = report;
    degraded.delay.reset();
    degraded.jitter.reset();
    const QosReport reparsed = qos_report_from_json(qos_report_to_json(degraded));
    EXPECT_FALSE(reparsed.delay.has_value());
    EXPECT_FALSE(reparsed.jitter.has_value());
}

TEST(Summary, ReparsedValuesEqualInMemoryReports) {
    std::map<std::string, QosReport> reports;
    reports["5000-1240"] = sample_report();
    QosReport second = sample_report();
    second.traffic_rate_bps *= 5;
    second.loss_percent = 0.05;
    second.lost_count = 2;
    reports["5002-1242"] = second;

    const auto dir = temp_dir("summary");
    emit_summary(reports, dir);

    const nlohmann::json summary = nlohmann::json::parse(read_file(dir / "summary.json"));
    for (const auto& [label, report] : reports) {
        const nlohmann::json& j = summary.at("streams").at(label);
        const QosReport parsed = qos_report_from_json(j.dump());
        EXPECT_EQ(parsed.traffic_rate_bps, report.traffic_rate_bps);
        EXPECT_EQ(parsed.loss_percent, report.loss_percent);
        EXPECT_EQ(parsed.lost_count, report.lost_count);
        EXPECT_EQ(parsed.delay->mean_s, report.delay->mean_s);
    }
    EXPECT_TRUE(summary.contains("ranking"));
}

TEST(Ranking, MarksExtremalCellsPerRowDirection) {
    std::map<std::string, QosReport> reports;
    QosReport s1 = sample_report();
    s1.traffic_rate_bps = 0.7e6;
    s1.loss_percent = 0.38;
    s1.delay = DelayStats{2.83204, 0.2219906, 5.9112452};
    s1.jitter = JitterStats{0.00511228, -4.0012545, 4.0012545};
    QosReport s2 = sample_report();
    s2.traffic_rate_bps = 0.9e6;
    s2.loss_percent = 0.16;
    s2.delay = DelayStats{0.2711245, 0.1744169, 4.1904033};
    s2.jitter = JitterStats{0.000098, -3.9998893, 4.0008256};
    QosReport s3 = sample_report();
    s3.traffic_rate_bps = 3.7e6;
    s3.loss_percent = 0.05;
    s3.delay = DelayStats{0.2156974, 0.1851437, 0.2541312};
    s3.jitter = JitterStats{2.75858e-5, -0.2343453, 0.0179553};
    reports["5000-1240"] = s1;
    reports["5001-1241"] = s2;
    reports["5002-1242"] = s3;

    const RankingTable table = build_ranking(reports);
    ASSERT_EQ(table.cols,
              (std::vector<std::string>{"5000-1240", "5001-1241", "5002-1242"}));

    auto row_marks = [&](const std::string& name) {
        for (std::size_t i = 0; i < table.rows.size(); ++i)
            if (table.rows[i] == name)
                return table.marks[i];
        ADD_FAILURE() << "missing row " << name;
        return std::vector<RankMark>{};
    };

    // Rate: best is the maximum.
    EXPECT_EQ(row_marks("rate_bps")[2], RankMark::Best);
    EXPECT_EQ(row_marks("rate_bps")[0], RankMark::Worst);
    // Delays: best is the minimum; the global minimum delay sits on stream 2.
    EXPECT_EQ(row_marks("min_delay_s")[1], RankMark::Best);
    EXPECT_EQ(row_marks("min_delay_s")[0], RankMark::Worst);
    EXPECT_EQ(row_marks("avg_delay_s")[2], RankMark::Best);
    EXPECT_EQ(row_marks("max_delay_s")[2], RankMark::Best);
    EXPECT_EQ(row_marks("max_delay_s")[0], RankMark::Worst);
    // Signed jitter extremes rank by magnitude: stream 3 is closest to zero.
    EXPECT_EQ(row_marks("min_jitter_s")[2], RankMark::Best);
    EXPECT_EQ(row_marks("min_jitter_s")[0], RankMark::Worst);
    EXPECT_EQ(row_marks("max_jitter_s")[2], RankMark::Best);
    EXPECT_EQ(row_marks("avg_jitter_s")[2], RankMark::Best);
    EXPECT_EQ(row_marks("avg_jitter_s")[0], RankMark::Worst);
    EXPECT_EQ(row_marks("loss_percent")[2], RankMark::Best);
    EXPECT_EQ(row_marks("loss_percent")[0], RankMark::Worst);
}

TEST(Ranking, TiesStayNeutral) {
    std::map<std::string, QosReport> reports;
    QosReport a = sample_report();
    QosReport b = sample_report();
    QosReport c = sample_report();
    a.loss_percent = b.loss_percent = 0.1;
    c.loss_percent = 0.5;
    reports["a"] = a;
    reports["b"] = b;
    reports["c"] = c;

    const RankingTable table = build_ranking(reports);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i] == "loss_percent") {
            EXPECT_EQ(table.marks[i][0], RankMark::Neutral);
            EXPECT_EQ(table.marks[i][1], RankMark::Neutral);
            EXPECT_EQ(table.marks[i][2], RankMark::Worst);
        } else if (table.rows[i] == "rate_bps") {
            // All three rates equal: nothing marked.
            for (const RankMark mark : table.marks[i])
                EXPECT_EQ(mark, RankMark::Neutral);
        }
    }
}

TEST(Ranking, SkipsDelayRowsWhenAnyReportLacksThem) {
    std::map<std::string, QosReport> reports;
    QosReport a = sample_report();
    QosReport b = sample_report();
    b.delay.reset();
    b.jitter.reset();
    reports["a"] = a;
    reports["b"] = b;
    const RankingTable table = build_ranking(reports);
    EXPECT_EQ(table.rows, (std::vector<std::string>{"rate_bps", "loss_percent"}));
}

} // namespace
} // namespace qoslab

#include "qoslab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace qoslab {

using nlohmann::json;

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoFailure("cannot open report file for writing: " + path.string());
    return out;
}

} // namespace

const char* to_string(RankMark mark) {
    switch (mark) {
    case RankMark::Best:
        return "best";
    case RankMark::Worst:
        return "worst";
    case RankMark::Neutral:
        break;
    }
    return "neutral";
}

void emit_stream_files(const QosReport& report,
                       const std::vector<PacketRecord>& arrivals,
                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    auto received = open_csv(dir / "received.csv");
    received << "index,seq,recv_ts_ns\n";
    std::size_t index = 0;
    for (const PacketRecord& r : arrivals)
        received << index++ << ',' << r.seq << ',' << r.recv_ts_ns.value_or(0) << '\n';

    auto events = open_csv(dir / "loss_events.csv");
    events << "detected_at_ns,gap\n";
    for (const LossEvent& e : report.loss_events)
        events << e.detected_at_ns << ',' << e.gap << '\n';

    auto cumulative = open_csv(dir / "loss_cumulative.csv");
    cumulative << "detected_at_ns,cumulative_lost\n";
    std::uint64_t running = 0;
    for (const LossEvent& e : report.loss_events) {
        running += e.gap;
        cumulative << e.detected_at_ns << ',' << running << '\n';
    }
}

void emit_timeseries(const QosReport& /*report*/,
                     const std::vector<PacketRecord>& arrivals,
                     const std::filesystem::path& dir, double rate_window_s) {
    if (arrivals.empty())
        throw EmptySeries("emit_timeseries: no arrivals");
    std::filesystem::create_directories(dir);

    const bool have_delays = std::all_of(
        arrivals.begin(), arrivals.end(),
        [](const PacketRecord& r) { return r.send_ts_ns && r.recv_ts_ns; });

    if (have_delays) {
        std::vector<Nanos> delays_ns;
        delays_ns.reserve(arrivals.size());
        for (const PacketRecord& r : arrivals)
            delays_ns.push_back(*r.recv_ts_ns - *r.send_ts_ns);

        auto delay_csv = open_csv(dir / "delay_series.csv");
        delay_csv << "index,delay_ns\n";
        for (std::size_t i = 0; i < delays_ns.size(); ++i)
            delay_csv << i << ',' << delays_ns[i] << '\n';

        auto jitter_csv = open_csv(dir / "jitter_series.csv");
        jitter_csv << "index,jitter_ns\n";
        for (std::size_t i = 0; i + 1 < delays_ns.size(); ++i)
            jitter_csv << i << ',' << (delays_ns[i + 1] - delays_ns[i]) << '\n';
    }

    // Windowed receive rate over wall time, window boundaries anchored at
    // the first arrival.
    const Nanos window_ns = to_nanos(rate_window_s);
    if (window_ns <= 0)
        throw ConfigError("emit_timeseries: rate window must be > 0");
    auto rate_csv = open_csv(dir / "rate_windowed.csv");
    rate_csv << "window_index,bytes,bits_per_s\n";
    std::optional<Nanos> base;
    std::map<std::int64_t, std::uint64_t> window_bytes;
    for (const PacketRecord& r : arrivals) {
        if (!r.recv_ts_ns)
            continue;
        if (!base)
            base = *r.recv_ts_ns;
        window_bytes[(*r.recv_ts_ns - *base) / window_ns] += r.size_bytes;
    }
    for (const auto& [idx, bytes] : window_bytes)
        rate_csv << idx << ',' << bytes << ','
                 << json(static_cast<double>(bytes * 8) / rate_window_s).dump() << '\n';
}

namespace {

struct RowSpec {
    std::string name;
    bool maximise;      // best = maximum (rate); otherwise best = minimum
    bool magnitude;     // rank |value| instead of the signed value
    bool available = true;
    std::vector<double> values;
};

std::vector<RankMark> mark_row(const RowSpec& row) {
    const std::size_t n = row.values.size();
    std::vector<RankMark> marks(n, RankMark::Neutral);
    if (n < 2)
        return marks;

    auto key = [&](double v) { return row.magnitude ? std::abs(v) : v; };
    double best = key(row.values[0]);
    double worst = key(row.values[0]);
    for (double v : row.values) {
        const double k = key(v);
        if (row.maximise) {
            best = std::max(best, k);
            worst = std::min(worst, k);
        } else {
            best = std::min(best, k);
            worst = std::max(worst, k);
        }
    }
    const auto count = [&](double target) {
        return std::count_if(row.values.begin(), row.values.end(),
                             [&](double v) { return key(v) == target; });
    };
    for (std::size_t i = 0; i < n; ++i) {
        const double k = key(row.values[i]);
        if (k == best && best != worst && count(best) == 1)
            marks[i] = RankMark::Best;
        else if (k == worst && best != worst && count(worst) == 1)
            marks[i] = RankMark::Worst;
    }
    return marks;
}

} // namespace

RankingTable build_ranking(const std::map<std::string, QosReport>& reports) {
    if (reports.empty())
        throw EmptyStream("build_ranking: no reports");

    RankingTable table;
    for (const auto& entry : reports)
        table.cols.push_back(entry.first);

    const bool have_delay = std::all_of(reports.begin(), reports.end(),
                                        [](const auto& kv) { return kv.second.delay.has_value(); });
    const bool have_jitter = std::all_of(reports.begin(), reports.end(),
                                         [](const auto& kv) { return kv.second.jitter.has_value(); });

    std::vector<RowSpec> rows;
    auto add_row = [&](std::string name, bool maximise, bool magnitude, auto getter,
                       bool available) {
        if (!available)
            return;
        RowSpec row{std::move(name), maximise, magnitude, true, {}};
        for (const auto& entry : reports)
            row.values.push_back(getter(entry.second));
        rows.push_back(std::move(row));
    };

    add_row("rate_bps", true, false,
            [](const QosReport& r) { return r.traffic_rate_bps; }, true);
    add_row("max_delay_s", false, false,
            [](const QosReport& r) { return r.delay->max_s; }, have_delay);
    add_row("avg_delay_s", false, false,
            [](const QosReport& r) { return r.delay->mean_s; }, have_delay);
    add_row("min_delay_s", false, false,
            [](const QosReport& r) { return r.delay->min_s; }, have_delay);
    // Signed jitter extremes rank by distance from zero.
    add_row("max_jitter_s", false, true,
            [](const QosReport& r) { return r.jitter->max_s; }, have_jitter);
    add_row("avg_jitter_s", false, false,
            [](const QosReport& r) { return r.jitter->mean_abs_s; }, have_jitter);
    add_row("min_jitter_s", false, true,
            [](const QosReport& r) { return r.jitter->min_s; }, have_jitter);
    add_row("loss_percent", false, false,
            [](const QosReport& r) { return r.loss_percent; }, true);

    for (RowSpec& row : rows) {
        table.rows.push_back(row.name);
        table.marks.push_back(mark_row(row));
        table.values.push_back(std::move(row.values));
    }
    return table;
}

namespace {

json report_to_json_value(const QosReport& r) {
    json j;
    j["total_bytes"] = r.total_bytes;
    j["transmission_duration_s"] = r.transmission_duration_s;
    j["traffic_rate_bps"] = r.traffic_rate_bps;
    j["traffic_rate_Bps"] = r.traffic_rate_Bps;
    if (r.delay) {
        j["mean_delay_s"] = r.delay->mean_s;
        j["min_delay_s"] = r.delay->min_s;
        j["max_delay_s"] = r.delay->max_s;
    }
    if (r.jitter) {
        j["mean_abs_jitter_s"] = r.jitter->mean_abs_s;
        j["min_jitter_s"] = r.jitter->min_s;
        j["max_jitter_s"] = r.jitter->max_s;
    }
    j["received_count"] = r.received_count;
    j["lost_count"] = r.lost_count;
    j["loss_percent"] = r.loss_percent;
    j["corrupted_count"] = r.corrupted_count;
    j["per_percent"] = r.per_percent;
    j["reordered_count"] = r.reordered_count;
    json events = json::array();
    for (const LossEvent& e : r.loss_events)
        events.push_back({{"detected_at_ns", e.detected_at_ns},
                          {"gap", e.gap},
                          {"after_seq", e.after_seq},
                          {"before_seq", e.before_seq}});
    j["loss_events"] = std::move(events);
    return j;
}

QosReport report_from_json_value(const json& j) {
    QosReport r;
    r.total_bytes = j.at("total_bytes").get<std::uint64_t>();
    r.transmission_duration_s = j.at("transmission_duration_s").get<double>();
    r.traffic_rate_bps = j.at("traffic_rate_bps").get<double>();
    r.traffic_rate_Bps = j.at("traffic_rate_Bps").get<double>();
    if (j.contains("mean_delay_s"))
        r.delay = DelayStats{j.at("mean_delay_s").get<double>(),
                             j.at("min_delay_s").get<double>(),
                             j.at("max_delay_s").get<double>()};
    if (j.contains("mean_abs_jitter_s"))
        r.jitter = JitterStats{j.at("mean_abs_jitter_s").get<double>(),
                               j.at("min_jitter_s").get<double>(),
                               j.at("max_jitter_s").get<double>()};
    r.received_count = j.at("received_count").get<std::uint64_t>();
    r.lost_count = j.at("lost_count").get<std::uint64_t>();
    r.loss_percent = j.at("loss_percent").get<double>();
    r.corrupted_count = j.at("corrupted_count").get<std::uint64_t>();
    r.per_percent = j.at("per_percent").get<double>();
    r.reordered_count = j.at("reordered_count").get<std::uint64_t>();
    for (const json& e : j.at("loss_events")) {
        LossEvent event;
        event.detected_at_ns = e.at("detected_at_ns").get<Nanos>();
        event.gap = e.at("gap").get<std::uint32_t>();
        event.after_seq = e.at("after_seq").get<std::uint16_t>();
        event.before_seq = e.at("before_seq").get<std::uint16_t>();
        r.loss_events.push_back(event);
    }
    return r;
}

} // namespace

std::string qos_report_to_json(const QosReport& report) {
    return report_to_json_value(report).dump(2);
}

QosReport qos_report_from_json(const std::string& text) {
    try {
        return report_from_json_value(json::parse(text));
    } catch (const json::exception& ex) {
        throw ParseFailure(std::string("qos report json: ") + ex.what());
    }
}

RankingTable emit_summary(const std::map<std::string, QosReport>& reports,
                          const std::filesystem::path& dir) {
    if (reports.empty())
        throw EmptyStream("emit_summary: no reports");
    std::filesystem::create_directories(dir);

    json summary;
    for (const auto& [label, report] : reports)
        summary["streams"][label] = report_to_json_value(report);

    const RankingTable table = build_ranking(reports);
    json ranking = json::array();
    for (std::size_t row = 0; row < table.rows.size(); ++row)
        for (std::size_t col = 0; col < table.cols.size(); ++col)
            ranking.push_back({{"parameter", table.rows[row]},
                               {"stream", table.cols[col]},
                               {"value", table.values[row][col]},
                               {"mark", to_string(table.marks[row][col])}});
    summary["ranking"] = std::move(ranking);

    std::ofstream out(dir / "summary.json");
    if (!out)
        throw IoFailure("cannot open summary.json for writing in " + dir.string());
    out << summary.dump(2) << '\n';

    auto csv = open_csv(dir / "ranking.csv");
    csv << "parameter,stream,value,mark\n";
    for (std::size_t row = 0; row < table.rows.size(); ++row)
        for (std::size_t col = 0; col < table.cols.size(); ++col) {
            // Shortest round-trip representation, same as the JSON encoder.
            csv << table.rows[row] << ',' << table.cols[col] << ','
                << json(table.values[row][col]).dump() << ','
                << to_string(table.marks[row][col]) << '\n';
        }
    return table;
}

} // namespace qoslab

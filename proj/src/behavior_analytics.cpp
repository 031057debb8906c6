#include "ragweave/behavior_analytics.hpp"

#include <cstdio>

namespace ragweave::analytics {

double BucketTally::share(const std::string& modality) const {
    if (searches_total == 0) return 0.0;
    auto it = modality_counts.find(modality);
    const std::size_t count = it == modality_counts.end() ? 0 : it->second;
    return static_cast<double>(count) / static_cast<double>(searches_total);
}

BehaviorReport analyze(std::span<const engine::RecordLine> records,
                       const std::string& bucket_key, bool include_skipped) {
    BehaviorReport report;
    for (const auto& line : records) {
        std::string bucket = "all";
        if (!bucket_key.empty()) {
            auto it = line.meta.find(bucket_key);
            if (it == line.meta.end()) {
                raise(Errc::UnknownBucketField,
                      "record '" + line.id + "' has no field '" + bucket_key + "'");
            }
            bucket = it->second;
        }
        auto& tally = report.buckets[bucket];
        ++tally.samples;
        std::size_t calls = 0;
        for (const auto& search : line.record.searches) {
            if (!search.executed && !include_skipped) continue;
            ++calls;
            ++tally.modality_counts[std::string(
                grammar::modality_name(search.query.modality))];
        }
        tally.searches_total += calls;
        ++tally.call_histogram[calls];
    }
    return report;
}

BehaviorReport merge(const BehaviorReport& a, const BehaviorReport& b) {
    BehaviorReport out = a;
    for (const auto& [bucket, tally] : b.buckets) {
        auto& dst = out.buckets[bucket];
        dst.samples += tally.samples;
        dst.searches_total += tally.searches_total;
        for (const auto& [calls, freq] : tally.call_histogram) {
            dst.call_histogram[calls] += freq;
        }
        for (const auto& [modality, count] : tally.modality_counts) {
            dst.modality_counts[modality] += count;
        }
    }
    return out;
}

std::string emit_plot_data(const BehaviorReport& report) {
    std::string csv = "bucket,statistic,key,value\n";
    char buf[64];
    auto fmt_double = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    for (const auto& [bucket, tally] : report.buckets) {
        csv += bucket + ",samples,," + std::to_string(tally.samples) + "\n";
        csv += bucket + ",searches_total,," + std::to_string(tally.searches_total) + "\n";
        for (const auto& [calls, freq] : tally.call_histogram) {
            csv += bucket + ",call_histogram," + std::to_string(calls) + "," +
                   std::to_string(freq) + "\n";
        }
        if (tally.shares_defined()) {
            for (const std::string modality : {"image", "region", "text"}) {
                csv += bucket + ",modality_share," + modality + "," +
                       fmt_double(tally.share(modality)) + "\n";
            }
        }
    }
    return csv;
}

} // namespace ragweave::analytics

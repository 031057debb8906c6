#pragma once

#include <map>
#include <span>
#include <string>

#include "ragweave/decode_engine.hpp"

namespace ragweave::analytics {

/// Raw per-bucket tallies; shares are derived so that merge() stays a plain
/// count-wise sum.
struct BucketTally {
    std::size_t samples = 0;
    std::size_t searches_total = 0;
    std::map<std::size_t, std::size_t> call_histogram;     // calls per sample -> frequency
    std::map<std::string, std::size_t> modality_counts;    // modality name -> calls

    bool shares_defined() const { return searches_total > 0; }
    double share(const std::string& modality) const;
};

struct BehaviorReport {
    std::map<std::string, BucketTally> buckets;
};

/// Tallies executed searches per record, grouped by the record's value for
/// bucket_key (empty key = one "all" bucket). Skipped spans are excluded
/// unless include_skipped is set.
BehaviorReport analyze(std::span<const engine::RecordLine> records,
                       const std::string& bucket_key, bool include_skipped = false);

BehaviorReport merge(const BehaviorReport& a, const BehaviorReport& b);

/// Stable CSV: header then (bucket, statistic, key, value) rows in sorted
/// order. Share rows are omitted for buckets with no searches.
std::string emit_plot_data(const BehaviorReport& report);

} // namespace ragweave::analytics

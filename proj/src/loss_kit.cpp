#include "ragweave/loss_kit.hpp"

#include <algorithm>
#include <cmath>

namespace ragweave::loss {

namespace {

void check_spans(const std::vector<CharSpan>& spans, const char* what) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
        if (spans[i].begin >= spans[i].end) {
            raise(Errc::MalformedSpans, std::string(what) + ": empty or inverted span");
        }
        if (i > 0 && spans[i].begin < spans[i - 1].end) {
            raise(Errc::MalformedSpans, std::string(what) + ": overlapping or descending spans");
        }
    }
}

void check_pair(const SoftMaskPair& pair) {
    if (pair.predicted.size() != pair.target.size()) {
        raise(Errc::ShapeMismatch, "predicted and target mask sizes differ");
    }
}

struct TverskyCounts {
    double tp = 0.0;
    double fn = 0.0;
    double fp = 0.0;
};

TverskyCounts soft_counts(const SoftMaskPair& pair) {
    TverskyCounts c;
    for (std::size_t i = 0; i < pair.predicted.size(); ++i) {
        const double p = pair.predicted[i];
        const double t = pair.target[i];
        c.tp += p * t;
        c.fn += (1.0 - p) * t;
        c.fp += p * (1.0 - t);
    }
    return c;
}

} // namespace

LossMask info_mask(const OffsetMap& offsets, const std::vector<CharSpan>& info_spans) {
    check_spans(offsets, "offset map");
    check_spans(info_spans, "info spans");
    LossMask mask(offsets.size(), 1);
    std::size_t k = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        // Spans wholly before this token can never overlap later tokens.
        while (k < info_spans.size() && info_spans[k].end <= offsets[i].begin) ++k;
        if (k < info_spans.size() && offsets[i].begin < info_spans[k].end &&
            offsets[i].end > info_spans[k].begin) {
            mask[i] = 0;
        }
    }
    return mask;
}

double masked_lm_loss(std::span<const double> logprobs, const LossMask& mask) {
    if (logprobs.size() != mask.size()) {
        raise(Errc::ShapeMismatch, "logprob and mask lengths differ");
    }
    double kept = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            kept += 1.0;
            total += logprobs[i];
        }
    }
    if (kept == 0.0) {
        raise(Errc::AllMasked, "no unmasked tokens to average over");
    }
    return -total / kept;
}

std::vector<std::pair<std::size_t, std::size_t>> merge_bio_spans(std::span<const BioTag> tags) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    bool open = false;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        switch (tags[i]) {
            case BioTag::B:
                spans.emplace_back(i, i);
                open = true;
                break;
            case BioTag::I:
                if (open) {
                    spans.back().second = i;
                } else {
                    spans.emplace_back(i, i); // lenient: orphan I starts a span
                    open = true;
                }
                break;
            case BioTag::O:
                open = false;
                break;
        }
    }
    return spans;
}

double span_tag_cross_entropy(std::span<const double> tag_logprobs,
                              std::span<const BioTag> gold) {
    if (gold.empty() || tag_logprobs.size() != gold.size() * 3) {
        raise(Errc::ShapeMismatch, "tag logprobs must be L x 3 with L >= 1");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        total += tag_logprobs[i * 3 + static_cast<std::size_t>(gold[i])];
    }
    return -total / static_cast<double>(gold.size());
}

double focal_tversky(const SoftMaskPair& pair, const FocalTverskyParams& params) {
    check_pair(pair);
    const auto c = soft_counts(pair);
    const double numer = c.tp + kTverskySmooth;
    const double denom = c.tp + params.alpha * c.fn + params.beta * c.fp + kTverskySmooth;
    const double ti = numer / denom;
    return std::pow(1.0 - ti, params.gamma);
}

std::vector<double> focal_tversky_grad(const SoftMaskPair& pair,
                                       const FocalTverskyParams& params) {
    check_pair(pair);
    const auto c = soft_counts(pair);
    const double numer = c.tp + kTverskySmooth;
    const double denom = c.tp + params.alpha * c.fn + params.beta * c.fp + kTverskySmooth;
    const double ti = numer / denom;
    const double outer = -params.gamma * std::pow(1.0 - ti, params.gamma - 1.0);
    std::vector<double> grad(pair.predicted.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double t = pair.target[i];
        const double d_numer = t;
        const double d_denom = t - params.alpha * t + params.beta * (1.0 - t);
        const double d_ti = (d_numer * denom - numer * d_denom) / (denom * denom);
        grad[i] = outer * d_ti;
    }
    return grad;
}

double focal_tversky_aggregate(std::span<const SoftMaskPair> pairs,
                               const FocalTverskyParams& params) {
    if (pairs.empty()) {
        raise(Errc::EmptyInput, "no mask pairs to aggregate");
    }
    double total = 0.0;
    for (const auto& pair : pairs) total += focal_tversky(pair, params);
    return total / static_cast<double>(pairs.size());
}

double bce_loss(const SoftMaskPair& pair) {
    check_pair(pair);
    if (pair.predicted.empty()) {
        raise(Errc::EmptyInput, "empty mask pair");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pair.predicted.size(); ++i) {
        const double p = std::clamp(pair.predicted[i], kBceClamp, 1.0 - kBceClamp);
        const double t = pair.target[i];
        total += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    return -total / static_cast<double>(pair.predicted.size());
}

double gaussian_kl(const std::vector<std::vector<double>>& student,
                   const std::vector<std::vector<double>>& teacher,
                   double sigma) {
    if (student.empty()) {
        raise(Errc::EmptyInput, "at least one span is required");
    }
    if (student.size() != teacher.size()) {
        raise(Errc::ShapeMismatch, "span counts differ");
    }
    double total = 0.0;
    for (std::size_t s = 0; s < student.size(); ++s) {
        if (student[s].size() != teacher[s].size()) {
            raise(Errc::ShapeMismatch, "span embedding sizes differ");
        }
        double sq = 0.0;
        for (std::size_t j = 0; j < student[s].size(); ++j) {
            const double d = student[s][j] - teacher[s][j];
            sq += d * d;
        }
        total += sq / (2.0 * sigma * sigma);
    }
    return total / static_cast<double>(student.size());
}

} // namespace ragweave::loss

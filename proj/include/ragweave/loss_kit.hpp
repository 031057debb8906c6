#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ragweave/error.hpp"
#include "ragweave/token_grammar.hpp"

namespace ragweave::loss {

using grammar::CharSpan;

/// Per-token byte spans as reported by a tokenizer: ascending, non-overlapping,
/// each non-empty. Validated by the operations that consume it.
using OffsetMap = std::vector<CharSpan>;

/// 1 = token contributes to the LM loss, 0 = excluded (inside an info span).
using LossMask = std::vector<std::uint8_t>;

/// Mask out every token whose byte span overlaps an info span. Overlap is
/// strict on both ends: token (s_i, e_i) overlaps span (s_k, e_k) iff
/// s_i < e_k and e_i > s_k, so tokens that merely touch a boundary stay live.
LossMask info_mask(const OffsetMap& offsets, const std::vector<CharSpan>& info_spans);

/// Mean negative log-likelihood over unmasked tokens only. Throws AllMasked
/// when the mask keeps nothing (a data bug, not a zero loss).
double masked_lm_loss(std::span<const double> logprobs, const LossMask& mask);

enum class BioTag : std::uint8_t { B, I, O };

/// Inclusive [first, last] index spans of contiguous B->I chains. An orphan I
/// (at the start or after an O) begins a new span.
std::vector<std::pair<std::size_t, std::size_t>> merge_bio_spans(std::span<const BioTag> tags);

/// Tag cross-entropy for the span tagger given gold tags. tag_logprobs is
/// row-major L x 3, columns ordered (B, I, O).
double span_tag_cross_entropy(std::span<const double> tag_logprobs,
                              std::span<const BioTag> gold);

/// Soft predicted mask in [0,1] against a hard 0/1 target, both flattened
/// row-major over the same extent.
struct SoftMaskPair {
    std::vector<double> predicted;
    std::vector<double> target;
};

inline constexpr double kTverskySmooth = 1e-6;
inline constexpr double kBceClamp = 1e-7;

struct FocalTverskyParams {
    double alpha = 0.7;
    double beta = 0.3;
    double gamma = 4.0 / 3.0;
};

/// (1 - TI)^gamma over the soft Tversky index
/// TI = (TP + eps) / (TP + alpha*FN + beta*FP + eps) with soft counts
/// TP = sum p*t, FN = sum (1-p)*t, FP = sum p*(1-t).
double focal_tversky(const SoftMaskPair& pair, const FocalTverskyParams& params = {});

/// Analytic d(loss)/d(predicted), matching central finite differences.
std::vector<double> focal_tversky_grad(const SoftMaskPair& pair,
                                       const FocalTverskyParams& params = {});

/// Mean focal-Tversky over the positive spans' masks.
double focal_tversky_aggregate(std::span<const SoftMaskPair> pairs,
                               const FocalTverskyParams& params = {});

/// Pixel-mean binary cross-entropy; predictions clamped away from {0,1}.
double bce_loss(const SoftMaskPair& pair);

/// (1/N) * sum_s ||student_s - teacher_s||^2 / (2 sigma^2) over matched span
/// embedding slices.
double gaussian_kl(const std::vector<std::vector<double>>& student,
                   const std::vector<std::vector<double>>& teacher,
                   double sigma = 1.0);

struct LossParts {
    double lm = 0.0;
    double span = 0.0;
    double seg = 0.0;
    double bce = 0.0;
    double kl = 0.0;
};

struct LossWeights {
    double span = 1.0; // lambda_1
    double seg = 1.0;  // lambda_2
    double bce = 1.0;  // lambda_3
    double kl = 1.0;   // lambda_4
};

inline double combined_loss(const LossParts& parts, const LossWeights& w) {
    return parts.lm + w.span * parts.span + w.seg * parts.seg + w.bce * parts.bce +
           w.kl * parts.kl;
}

} // namespace ragweave::loss

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragweave/error.hpp"

namespace ragweave::eval {

/// Per-sample verdict, scored +1 / 0 / -1.
enum class Verdict { Hallucination = -1, Missing = 0, Accurate = 1 };

inline int verdict_score(Verdict v) { return static_cast<int>(v); }

std::string_view verdict_name(Verdict v);

/// Lowercases, deletes punctuation, removes English articles (a, an, the),
/// and collapses whitespace. ASCII-only transforms; other bytes pass through.
std::string normalize_answer(std::string_view text);

/// 1 iff either normalized string contains the other. Two empty answers
/// match; an empty answer never matches a non-empty one.
int relaxed_em(std::string_view prediction, std::string_view gold);

/// Harmonic mean of precision/recall over normalized whitespace tokens
/// (multiset intersection).
double token_f1(std::string_view prediction, std::string_view gold);

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual Verdict judge(std::string_view question, std::string_view prediction,
                          std::string_view gold) = 0;
};

/// Desk-scale stand-in for an LLM judge: refusal lexicon first (Missing),
/// then relaxed EM (Accurate), else Hallucination.
class DefaultJudge : public JudgeClient {
public:
    explicit DefaultJudge(std::vector<std::string> refusal_phrases);

    Verdict judge(std::string_view question, std::string_view prediction,
                  std::string_view gold) override;

private:
    std::vector<std::string> normalized_refusals_;
};

/// One phrase per line; blank lines and lines starting with '#' are skipped.
std::vector<std::string> load_refusal_lexicon(const std::string& path);

/// Rates in percent. accuracy + missing + hallucination = 100 and
/// truthfulness = accuracy - hallucination, both up to float rounding.
struct EvalCounts {
    std::size_t n = 0;
    double accuracy = 0.0;
    double missing = 0.0;
    double hallucination = 0.0;
    double truthfulness = 0.0;
};

struct EvalReport : EvalCounts {
    std::map<std::string, EvalCounts> buckets;
};

/// bucket_tags, when non-empty, must be sample-aligned with verdicts; empty
/// tags leave a sample out of every bucket but still in the totals.
EvalReport aggregate(std::span<const Verdict> verdicts,
                     std::span<const std::string> bucket_tags = {});

std::string eval_report_to_json(const EvalReport& report);

} // namespace ragweave::eval

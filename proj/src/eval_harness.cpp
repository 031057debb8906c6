#include "ragweave/eval_harness.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ragweave::eval {

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Accurate: return "accurate";
        case Verdict::Missing: return "missing";
        case Verdict::Hallucination: return "hallucination";
    }
    return {};
}

std::string normalize_answer(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (uc < 0x80 && std::ispunct(uc)) continue;
        lowered.push_back(uc < 0x80 ? static_cast<char>(std::tolower(uc)) : c);
    }
    std::istringstream words(lowered);
    std::string word;
    std::string out;
    while (words >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

int relaxed_em(std::string_view prediction, std::string_view gold) {
    const std::string p = normalize_answer(prediction);
    const std::string g = normalize_answer(gold);
    if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1 : 0;
    if (p.find(g) != std::string::npos) return 1;
    if (g.find(p) != std::string::npos) return 1;
    return 0;
}

double token_f1(std::string_view prediction, std::string_view gold) {
    auto tokenize = [](const std::string& s) {
        std::vector<std::string> tokens;
        std::istringstream stream(s);
        std::string token;
        while (stream >> token) tokens.push_back(token);
        return tokens;
    };
    const auto p = tokenize(normalize_answer(prediction));
    const auto g = tokenize(normalize_answer(gold));
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;

    std::map<std::string, int> gold_counts;
    for (const auto& t : g) ++gold_counts[t];
    int overlap = 0;
    for (const auto& t : p) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

DefaultJudge::DefaultJudge(std::vector<std::string> refusal_phrases) {
    normalized_refusals_.reserve(refusal_phrases.size());
    for (const auto& phrase : refusal_phrases) {
        auto normalized = normalize_answer(phrase);
        if (!normalized.empty()) normalized_refusals_.push_back(std::move(normalized));
    }
}

Verdict DefaultJudge::judge(std::string_view, std::string_view prediction,
                            std::string_view gold) {
    const std::string p = normalize_answer(prediction);
    if (p.empty()) return Verdict::Missing;
    for (const auto& refusal : normalized_refusals_) {
        if (p.find(refusal) != std::string::npos) return Verdict::Missing;
    }
    return relaxed_em(prediction, gold) ? Verdict::Accurate : Verdict::Hallucination;
}

std::vector<std::string> load_refusal_lexicon(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(Errc::IoError, "cannot open refusal lexicon '" + path + "'");
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(file, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        phrases.push_back(line);
    }
    return phrases;
}

namespace {

struct Tally {
    std::size_t n = 0;
    std::size_t accurate = 0;
    std::size_t missing = 0;
    std::size_t hallucination = 0;

    void add(Verdict v) {
        ++n;
        switch (v) {
            case Verdict::Accurate: ++accurate; break;
            case Verdict::Missing: ++missing; break;
            case Verdict::Hallucination: ++hallucination; break;
        }
    }

    EvalCounts counts() const {
        EvalCounts c;
        c.n = n;
        const double denom = static_cast<double>(n);
        c.accuracy = 100.0 * static_cast<double>(accurate) / denom;
        c.missing = 100.0 * static_cast<double>(missing) / denom;
        c.hallucination = 100.0 * static_cast<double>(hallucination) / denom;
        c.truthfulness = c.accuracy - c.hallucination;
        return c;
    }
};

} // namespace

EvalReport aggregate(std::span<const Verdict> verdicts,
                     std::span<const std::string> bucket_tags) {
    if (verdicts.empty()) raise(Errc::EmptyInput, "no verdicts to aggregate");
    if (!bucket_tags.empty() && bucket_tags.size() != verdicts.size()) {
        raise(Errc::ShapeMismatch, "bucket tags must align with verdicts");
    }
    Tally total;
    std::map<std::string, Tally> buckets;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        total.add(verdicts[i]);
        if (!bucket_tags.empty() && !bucket_tags[i].empty()) {
            buckets[bucket_tags[i]].add(verdicts[i]);
        }
    }
    EvalReport report;
    static_cast<EvalCounts&>(report) = total.counts();
    for (const auto& [tag, tally] : buckets) {
        report.buckets[tag] = tally.counts();
    }
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    using nlohmann::json;
    auto counts_to_json = [](const EvalCounts& c) {
        return json{{"n", c.n},
                    {"accuracy", c.accuracy},
                    {"missing", c.missing},
                    {"hallucination", c.hallucination},
                    {"truthfulness", c.truthfulness}};
    };
    json obj = counts_to_json(report);
    json buckets = json::object();
    for (const auto& [tag, counts] : report.buckets) {
        buckets[tag] = counts_to_json(counts);
    }
    obj["buckets"] = std::move(buckets);
    return obj.dump();
}

} // namespace ragweave::eval

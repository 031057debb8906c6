#include "ragweave/sft_builder.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ragweave::sft {

namespace {

constexpr std::array<std::pair<QuestionType, std::string_view>, 10> kTypeLabels = {{
    {QuestionType::OcrRead, "OCR Read"},
    {QuestionType::OcrVisualReasoning, "OCR + Visual Reasoning"},
    {QuestionType::MultiHopExternalKnowledge, "Multi-hop External Knowledge Reasoning"},
    {QuestionType::FineGrainedEntity, "Fine-grained Entity Identification"},
    {QuestionType::VisualAttribute, "Visual Reasoning - Attribute"},
    {QuestionType::VisualCounting, "Visual Reasoning - Counting"},
    {QuestionType::VisualBinary, "Visual Reasoning - Binary"},
    {QuestionType::SocialCommonsense, "Social Commonsense Reasoning"},
    {QuestionType::PhysicalCommonsense, "Physical Commonsense Reasoning"},
    {QuestionType::FactoidKb, "Factoid/KB Questions"},
}};

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

void replace_all(std::string& text, std::string_view placeholder, std::string_view value) {
    for (std::size_t at = text.find(placeholder); at != std::string::npos;
         at = text.find(placeholder, at + value.size())) {
        text.replace(at, placeholder.size(), value);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(Errc::IoError, "cannot open prompt template '" + path + "'");
    std::stringstream buffer;
    buffer << file.rdbuf();
    return buffer.str();
}

// The rendered prompts end with "Question: <q>" on the final content line;
// the stub recovers the question from there.
std::string extract_after_last(const std::string& prompt, std::string_view anchor) {
    const std::size_t at = prompt.rfind(anchor);
    if (at == std::string::npos) {
        raise(Errc::ClientError, "prompt is missing anchor '" + std::string(anchor) + "'");
    }
    std::string rest = prompt.substr(at + anchor.size());
    const std::size_t newline = rest.find('\n');
    if (newline != std::string::npos) rest.resize(newline);
    return trim(rest);
}

std::string extract_block_after_last(const std::string& prompt, std::string_view anchor,
                                     std::string_view stop_prefix) {
    const std::size_t at = prompt.rfind(anchor);
    if (at == std::string::npos) {
        raise(Errc::ClientError, "prompt is missing anchor '" + std::string(anchor) + "'");
    }
    std::string block;
    std::istringstream lines(prompt.substr(at + anchor.size()));
    std::string line;
    while (std::getline(lines, line)) {
        if (!stop_prefix.empty() && starts_with(line, stop_prefix)) break;
        if (!trim(line).empty()) block += line + "\n";
    }
    return block;
}

} // namespace

std::string_view question_type_label(QuestionType type) {
    for (const auto& [t, label] : kTypeLabels) {
        if (t == type) return label;
    }
    return {};
}

std::optional<QuestionType> question_type_from_label(std::string_view label) {
    for (const auto& [t, l] : kTypeLabels) {
        if (l == label) return t;
    }
    return std::nullopt;
}

bool is_retained(QuestionType type) {
    return type == QuestionType::MultiHopExternalKnowledge ||
           type == QuestionType::FineGrainedEntity || type == QuestionType::FactoidKb;
}

// ----------------------------------------------------------------------------
// PromptLibrary
// ----------------------------------------------------------------------------

PromptLibrary PromptLibrary::load(const std::string& directory) {
    PromptLibrary lib;
    lib.selection_ = read_file(directory + "/question_selection.txt");
    lib.decomposition_ = read_file(directory + "/question_decomposition.txt");
    lib.generation_ = read_file(directory + "/response_generation.txt");
    lib.assignment_ = read_file(directory + "/query_type_assignment.txt");
    return lib;
}

std::string render_sub_questions(std::span<const SubQuestion> sub_questions) {
    std::string out;
    for (std::size_t i = 0; i < sub_questions.size(); ++i) {
        out += std::to_string(i + 1) + ". " + sub_questions[i].text +
               " | retrieval=" + (sub_questions[i].needs_retrieval ? "yes" : "no") + "\n";
    }
    return out;
}

std::string PromptLibrary::selection_prompt(const std::string& question) const {
    std::string prompt = selection_;
    replace_all(prompt, "{{question}}", question);
    return prompt;
}

std::string PromptLibrary::decomposition_prompt(const std::string& question) const {
    std::string prompt = decomposition_;
    replace_all(prompt, "{{question}}", question);
    return prompt;
}

std::string PromptLibrary::generation_prompt(const std::string& question,
                                             std::span<const SubQuestion> sub_questions,
                                             const std::string& gold_answer,
                                             int attempt) const {
    std::string prompt = generation_;
    replace_all(prompt, "{{question}}", question);
    replace_all(prompt, "{{sub_questions}}", render_sub_questions(sub_questions));
    replace_all(prompt, "{{gold_answer}}", gold_answer);
    replace_all(prompt, "{{attempt}}", std::to_string(attempt));
    return prompt;
}

std::string PromptLibrary::assignment_prompt(const std::string& question,
                                             std::span<const SubQuestion> sub_questions,
                                             const std::string& serialized_trajectory) const {
    std::string prompt = assignment_;
    replace_all(prompt, "{{question}}", question);
    replace_all(prompt, "{{sub_questions}}", render_sub_questions(sub_questions));
    replace_all(prompt, "{{trajectory}}", serialized_trajectory);
    return prompt;
}

// ----------------------------------------------------------------------------
// RuleLlmClient
// ----------------------------------------------------------------------------

namespace {

QuestionType classify_question(const std::string& question) {
    const std::string q = lowercase(question);
    if (contains(q, "translate")) return QuestionType::OcrRead;
    if (contains(q, "what does it say") || contains(q, "what does the sign say")) {
        return QuestionType::OcrRead;
    }
    if (contains(q, "winning") || contains(q, "scoreboard")) {
        return QuestionType::OcrVisualReasoning;
    }
    if (contains(q, "why might") || contains(q, "what grade")) {
        return QuestionType::SocialCommonsense;
    }
    if (contains(q, "purpose") || contains(q, "could block")) {
        return QuestionType::PhysicalCommonsense;
    }
    if (starts_with(q, "how many")) {
        if (contains(q, "in the image") || contains(q, "in the picture")) {
            return QuestionType::VisualCounting;
        }
        return QuestionType::MultiHopExternalKnowledge;
    }
    if (contains(q, "made of") || contains(q, "color")) {
        return QuestionType::VisualAttribute;
    }
    if (contains(q, "wearing") || starts_with(q, "is the ")) {
        return QuestionType::VisualBinary;
    }
    if (starts_with(q, "what brand") || starts_with(q, "what kind of") ||
        starts_with(q, "what class of") || starts_with(q, "what type of") ||
        starts_with(q, "what is this")) {
        return QuestionType::FineGrainedEntity;
    }
    if (contains(q, "when") || contains(q, "where") || contains(q, "who ") ||
        contains(q, "year") || contains(q, "movie") || contains(q, "capacity") ||
        contains(q, "temperature") || contains(q, "how long") ||
        contains(q, "good for") || contains(q, "which station")) {
        return QuestionType::MultiHopExternalKnowledge;
    }
    if (contains(q, "holiday") || contains(q, "religious") || contains(q, "historical") ||
        contains(q, "invented")) {
        return QuestionType::FactoidKb;
    }
    return QuestionType::FactoidKb;
}

struct DecompositionRule {
    std::string_view question;
    std::vector<SubQuestion> sub_questions;
};

const std::vector<DecompositionRule>& decomposition_rules() {
    static const std::vector<DecompositionRule> rules = {
        {"When did the king of that country become king?",
         {{"Who is the king of Spain?", true},
          {"When did the king of Spain become king?", true}}},
        {"What's the capacity of this arena?",
         {{"What is this place?", true}, {"What's the capacity of this arena?", true}}},
        {"What's the ideal temperature for this plant?",
         {{"What is this plant?", true},
          {"What is the ideal temperature for this plant?", true}}},
        {"Did this vehicle appear in the movie Pretty Woman back in the 90s?",
         {{"What is this vehicle?", true},
          {"When was the movie Pretty Woman released?", true},
          {"When did the Toyota RAV4 launch?", true}}},
        {"How long can I use it without turning it off?",
         {{"What is the model name of this generator?", true},
          {"How long can I use this generator?", true}}},
        {"Where is the farm depicted on the sign located?",
         {{"What is the farm name?", true}, {"Where is the farm located?", true}}},
        {"In what year did the president for whom this bridge is named win the Battle of "
         "Trenton?",
         {{"What is the name of the bridge?", true},
          {"What year did the president win the Battle of Trenton?", true}}},
        {"What kind of sculpture is this?", {{"What kind of sculpture is this?", false}}},
    };
    return rules;
}

std::string strip_word_punct(std::string word) {
    while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.back()))) {
        word.pop_back();
    }
    return word;
}

std::string word_after(const std::string& text, std::string_view anchor) {
    const std::string lower = lowercase(text);
    const std::size_t at = lower.find(anchor);
    if (at == std::string::npos) return {};
    std::istringstream rest(text.substr(at + anchor.size()));
    std::string word;
    rest >> word;
    return strip_word_punct(word);
}

QueryAssignment assign_for_basis(const std::string& basis) {
    const std::string b = lowercase(basis);
    if (contains(b, "place") || contains(b, "farm name")) {
        return {Modality::Image, "image"};
    }
    if (starts_with(b, "what is this ")) {
        return {Modality::Region, word_after(basis, "this ")};
    }
    if (starts_with(b, "what brand of ") || starts_with(b, "what kind of ") ||
        starts_with(b, "what class of ") || starts_with(b, "what type of ")) {
        return {Modality::Region, word_after(basis, "of ")};
    }
    if (contains(b, "model name of this ")) {
        return {Modality::Region, word_after(basis, "this ")};
    }
    if (contains(b, "name of the ")) {
        return {Modality::Region, word_after(basis, "name of the ")};
    }
    return {Modality::Text, basis};
}

std::vector<SubQuestion> parse_sub_question_lines(const std::string& block) {
    std::vector<SubQuestion> subs;
    std::istringstream lines(block);
    std::string line;
    while (std::getline(lines, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t dot = line.find(". ");
        if (dot == std::string::npos) continue;
        std::string rest = line.substr(dot + 2);
        bool needs_retrieval = true;
        const std::size_t flag = rest.rfind(" | retrieval=");
        if (flag != std::string::npos) {
            needs_retrieval = rest.substr(flag + 13, 3) == "yes";
            rest.resize(flag);
        }
        subs.push_back(SubQuestion{trim(rest), needs_retrieval});
    }
    return subs;
}

std::string stub_candidate(const std::vector<SubQuestion>& subs, const std::string& gold,
                           int attempt) {
    std::vector<std::size_t> needed;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (subs[i].needs_retrieval) needed.push_back(i);
    }
    const int shape = attempt % 3; // 1 = drop last span, 2 = extra span, 0 = as planned
    std::string out;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        const bool drop = shape == 1 && !needed.empty() && i == needed.back();
        if (subs[i].needs_retrieval && !drop) {
            out += "Looking up \"" + subs[i].text + "\" <search>" + subs[i].text +
                   "</search> settles this step. ";
        } else {
            out += "\"" + subs[i].text + "\" is answered directly. ";
        }
    }
    out += "So the answer is " + gold + ".";
    if (shape == 2) {
        out += "<search>extra follow-up</search>";
    }
    return out;
}

std::string stub_selection(const std::string& prompt) {
    const std::string question = extract_after_last(prompt, "Question: ");
    return std::string(question_type_label(classify_question(question)));
}

std::string stub_decomposition(const std::string& prompt) {
    const std::string question = extract_after_last(prompt, "Question: ");
    for (const auto& rule : decomposition_rules()) {
        if (rule.question == question) {
            return render_sub_questions(rule.sub_questions);
        }
    }
    const std::vector<SubQuestion> self = {{question, true}};
    return render_sub_questions(self);
}

std::string stub_generation(const std::string& prompt) {
    const std::string block =
        extract_block_after_last(prompt, "Sub-questions:\n", "Gold answer:");
    const auto subs = parse_sub_question_lines(block);
    const std::string gold = extract_after_last(prompt, "Gold answer: ");
    const int attempt = std::stoi(extract_after_last(prompt, "Attempt: "));
    return stub_candidate(subs, gold, attempt);
}

std::string stub_assignment(const std::string& prompt) {
    const std::string block =
        extract_block_after_last(prompt, "Sub-questions:\n", "Response:");
    const auto subs = parse_sub_question_lines(block);
    std::vector<std::string> needed;
    for (const auto& sub : subs) {
        if (sub.needs_retrieval) needed.push_back(sub.text);
    }
    const std::string serialized = extract_after_last(prompt, "Response: ");
    const auto trajectory = grammar::parse_trajectory(serialized);

    std::string out;
    std::size_t index = 0;
    for (const auto& seg : trajectory.segments) {
        const auto* search = std::get_if<grammar::SearchSegment>(&seg);
        if (!search) continue;
        const std::string basis = index < needed.size()
                                      ? needed[index]
                                      : (search->payload.modality == Modality::Text
                                             ? search->payload.text
                                             : std::string("image"));
        const auto assignment = assign_for_basis(basis);
        out += std::to_string(index + 1) + ". ";
        switch (assignment.modality) {
            case Modality::Region: out += "REGION"; break;
            case Modality::Image: out += "IMAGE"; break;
            case Modality::Text: out += "TEXT"; break;
        }
        out += " | " + assignment.query + "\n";
        ++index;
    }
    return out;
}

} // namespace

std::string RuleLlmClient::complete(const std::string& prompt) {
    if (starts_with(prompt, "TASK: question-selection")) return stub_selection(prompt);
    if (starts_with(prompt, "TASK: question-decomposition")) return stub_decomposition(prompt);
    if (starts_with(prompt, "TASK: response-generation")) return stub_generation(prompt);
    if (starts_with(prompt, "TASK: query-type-assignment")) return stub_assignment(prompt);
    raise(Errc::ClientError, "prompt does not name a known task");
}

// ----------------------------------------------------------------------------
// Pipeline operations
// ----------------------------------------------------------------------------

SelectionResult select_question(const RawSample& sample, LlmClient& client,
                                const PromptLibrary& prompts) {
    const std::string response = trim(client.complete(prompts.selection_prompt(sample.question)));
    const auto type = question_type_from_label(response);
    if (!type) {
        raise(Errc::UnparseableLabel, "'" + response + "' is not a question type label");
    }
    return SelectionResult{*type, is_retained(*type)};
}

std::vector<SubQuestion> decompose(const RawSample& sample, LlmClient& client,
                                   const PromptLibrary& prompts) {
    const std::string response = client.complete(prompts.decomposition_prompt(sample.question));
    auto subs = parse_sub_question_lines(response);
    if (subs.empty()) {
        raise(Errc::ClientError, "decomposition produced no sub-questions");
    }
    return subs;
}

int score_candidate(const grammar::Trajectory& trajectory,
                    std::span<const SubQuestion> sub_questions) {
    std::size_t needed = 0;
    for (const auto& sub : sub_questions) needed += sub.needs_retrieval;

    std::vector<std::size_t> search_positions;
    for (std::size_t i = 0; i < trajectory.segments.size(); ++i) {
        if (std::holds_alternative<grammar::SearchSegment>(trajectory.segments[i])) {
            search_positions.push_back(i);
        }
    }
    auto followed_by_text = [&](std::size_t position) {
        for (std::size_t i = position + 1; i < trajectory.segments.size(); ++i) {
            if (const auto* text =
                    std::get_if<grammar::TextSegment>(&trajectory.segments[i])) {
                if (!trim(text->content).empty()) return true;
            }
        }
        return false;
    };

    int score = 0;
    const std::size_t aligned = std::min<std::size_t>(needed, search_positions.size());
    for (std::size_t j = 0; j < aligned; ++j) {
        if (followed_by_text(search_positions[j])) ++score;
    }
    if (search_positions.size() > needed) {
        score -= static_cast<int>(search_positions.size() - needed);
    }
    return score;
}

grammar::Trajectory generate_trajectory(const RawSample& sample,
                                        std::span<const SubQuestion> sub_questions,
                                        LlmClient& client, const PromptLibrary& prompts,
                                        int n) {
    if (n < 1) raise(Errc::ConfigError, "candidate count must be >= 1");
    std::optional<grammar::Trajectory> best;
    int best_score = 0;
    std::size_t best_spans = 0;
    for (int attempt = 1; attempt <= n; ++attempt) {
        const std::string candidate = client.complete(
            prompts.generation_prompt(sample.question, sub_questions, sample.gold_answer,
                                      attempt));
        grammar::Trajectory trajectory;
        try {
            trajectory = grammar::parse_trajectory(candidate);
            trajectory.validate();
        } catch (const Error&) {
            continue;
        }
        const int score = score_candidate(trajectory, sub_questions);
        std::size_t spans = 0;
        for (const auto& seg : trajectory.segments) {
            spans += std::holds_alternative<grammar::SearchSegment>(seg);
        }
        if (!best || score > best_score || (score == best_score && spans < best_spans)) {
            best = std::move(trajectory);
            best_score = score;
            best_spans = spans;
        }
    }
    if (!best) {
        raise(Errc::NoValidCandidate, "all " + std::to_string(n) + " candidates failed to parse");
    }
    return *best;
}

std::vector<QueryAssignment> assign_query_types(const RawSample& sample,
                                                const grammar::Trajectory& trajectory,
                                                std::span<const SubQuestion> sub_questions,
                                                LlmClient& client,
                                                const PromptLibrary& prompts) {
    std::size_t search_count = 0;
    for (const auto& seg : trajectory.segments) {
        search_count += std::holds_alternative<grammar::SearchSegment>(seg);
    }
    if (search_count == 0) return {};

    const std::string response = client.complete(prompts.assignment_prompt(
        sample.question, sub_questions, grammar::serialize_trajectory(trajectory)));

    std::vector<QueryAssignment> assignments;
    std::istringstream lines(response);
    std::string line;
    while (std::getline(lines, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t dot = line.find(". ");
        if (dot == std::string::npos) continue;
        const std::string rest = line.substr(dot + 2);
        const std::size_t sep = rest.find(" | ");
        if (sep == std::string::npos) {
            raise(Errc::ClientError, "assignment line '" + line + "' is malformed");
        }
        const std::string kind = rest.substr(0, sep);
        QueryAssignment assignment;
        if (kind == "REGION") {
            assignment.modality = Modality::Region;
        } else if (kind == "IMAGE") {
            assignment.modality = Modality::Image;
        } else if (kind == "TEXT") {
            assignment.modality = Modality::Text;
        } else {
            raise(Errc::ClientError, "unknown query type '" + kind + "'");
        }
        assignment.query = rest.substr(sep + 3);
        assignments.push_back(std::move(assignment));
    }
    if (assignments.size() != search_count) {
        raise(Errc::AssignmentCountMismatch,
              std::to_string(assignments.size()) + " assignments for " +
                  std::to_string(search_count) + " search spans");
    }
    return assignments;
}

std::vector<SftSample> run_pipeline(std::span<const RawSample> raw, LlmClient& client,
                                    const PromptLibrary& prompts, int n) {
    std::vector<SftSample> out;
    for (const auto& sample : raw) {
        const auto selection = select_question(sample, client, prompts);
        if (!selection.retained) continue;
        SftSample built;
        built.id = sample.id;
        built.image_path = sample.image_path;
        built.question = sample.question;
        built.gold_answer = sample.gold_answer;
        built.question_type = selection.type;
        built.sub_questions = decompose(sample, client, prompts);
        built.trajectory =
            generate_trajectory(sample, built.sub_questions, client, prompts, n);
        built.query_assignments = assign_query_types(sample, built.trajectory,
                                                     built.sub_questions, client, prompts);
        out.push_back(std::move(built));
    }
    return out;
}

// ----------------------------------------------------------------------------
// JSONL
// ----------------------------------------------------------------------------

using nlohmann::json;

RawSample raw_sample_from_json(std::string_view line) {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        raise(Errc::IoError, "raw sample line is not a JSON object");
    }
    RawSample sample;
    sample.id = obj.value("id", "");
    sample.image_path = obj.value("image", "");
    sample.question = obj.value("question", "");
    sample.gold_answer = obj.contains("gold_answer") ? obj.value("gold_answer", "")
                                                     : obj.value("gold", "");
    return sample;
}

std::vector<RawSample> read_raw_jsonl(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(Errc::IoError, "cannot open raw sample file '" + path + "'");
    std::vector<RawSample> samples;
    std::string line;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        samples.push_back(raw_sample_from_json(line));
    }
    return samples;
}

std::string sft_sample_to_json(const SftSample& sample) {
    json obj;
    obj["id"] = sample.id;
    obj["image"] = sample.image_path;
    obj["question"] = sample.question;
    obj["gold_answer"] = sample.gold_answer;
    obj["question_type"] = std::string(question_type_label(sample.question_type));
    json subs = json::array();
    for (const auto& sub : sample.sub_questions) {
        subs.push_back({{"text", sub.text}, {"needs_retrieval", sub.needs_retrieval}});
    }
    obj["sub_questions"] = std::move(subs);
    obj["trajectory"] = json::parse(grammar::trajectory_to_json(sample.trajectory));
    json assignments = json::array();
    for (const auto& assignment : sample.query_assignments) {
        assignments.push_back(
            {{"modality", std::string(grammar::modality_name(assignment.modality))},
             {"query", assignment.query}});
    }
    obj["query_assignments"] = std::move(assignments);
    return obj.dump();
}

SftSample sft_sample_from_json(std::string_view line) {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        raise(Errc::IoError, "sft sample line is not a JSON object");
    }
    SftSample sample;
    sample.id = obj.value("id", "");
    sample.image_path = obj.value("image", "");
    sample.question = obj.value("question", "");
    sample.gold_answer = obj.value("gold_answer", "");
    const auto type = question_type_from_label(obj.value("question_type", ""));
    if (!type) raise(Errc::IoError, "sft sample with unknown question_type");
    sample.question_type = *type;
    if (obj.contains("sub_questions")) {
        for (const auto& sub : obj["sub_questions"]) {
            sample.sub_questions.push_back(
                SubQuestion{sub.value("text", ""), sub.value("needs_retrieval", true)});
        }
    }
    if (obj.contains("trajectory")) {
        sample.trajectory = grammar::trajectory_from_json(obj["trajectory"].dump());
    }
    if (obj.contains("query_assignments")) {
        for (const auto& assignment : obj["query_assignments"]) {
            const auto modality = grammar::modality_from_name(assignment.value("modality", ""));
            if (!modality) raise(Errc::IoError, "assignment with unknown modality");
            sample.query_assignments.push_back(
                QueryAssignment{*modality, assignment.value("query", "")});
        }
    }
    return sample;
}

void emit_dataset(const std::string& path, std::span<const SftSample> samples) {
    // Validate everything before the first byte is written.
    for (const auto& sample : samples) {
        if (!is_retained(sample.question_type)) {
            raise(Errc::InvalidTrajectory,
                  "sample '" + sample.id + "' has a non-retained question type");
        }
        const std::string serialized = grammar::serialize_trajectory(sample.trajectory);
        const auto reparsed = grammar::parse_trajectory(serialized);
        if (!(reparsed == sample.trajectory)) {
            raise(Errc::InvalidTrajectory,
                  "sample '" + sample.id + "' does not survive a parse round-trip");
        }
        std::size_t search_count = 0;
        for (const auto& seg : sample.trajectory.segments) {
            search_count += std::holds_alternative<grammar::SearchSegment>(seg);
        }
        if (search_count != sample.query_assignments.size()) {
            raise(Errc::AssignmentCountMismatch,
                  "sample '" + sample.id + "' assignment count differs from span count");
        }
    }
    std::ofstream file(path, std::ios::trunc);
    if (!file) raise(Errc::IoError, "cannot write sft dataset '" + path + "'");
    for (const auto& sample : samples) {
        file << sft_sample_to_json(sample) << '\n';
    }
}

} // namespace ragweave::sft

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragweave/error.hpp"
#include "ragweave/token_grammar.hpp"

namespace ragweave::sft {

using grammar::Modality;

// ----------------------------------------------------------------------------
// Question taxonomy
// ----------------------------------------------------------------------------

enum class QuestionType {
    OcrRead,
    OcrVisualReasoning,
    MultiHopExternalKnowledge,
    FineGrainedEntity,
    VisualAttribute,
    VisualCounting,
    VisualBinary,
    SocialCommonsense,
    PhysicalCommonsense,
    FactoidKb,
};

std::string_view question_type_label(QuestionType type);
std::optional<QuestionType> question_type_from_label(std::string_view label);

/// Only these three types make it into the training set: they are the ones
/// where retrieval is usually required to answer correctly.
bool is_retained(QuestionType type);

// ----------------------------------------------------------------------------
// Sample model
// ----------------------------------------------------------------------------

struct RawSample {
    std::string id;
    std::string image_path;
    std::string question;
    std::string gold_answer;
};

struct SubQuestion {
    std::string text;
    bool needs_retrieval = true;

    bool operator==(const SubQuestion&) const = default;
};

struct QueryAssignment {
    Modality modality = Modality::Text;
    std::string query;

    bool operator==(const QueryAssignment&) const = default;
};

struct SftSample {
    std::string id;
    std::string image_path;
    std::string question;
    std::string gold_answer;
    QuestionType question_type = QuestionType::FactoidKb;
    std::vector<SubQuestion> sub_questions;
    grammar::Trajectory trajectory;
    std::vector<QueryAssignment> query_assignments;
};

// ----------------------------------------------------------------------------
// LLM client and prompt templates
// ----------------------------------------------------------------------------

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

/// Renders the four stage prompts from template files. Placeholders:
/// {{question}}, {{sub_questions}}, {{gold_answer}}, {{attempt}},
/// {{trajectory}}.
class PromptLibrary {
public:
    static PromptLibrary load(const std::string& directory);

    std::string selection_prompt(const std::string& question) const;
    std::string decomposition_prompt(const std::string& question) const;
    std::string generation_prompt(const std::string& question,
                                  std::span<const SubQuestion> sub_questions,
                                  const std::string& gold_answer, int attempt) const;
    std::string assignment_prompt(const std::string& question,
                                  std::span<const SubQuestion> sub_questions,
                                  const std::string& serialized_trajectory) const;

private:
    std::string selection_;
    std::string decomposition_;
    std::string generation_;
    std::string assignment_;
};

/// Renders sub-questions the way prompts and client responses encode them:
/// "1. <text> | retrieval=yes" per line.
std::string render_sub_questions(std::span<const SubQuestion> sub_questions);

/// Deterministic rule-table client. Recognizes the stage from the prompt's
/// leading "TASK:" line and answers from fixed rules, so the whole pipeline
/// is reproducible without any model.
class RuleLlmClient : public LlmClient {
public:
    std::string complete(const std::string& prompt) override;
};

// ----------------------------------------------------------------------------
// Pipeline operations
// ----------------------------------------------------------------------------

struct SelectionResult {
    QuestionType type;
    bool retained = false;
};

/// Classifies the question into one of the ten types. Throws UnparseableLabel
/// when the client answer is not one of the labels.
SelectionResult select_question(const RawSample& sample, LlmClient& client,
                                const PromptLibrary& prompts);

/// Splits the question into atomic sub-questions with per-item retrieval
/// flags; at least one is always returned.
std::vector<SubQuestion> decompose(const RawSample& sample, LlmClient& client,
                                   const PromptLibrary& prompts);

/// Candidate score used by the self-refinement selection: +1 for each
/// retrieval sub-question whose search span is followed by answer text, -1
/// per extraneous span. Ties prefer fewer spans, then the earlier attempt.
int score_candidate(const grammar::Trajectory& trajectory,
                    std::span<const SubQuestion> sub_questions);

/// Generates n candidate trajectories and returns the best-scoring one that
/// parses and validates. Throws NoValidCandidate when all n fail.
grammar::Trajectory generate_trajectory(const RawSample& sample,
                                        std::span<const SubQuestion> sub_questions,
                                        LlmClient& client, const PromptLibrary& prompts,
                                        int n = 5);

/// Assigns a modality and query string to every search span, in order.
/// Throws AssignmentCountMismatch when the client answer count differs from
/// the span count.
std::vector<QueryAssignment> assign_query_types(const RawSample& sample,
                                                const grammar::Trajectory& trajectory,
                                                std::span<const SubQuestion> sub_questions,
                                                LlmClient& client,
                                                const PromptLibrary& prompts);

/// Full per-sample pipeline over a batch; non-retained questions are dropped.
std::vector<SftSample> run_pipeline(std::span<const RawSample> raw, LlmClient& client,
                                    const PromptLibrary& prompts, int n = 5);

// ----------------------------------------------------------------------------
// JSONL
// ----------------------------------------------------------------------------

RawSample raw_sample_from_json(std::string_view line);
std::vector<RawSample> read_raw_jsonl(const std::string& path);

std::string sft_sample_to_json(const SftSample& sample);
SftSample sft_sample_from_json(std::string_view line);

/// Writes one sample per line, re-validating each trajectory (serialize,
/// re-parse, compare) before anything is written.
void emit_dataset(const std::string& path, std::span<const SftSample> samples);

} // namespace ragweave::sft

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ragweave/error.hpp"
#include "ragweave/region_ops.hpp"
#include "ragweave/retrieval_core.hpp"
#include "ragweave/token_grammar.hpp"

namespace ragweave::engine {

using grammar::ControlKind;
using grammar::Modality;

/// The image a decode session is conditioned on. Absent for text-only QA.
/// Bytes are shared so copies stay cheap.
class ImageRef {
public:
    ImageRef() = default;

    static ImageRef absent() { return {}; }
    static ImageRef from_bytes(std::vector<std::uint8_t> bytes);
    static ImageRef from_path(const std::string& path); // throws IoError

    bool is_absent() const { return bytes_ == nullptr; }
    const std::vector<std::uint8_t>& bytes() const;

private:
    std::shared_ptr<const std::vector<std::uint8_t>> bytes_;
};

/// Token source driven by the engine. Implementations must never emit a
/// banned control token and must be deterministic for the scripted test
/// implementation.
class GeneratorClient {
public:
    virtual ~GeneratorClient() = default;
    virtual std::string next_token(const std::string& context, const ImageRef& image,
                                   const std::set<ControlKind>& banned) = 0;
    virtual region::BinaryMask predict_mask(const std::string& context,
                                            const ImageRef& image) = 0;
};

enum class EmptyMaskPolicy { FallbackWholeImage, Error };

struct EngineConfig {
    std::optional<int> search_budget;               // nullopt = unbounded
    std::set<Modality> allowed_modalities = {Modality::Text, Modality::Image,
                                             Modality::Region};
    int top_k = 5;
    int max_steps = 2048;
    EmptyMaskPolicy empty_mask_policy = EmptyMaskPolicy::FallbackWholeImage;
    double pad_fraction = 0.10;

    void validate() const;
};

/// Audit entry for one search span encountered during decoding. Skipped spans
/// (disallowed modality, missing image) keep executed = false and say why in
/// `note`; they do not consume budget and inject no evidence.
struct SearchRecord {
    retrieval::SearchQuery query;
    retrieval::Evidence evidence;
    bool executed = false;
    std::string note;
    std::optional<region::CropBox> box; // region queries only
};

struct DecodeRecord {
    grammar::Trajectory trajectory;
    std::vector<SearchRecord> searches;
    std::string final_answer;
    int steps_used = 0;
    bool step_limit_hit = false;

    std::size_t executed_count() const {
        std::size_t n = 0;
        for (const auto& s : searches) n += s.executed;
        return n;
    }
};

/// Runs generation until Eos or max_steps, intercepting search spans: the
/// payload picks the retrieval modality, evidence comes back through the
/// retriever and is appended as an info block the generator then conditions
/// on. Once the budget is exhausted, SearchOpen joins the banned set.
DecodeRecord decode(const std::string& question, const ImageRef& image,
                    GeneratorClient& gen, retrieval::Retriever& retriever,
                    const EngineConfig& cfg);

/// Passes the payload through iff its modality is allowed; throws
/// DisallowedModality otherwise. decode() converts the throw for Text
/// payloads into a skipped search record, since text cannot be banned
/// token-wise.
grammar::QueryPayload enforce_modality(const grammar::QueryPayload& payload,
                                       const EngineConfig& cfg);

/// Evidence chunks joined with " | ", with any control-marker substrings
/// removed so injected blocks always re-parse.
std::string format_evidence(const retrieval::Evidence& evidence);

// ----------------------------------------------------------------------------
// Scripted generator (test implementation, also used by the decode CLI)
// ----------------------------------------------------------------------------

/// Replays a fixed token list. When the next scripted search span would
/// require a banned token (SearchOpen after budget exhaustion, or a banned
/// payload marker), the whole span is skipped, like a constrained decoder
/// falling through to its direct answer. Emits Eos forever once exhausted.
class ScriptedGenerator : public GeneratorClient {
public:
    explicit ScriptedGenerator(std::vector<std::string> tokens,
                               std::optional<region::BinaryMask> mask = std::nullopt,
                               bool respect_bans = true)
        : tokens_(std::move(tokens)), mask_(std::move(mask)), respect_bans_(respect_bans) {}

    std::string next_token(const std::string& context, const ImageRef& image,
                           const std::set<ControlKind>& banned) override;
    region::BinaryMask predict_mask(const std::string& context,
                                    const ImageRef& image) override;

private:
    std::vector<std::string> tokens_;
    std::optional<region::BinaryMask> mask_;
    bool respect_bans_;
    std::size_t pos_ = 0;
};

// ----------------------------------------------------------------------------
// Record JSONL (one DecodeRecord per line, with id and pass-through metadata)
// ----------------------------------------------------------------------------

struct RecordLine {
    std::string id;
    DecodeRecord record;
    std::map<std::string, std::string> meta; // dataset fields, stringified
};

std::string record_line_to_json(const RecordLine& line);
RecordLine record_line_from_json(std::string_view json_text);
std::vector<RecordLine> read_records_jsonl(const std::string& path);

// ----------------------------------------------------------------------------
// Dataset JSONL consumed by the decode CLI
// ----------------------------------------------------------------------------

/// One QA input: question, optional image path, scripted generator tokens,
/// and an optional scripted mask. Unknown fields pass through as metadata.
struct DatasetSample {
    std::string id;
    std::string question;
    std::string image_path;
    std::vector<std::string> script;
    std::optional<region::BinaryMask> mask;
    std::map<std::string, std::string> meta;
};

DatasetSample dataset_sample_from_json(std::string_view line);
std::vector<DatasetSample> read_dataset_jsonl(const std::string& path);

} // namespace ragweave::engine

#include "ragweave/decode_engine.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace ragweave::engine {

using grammar::CharSpan;
using grammar::StreamParser;
using grammar::Trajectory;
using retrieval::Evidence;
using retrieval::SearchQuery;

// ----------------------------------------------------------------------------
// ImageRef
// ----------------------------------------------------------------------------

ImageRef ImageRef::from_bytes(std::vector<std::uint8_t> bytes) {
    ImageRef ref;
    ref.bytes_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
    return ref;
}

ImageRef ImageRef::from_path(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) raise(Errc::IoError, "cannot open image '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                    std::istreambuf_iterator<char>());
    return from_bytes(std::move(bytes));
}

const std::vector<std::uint8_t>& ImageRef::bytes() const {
    if (!bytes_) raise(Errc::IoError, "image reference is absent");
    return *bytes_;
}

// ----------------------------------------------------------------------------
// Config and modality gate
// ----------------------------------------------------------------------------

void EngineConfig::validate() const {
    if (top_k < 1) raise(Errc::ConfigError, "top_k must be >= 1");
    if (max_steps < 1) raise(Errc::ConfigError, "max_steps must be >= 1");
    if (allowed_modalities.empty()) {
        raise(Errc::ConfigError, "allowed_modalities must be non-empty");
    }
    if (search_budget && *search_budget < 0) {
        raise(Errc::ConfigError, "search_budget must be >= 0");
    }
    if (pad_fraction < 0.0) raise(Errc::ConfigError, "pad_fraction must be >= 0");
}

grammar::QueryPayload enforce_modality(const grammar::QueryPayload& payload,
                                       const EngineConfig& cfg) {
    if (!cfg.allowed_modalities.contains(payload.modality)) {
        raise(Errc::DisallowedModality,
              std::string("modality '") + std::string(grammar::modality_name(payload.modality)) +
                  "' is not allowed by the engine configuration");
    }
    return payload;
}

std::string format_evidence(const Evidence& evidence) {
    std::string joined;
    for (std::size_t i = 0; i < evidence.chunks.size(); ++i) {
        if (i > 0) joined += " | ";
        joined += evidence.chunks[i].snippet;
    }
    // Snippets come from arbitrary corpus text; injected blocks must re-parse.
    for (;;) {
        bool changed = false;
        for (auto marker : grammar::control_surfaces()) {
            for (std::size_t at = joined.find(marker); at != std::string::npos;
                 at = joined.find(marker)) {
                joined.erase(at, marker.size());
                changed = true;
            }
        }
        if (!changed) break;
    }
    return joined;
}

// ----------------------------------------------------------------------------
// decode
// ----------------------------------------------------------------------------

namespace {

std::set<ControlKind> initial_bans(const EngineConfig& cfg) {
    std::set<ControlKind> banned;
    if (!cfg.allowed_modalities.contains(Modality::Image)) {
        banned.insert(ControlKind::PayloadImage);
    }
    if (!cfg.allowed_modalities.contains(Modality::Region)) {
        banned.insert(ControlKind::PayloadRegion);
    }
    if (cfg.search_budget && *cfg.search_budget == 0) {
        banned.insert(ControlKind::SearchOpen);
    }
    return banned;
}

std::string extract_final_answer(const Trajectory& trajectory) {
    std::size_t start = 0;
    for (std::size_t i = 0; i < trajectory.segments.size(); ++i) {
        if (std::holds_alternative<grammar::InfoSegment>(trajectory.segments[i])) {
            start = i + 1;
        }
    }
    std::string answer;
    for (std::size_t i = start; i < trajectory.segments.size(); ++i) {
        if (const auto* text = std::get_if<grammar::TextSegment>(&trajectory.segments[i])) {
            answer += text->content;
        }
    }
    return answer;
}

struct SessionImage {
    bool present = false;
    int width = 0;
    int height = 0;
};

} // namespace

DecodeRecord decode(const std::string& question, const ImageRef& image,
                    GeneratorClient& gen, retrieval::Retriever& retriever,
                    const EngineConfig& cfg) {
    cfg.validate();
    if (question.empty()) raise(Errc::EmptyInput, "question must be non-empty");

    SessionImage session_image;
    if (!image.is_absent()) {
        const auto decoded = region::decode_image(image.bytes());
        session_image = {true, decoded.width, decoded.height};
    }

    DecodeRecord rec;
    StreamParser parser;
    std::string generated;
    std::set<ControlKind> banned = initial_bans(cfg);
    int executed = 0;
    int steps = 0;

    auto ban_search_if_budget_spent = [&] {
        if (cfg.search_budget && executed >= *cfg.search_budget) {
            banned.insert(ControlKind::SearchOpen);
        }
    };

    auto handle_search = [&](const grammar::SpanEvent& event) {
        // Bans land at span close; a span whose opener slipped into the same
        // token as the budget-exhausting close still ends up here.
        if (banned.contains(ControlKind::SearchOpen)) {
            raise(Errc::GeneratorViolation, "search span opened after <search> was banned");
        }
        const auto& payload = event.payload;
        try {
            enforce_modality(payload, cfg);
        } catch (const Error& e) {
            if (e.code() != Errc::DisallowedModality) throw;
            if (payload.modality != Modality::Text) {
                // Its marker token was banned up front; reaching here means the
                // generator emitted it anyway.
                raise(Errc::GeneratorViolation, "generator emitted a banned payload marker");
            }
            SearchRecord skipped;
            skipped.query = SearchQuery::from_text(payload.text);
            skipped.note = "disallowed-modality";
            rec.searches.push_back(std::move(skipped));
            return;
        }

        SearchRecord record;
        switch (payload.modality) {
            case Modality::Text:
                record.query = SearchQuery::from_text(payload.text);
                break;
            case Modality::Image: {
                if (!session_image.present) {
                    record.query.modality = Modality::Image;
                    record.note = "no-image";
                    rec.searches.push_back(std::move(record));
                    return;
                }
                record.query = SearchQuery::from_image(image.bytes());
                break;
            }
            case Modality::Region: {
                if (!session_image.present) {
                    record.query.modality = Modality::Region;
                    record.note = "no-image";
                    rec.searches.push_back(std::move(record));
                    return;
                }
                const auto mask = gen.predict_mask(question + "\n" + generated, image);
                if (mask.popcount() == 0) {
                    if (cfg.empty_mask_policy == EmptyMaskPolicy::Error) {
                        raise(Errc::GeneratorViolation, "predicted mask is empty");
                    }
                    record.query = SearchQuery::from_image(image.bytes());
                    record.query.modality = Modality::Region;
                    record.note = "empty-mask-whole-image-fallback";
                } else {
                    if (mask.width != session_image.width ||
                        mask.height != session_image.height) {
                        raise(Errc::GeneratorViolation,
                              "predicted mask dimensions do not match the image");
                    }
                    const auto box = region::mask_to_box(mask, cfg.pad_fraction);
                    record.box = box;
                    record.query =
                        SearchQuery::from_region(region::crop_query(image.bytes(), *box));
                }
                break;
            }
        }

        Evidence evidence;
        try {
            evidence = retriever.search(record.query, cfg.top_k);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            raise(Errc::RetrieverError, e.what());
        }
        record.evidence = std::move(evidence);
        record.executed = true;
        rec.searches.push_back(std::move(record));
        ++executed;
        ban_search_if_budget_spent();

        std::string block = std::string(grammar::surface(ControlKind::InfoOpen));
        block += format_evidence(rec.searches.back().evidence);
        block += grammar::surface(ControlKind::InfoClose);
        generated += block;
        parser.feed(block);
    };

    while (!parser.terminated()) {
        if (steps >= cfg.max_steps) {
            rec.step_limit_hit = true;
            break;
        }
        const std::string token = gen.next_token(question + "\n" + generated, image, banned);
        ++steps;
        for (auto kind : banned) {
            if (token.find(grammar::surface(kind)) != std::string::npos) {
                raise(Errc::GeneratorViolation,
                      "generator emitted banned token '" +
                          std::string(grammar::surface(kind)) + "'");
            }
        }
        generated += token;
        const auto events = parser.feed(token);
        for (const auto& event : events) {
            if (event.kind != grammar::SpanEvent::Kind::SearchClosed) continue;
            // Generation must pause at </search> so the evidence lands right
            // after the span. Content beyond the close in the same token
            // means the generator ran ahead of the injection point.
            if (parser.size() != event.span.end) {
                raise(Errc::GeneratorViolation,
                      "generator continued past </search> before evidence injection");
            }
            handle_search(event);
        }
    }

    rec.trajectory = rec.step_limit_hit ? parser.partial() : parser.finish();
    rec.final_answer = extract_final_answer(rec.trajectory);
    rec.steps_used = steps;
    return rec;
}

// ----------------------------------------------------------------------------
// ScriptedGenerator
// ----------------------------------------------------------------------------

std::string ScriptedGenerator::next_token(const std::string&, const ImageRef&,
                                          const std::set<ControlKind>& banned) {
    auto is_banned = [&](const std::string& token) {
        for (auto kind : banned) {
            if (token.find(grammar::surface(kind)) != std::string::npos) return true;
        }
        return false;
    };

    while (pos_ < tokens_.size()) {
        const std::string& token = tokens_[pos_];
        if (respect_bans_) {
            if (token.find(grammar::surface(ControlKind::SearchOpen)) != std::string::npos) {
                // Look ahead to the matching close. If the opener or anything
                // inside the span is banned, fall through to the direct
                // answer by dropping the whole span.
                const auto close = std::string(grammar::surface(ControlKind::SearchClose));
                std::size_t end = pos_;
                bool span_banned = false;
                while (end < tokens_.size()) {
                    span_banned = span_banned || is_banned(tokens_[end]);
                    if (tokens_[end].find(close) != std::string::npos) break;
                    ++end;
                }
                if (span_banned) {
                    pos_ = end < tokens_.size() ? end + 1 : tokens_.size();
                    continue;
                }
            } else if (is_banned(token)) {
                ++pos_; // lone banned token in the script; skip it
                continue;
            }
        }
        ++pos_;
        return token;
    }
    return std::string(grammar::surface(ControlKind::Eos));
}

region::BinaryMask ScriptedGenerator::predict_mask(const std::string&, const ImageRef&) {
    if (mask_) return *mask_;
    return region::BinaryMask::zeros(1, 1);
}

// ----------------------------------------------------------------------------
// JSONL
// ----------------------------------------------------------------------------

using nlohmann::json;

namespace {

std::string scalar_to_string(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

json search_record_to_json(const SearchRecord& s) {
    json obj;
    obj["modality"] = std::string(grammar::modality_name(s.query.modality));
    obj["query_text"] = s.query.text;
    obj["executed"] = s.executed;
    if (!s.note.empty()) obj["note"] = s.note;
    if (s.box) obj["box"] = {s.box->x0, s.box->y0, s.box->x1, s.box->y1};
    json chunks = json::array();
    for (const auto& c : s.evidence.chunks) {
        chunks.push_back({{"doc_id", c.doc_id},
                          {"title", c.title},
                          {"snippet", c.snippet},
                          {"score", c.score}});
    }
    obj["evidence"] = {{"chunks", std::move(chunks)}};
    return obj;
}

SearchRecord search_record_from_json(const json& obj) {
    SearchRecord s;
    const auto modality = grammar::modality_from_name(obj.value("modality", ""));
    if (!modality) raise(Errc::IoError, "search record with unknown modality");
    s.query.modality = *modality;
    s.query.text = obj.value("query_text", "");
    s.executed = obj.value("executed", false);
    s.note = obj.value("note", "");
    if (obj.contains("box") && obj["box"].is_array() && obj["box"].size() == 4) {
        s.box = region::CropBox{obj["box"][0].get<int>(), obj["box"][1].get<int>(),
                                obj["box"][2].get<int>(), obj["box"][3].get<int>()};
    }
    if (obj.contains("evidence") && obj["evidence"].contains("chunks")) {
        for (const auto& c : obj["evidence"]["chunks"]) {
            s.evidence.chunks.push_back(retrieval::EvidenceChunk{
                c.value("doc_id", ""), c.value("title", ""), c.value("snippet", ""),
                c.value("score", 0.0)});
        }
    }
    return s;
}

} // namespace

std::string record_line_to_json(const RecordLine& line) {
    json obj;
    obj["id"] = line.id;
    obj["trajectory"] = json::parse(grammar::trajectory_to_json(line.record.trajectory));
    json searches = json::array();
    for (const auto& s : line.record.searches) searches.push_back(search_record_to_json(s));
    obj["searches"] = std::move(searches);
    obj["final_answer"] = line.record.final_answer;
    obj["steps_used"] = line.record.steps_used;
    obj["step_limit_hit"] = line.record.step_limit_hit;
    json meta = json::object();
    for (const auto& [key, value] : line.meta) meta[key] = value;
    obj["meta"] = std::move(meta);
    return obj.dump();
}

RecordLine record_line_from_json(std::string_view json_text) {
    json obj = json::parse(json_text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        raise(Errc::IoError, "record line is not a JSON object");
    }
    RecordLine line;
    line.id = obj.value("id", "");
    if (obj.contains("trajectory")) {
        line.record.trajectory = grammar::trajectory_from_json(obj["trajectory"].dump());
    }
    if (obj.contains("searches")) {
        for (const auto& s : obj["searches"]) {
            line.record.searches.push_back(search_record_from_json(s));
        }
    }
    line.record.final_answer = obj.value("final_answer", "");
    line.record.steps_used = obj.value("steps_used", 0);
    line.record.step_limit_hit = obj.value("step_limit_hit", false);
    if (obj.contains("meta") && obj["meta"].is_object()) {
        for (const auto& [key, value] : obj["meta"].items()) {
            line.meta[key] = scalar_to_string(value);
        }
    }
    return line;
}

std::vector<RecordLine> read_records_jsonl(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(Errc::IoError, "cannot open records file '" + path + "'");
    std::vector<RecordLine> lines;
    std::string line;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        lines.push_back(record_line_from_json(line));
    }
    return lines;
}

DatasetSample dataset_sample_from_json(std::string_view text) {
    json obj = json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        raise(Errc::IoError, "dataset line is not a JSON object");
    }
    DatasetSample sample;
    sample.id = obj.value("id", "");
    sample.question = obj.value("question", "");
    sample.image_path = obj.value("image", "");
    if (obj.contains("script")) {
        if (!obj["script"].is_array()) raise(Errc::IoError, "script must be an array");
        for (const auto& tok : obj["script"]) sample.script.push_back(tok.get<std::string>());
    }
    if (obj.contains("mask") && obj["mask"].is_object()) {
        const auto& m = obj["mask"];
        region::BinaryMask mask;
        mask.height = m.value("height", 0);
        mask.width = m.value("width", 0);
        const std::string bits = m.value("bits", "");
        if (static_cast<int>(bits.size()) != mask.height * mask.width) {
            raise(Errc::IoError, "mask bits length does not match height*width");
        }
        mask.bits.reserve(bits.size());
        for (char c : bits) mask.bits.push_back(c == '1' ? 1 : 0);
        sample.mask = std::move(mask);
    }
    static const std::set<std::string> known = {"id", "question", "image", "script", "mask"};
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) sample.meta[key] = scalar_to_string(value);
    }
    return sample;
}

std::vector<DatasetSample> read_dataset_jsonl(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(Errc::IoError, "cannot open dataset file '" + path + "'");
    std::vector<DatasetSample> samples;
    std::string line;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        samples.push_back(dataset_sample_from_json(line));
    }
    return samples;
}

} // namespace ragweave::engine

#include "ragweave/token_grammar.hpp"

#include <algorithm>
#include <array>
#include <cstdint>

#include <nlohmann/json.hpp>

namespace ragweave::grammar {

namespace {

struct SurfaceEntry {
    ControlKind kind;
    std::string_view text;
};

constexpr std::array<SurfaceEntry, 7> kSurfaces = {{
    {ControlKind::InfoClose, "</information>"},
    {ControlKind::InfoOpen, "<information>"},
    {ControlKind::SearchClose, "</search>"},
    {ControlKind::SearchOpen, "<search>"},
    {ControlKind::PayloadRegion, "<region>"},
    {ControlKind::PayloadImage, "<image>"},
    {ControlKind::Eos, "</s>"},
}};

bool contains_any_marker(std::string_view text) {
    for (const auto& entry : kSurfaces) {
        if (text.find(entry.text) != std::string_view::npos) return true;
    }
    return false;
}

// True when `tail` is a strict prefix of some marker, i.e. more input could
// still complete it.
bool may_become_marker(std::string_view tail) {
    for (const auto& entry : kSurfaces) {
        if (tail.size() < entry.text.size() &&
            entry.text.substr(0, tail.size()) == tail) {
            return true;
        }
    }
    return false;
}

std::optional<ControlKind> match_marker_at(std::string_view buffer, std::size_t pos) {
    for (const auto& entry : kSurfaces) {
        if (buffer.compare(pos, entry.text.size(), entry.text) == 0) {
            return entry.kind;
        }
    }
    return std::nullopt;
}

} // namespace

std::string_view surface(ControlKind kind) {
    for (const auto& entry : kSurfaces) {
        if (entry.kind == kind) return entry.text;
    }
    return {};
}

std::optional<ControlKind> control_from_surface(std::string_view text) {
    for (const auto& entry : kSurfaces) {
        if (entry.text == text) return entry.kind;
    }
    return std::nullopt;
}

const std::vector<std::string_view>& control_surfaces() {
    static const std::vector<std::string_view> all = [] {
        std::vector<std::string_view> v;
        for (const auto& entry : kSurfaces) v.push_back(entry.text);
        return v;
    }();
    return all;
}

std::string_view modality_name(Modality m) {
    switch (m) {
        case Modality::Text: return "text";
        case Modality::Image: return "image";
        case Modality::Region: return "region";
    }
    return {};
}

std::optional<Modality> modality_from_name(std::string_view name) {
    if (name == "text") return Modality::Text;
    if (name == "image") return Modality::Image;
    if (name == "region") return Modality::Region;
    return std::nullopt;
}

// ============================================================================
// UTF-8 validation
// ============================================================================

bool is_valid_utf8(std::string_view bytes) {
    std::size_t i = 0;
    const std::size_t n = bytes.size();
    while (i < n) {
        const auto b0 = static_cast<std::uint8_t>(bytes[i]);
        if (b0 < 0x80) {
            ++i;
            continue;
        }
        std::size_t len;
        std::uint32_t cp;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1Fu;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0Fu;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07u;
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (std::size_t j = 1; j < len; ++j) {
            const auto bj = static_cast<std::uint8_t>(bytes[i + j]);
            if ((bj & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (bj & 0x3Fu);
        }
        // Reject overlong encodings, surrogates, and out-of-range points.
        if (len == 2 && cp < 0x80) return false;
        if (len == 3 && cp < 0x800) return false;
        if (len == 4 && cp < 0x10000) return false;
        if (cp >= 0xD800 && cp <= 0xDFFF) return false;
        if (cp > 0x10FFFF) return false;
        i += len;
    }
    return true;
}

// ============================================================================
// Trajectory validation and serialization
// ============================================================================

void Trajectory::validate() const {
    bool prev_was_text = false;
    for (const auto& seg : segments) {
        if (const auto* text = std::get_if<TextSegment>(&seg)) {
            if (text->content.empty()) {
                raise(Errc::InvalidTrajectory, "empty text segment");
            }
            if (contains_any_marker(text->content)) {
                raise(Errc::InvalidTrajectory, "control marker inside text segment");
            }
            if (prev_was_text) {
                raise(Errc::InvalidTrajectory, "adjacent text segments");
            }
            prev_was_text = true;
            continue;
        }
        prev_was_text = false;
        if (const auto* search = std::get_if<SearchSegment>(&seg)) {
            const auto& payload = search->payload;
            if (payload.modality == Modality::Text) {
                if (payload.text.empty()) {
                    raise(Errc::InvalidTrajectory, "text payload must be non-empty");
                }
                if (contains_any_marker(payload.text)) {
                    raise(Errc::InvalidTrajectory, "control marker inside text payload");
                }
            } else if (!payload.text.empty()) {
                raise(Errc::InvalidTrajectory, "image/region payload carries text");
            }
        } else if (const auto* info = std::get_if<InfoSegment>(&seg)) {
            if (contains_any_marker(info->content)) {
                raise(Errc::InvalidTrajectory, "control marker inside info segment");
            }
        }
    }
}

std::string serialize_trajectory(const Trajectory& t) {
    t.validate();
    std::string out;
    for (const auto& seg : t.segments) {
        if (const auto* text = std::get_if<TextSegment>(&seg)) {
            out += text->content;
        } else if (const auto* search = std::get_if<SearchSegment>(&seg)) {
            out += surface(ControlKind::SearchOpen);
            switch (search->payload.modality) {
                case Modality::Text: out += search->payload.text; break;
                case Modality::Image: out += surface(ControlKind::PayloadImage); break;
                case Modality::Region: out += surface(ControlKind::PayloadRegion); break;
            }
            out += surface(ControlKind::SearchClose);
        } else if (const auto* info = std::get_if<InfoSegment>(&seg)) {
            out += surface(ControlKind::InfoOpen);
            out += info->content;
            out += surface(ControlKind::InfoClose);
        }
    }
    if (t.terminated) out += surface(ControlKind::Eos);
    return out;
}

std::vector<CharSpan> info_char_spans(const Trajectory& t) {
    std::vector<CharSpan> spans;
    for (const auto& seg : t.segments) {
        if (const auto* info = std::get_if<InfoSegment>(&seg)) {
            spans.push_back(info->span);
        }
    }
    return spans;
}

// ============================================================================
// StreamParser
// ============================================================================

std::size_t StreamParser::open_span_begin() const {
    return open_ ? open_->begin : size();
}

void StreamParser::flush_text() {
    if (text_.empty()) return;
    segments_.push_back(TextSegment{text_, {text_begin_, text_begin_ + text_.size()}});
    text_.clear();
}

void StreamParser::consume_text(char c, std::size_t offset) {
    if (terminated_) {
        raise(Errc::InterleavedSpan, "content after end-of-sequence token");
    }
    if (open_) {
        open_->body.push_back(c);
        return;
    }
    if (text_.empty()) text_begin_ = offset;
    text_.push_back(c);
}

void StreamParser::close_search(std::vector<SpanEvent>& events, std::size_t end) {
    const std::string& body = open_->body;
    QueryPayload payload;
    if (body == surface(ControlKind::PayloadImage)) {
        payload.modality = Modality::Image;
    } else if (body == surface(ControlKind::PayloadRegion)) {
        payload.modality = Modality::Region;
    } else if (body.empty()) {
        raise(Errc::InterleavedSpan, "empty search payload");
    } else if (contains_any_marker(body)) {
        raise(Errc::InterleavedSpan, "mixed search payload");
    } else {
        payload.modality = Modality::Text;
        payload.text = body;
    }
    const CharSpan span{open_->begin, end};
    segments_.push_back(SearchSegment{payload, span});
    events.push_back(SpanEvent{SpanEvent::Kind::SearchClosed, payload, {}, span});
    open_.reset();
}

void StreamParser::close_info(std::vector<SpanEvent>& events, std::size_t end) {
    const CharSpan span{open_->begin, end};
    segments_.push_back(InfoSegment{open_->body, span});
    events.push_back(SpanEvent{SpanEvent::Kind::InfoClosed, {}, open_->body, span});
    open_.reset();
}

void StreamParser::consume_marker(ControlKind kind, std::size_t begin,
                                  std::vector<SpanEvent>& events) {
    const std::size_t end = begin + surface(kind).size();
    if (terminated_) {
        raise(Errc::InterleavedSpan, "control token after end-of-sequence token");
    }
    if (!open_) {
        switch (kind) {
            case ControlKind::SearchOpen:
                flush_text();
                open_ = OpenSpan{OpenKind::Search, begin, {}};
                return;
            case ControlKind::InfoOpen:
                flush_text();
                open_ = OpenSpan{OpenKind::Info, begin, {}};
                return;
            case ControlKind::SearchClose:
            case ControlKind::InfoClose:
                raise(Errc::UnbalancedSpan, "closing marker without an open span");
            case ControlKind::PayloadImage:
            case ControlKind::PayloadRegion:
                raise(Errc::InterleavedSpan, "payload marker outside a search span");
            case ControlKind::Eos:
                flush_text();
                terminated_ = true;
                return;
        }
        return;
    }
    if (open_->kind == OpenKind::Search) {
        switch (kind) {
            case ControlKind::SearchOpen:
                raise(Errc::NestedSpan, "<search> inside an open search span");
            case ControlKind::InfoOpen:
                raise(Errc::InterleavedSpan, "<information> opens inside a search span");
            case ControlKind::SearchClose:
                close_search(events, end);
                return;
            case ControlKind::InfoClose:
                raise(Errc::UnbalancedSpan, "</information> without an open info span");
            case ControlKind::PayloadImage:
            case ControlKind::PayloadRegion:
                // Legality (payload must stand alone) is decided at span close.
                open_->body += surface(kind);
                return;
            case ControlKind::Eos:
                raise(Errc::UnbalancedSpan, "search span unclosed at end-of-sequence");
        }
        return;
    }
    // open info span
    switch (kind) {
        case ControlKind::InfoOpen:
            raise(Errc::NestedSpan, "<information> inside an open info span");
        case ControlKind::SearchOpen:
            raise(Errc::InterleavedSpan, "<search> opens inside an info span");
        case ControlKind::InfoClose:
            close_info(events, end);
            return;
        case ControlKind::SearchClose:
            raise(Errc::UnbalancedSpan, "</search> without an open search span");
        case ControlKind::PayloadImage:
        case ControlKind::PayloadRegion:
            raise(Errc::InterleavedSpan, "payload marker inside an info span");
        case ControlKind::Eos:
            raise(Errc::UnbalancedSpan, "info span unclosed at end-of-sequence");
    }
}

std::vector<SpanEvent> StreamParser::feed(std::string_view bytes) {
    pending_.append(bytes);
    std::vector<SpanEvent> events;
    std::size_t i = 0;
    while (i < pending_.size()) {
        if (pending_[i] == '<') {
            if (auto kind = match_marker_at(pending_, i)) {
                consume_marker(*kind, consumed_ + i, events);
                i += surface(*kind).size();
                continue;
            }
            if (may_become_marker(std::string_view(pending_).substr(i))) {
                break; // hold back: more input may still complete a marker
            }
        }
        consume_text(pending_[i], consumed_ + i);
        ++i;
    }
    pending_.erase(0, i);
    consumed_ += i;
    return events;
}

Trajectory StreamParser::finish() {
    // Whatever was held back can no longer become a marker.
    std::vector<SpanEvent> events;
    std::size_t i = 0;
    while (i < pending_.size()) {
        if (pending_[i] == '<') {
            if (auto kind = match_marker_at(pending_, i)) {
                consume_marker(*kind, consumed_ + i, events);
                i += surface(*kind).size();
                continue;
            }
        }
        consume_text(pending_[i], consumed_ + i);
        ++i;
    }
    pending_.clear();
    consumed_ += i;
    if (open_) {
        raise(Errc::UnbalancedSpan, "span still open at end of input");
    }
    flush_text();
    return Trajectory{segments_, terminated_};
}

Trajectory StreamParser::partial() const {
    StreamParser copy = *this;
    std::vector<SpanEvent> events;
    std::size_t i = 0;
    while (i < copy.pending_.size()) {
        if (copy.pending_[i] == '<') {
            if (auto kind = match_marker_at(copy.pending_, i)) {
                copy.consume_marker(*kind, copy.consumed_ + i, events);
                i += surface(*kind).size();
                continue;
            }
        }
        copy.consume_text(copy.pending_[i], copy.consumed_ + i);
        ++i;
    }
    copy.pending_.clear();
    copy.open_.reset(); // drop the cut-off span, keep completed segments
    copy.flush_text();
    return Trajectory{copy.segments_, copy.terminated_};
}

Trajectory parse_trajectory(std::string_view source) {
    if (!is_valid_utf8(source)) {
        raise(Errc::InvalidUtf8, "source is not valid UTF-8");
    }
    StreamParser parser;
    parser.feed(source);
    return parser.finish();
}

// ============================================================================
// JSON encoding
// ============================================================================

using nlohmann::json;

std::string trajectory_to_json(const Trajectory& t) {
    json segments = json::array();
    for (const auto& seg : t.segments) {
        json obj;
        if (const auto* text = std::get_if<TextSegment>(&seg)) {
            obj["type"] = "text";
            obj["content"] = text->content;
            obj["span"] = {text->span.begin, text->span.end};
        } else if (const auto* search = std::get_if<SearchSegment>(&seg)) {
            obj["type"] = "search";
            obj["modality"] = std::string(modality_name(search->payload.modality));
            obj["content"] = search->payload.text;
            obj["span"] = {search->span.begin, search->span.end};
        } else if (const auto* info = std::get_if<InfoSegment>(&seg)) {
            obj["type"] = "info";
            obj["content"] = info->content;
            obj["span"] = {info->span.begin, info->span.end};
        }
        segments.push_back(std::move(obj));
    }
    json out;
    out["segments"] = std::move(segments);
    out["terminated"] = t.terminated;
    return out.dump();
}

Trajectory trajectory_from_json(std::string_view json_text) {
    json parsed = json::parse(json_text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        raise(Errc::InvalidTrajectory, "trajectory JSON is not an object");
    }
    Trajectory t;
    t.terminated = parsed.value("terminated", false);
    if (!parsed.contains("segments") || !parsed["segments"].is_array()) {
        raise(Errc::InvalidTrajectory, "trajectory JSON missing segments array");
    }
    for (const auto& obj : parsed["segments"]) {
        const std::string type = obj.value("type", "");
        CharSpan span;
        if (obj.contains("span") && obj["span"].is_array() && obj["span"].size() == 2) {
            span.begin = obj["span"][0].get<std::size_t>();
            span.end = obj["span"][1].get<std::size_t>();
        }
        if (type == "text") {
            t.segments.push_back(TextSegment{obj.value("content", ""), span});
        } else if (type == "search") {
            QueryPayload payload;
            auto modality = modality_from_name(obj.value("modality", ""));
            if (!modality) {
                raise(Errc::InvalidTrajectory, "search segment with unknown modality");
            }
            payload.modality = *modality;
            payload.text = obj.value("content", "");
            t.segments.push_back(SearchSegment{payload, span});
        } else if (type == "info") {
            t.segments.push_back(InfoSegment{obj.value("content", ""), span});
        } else {
            raise(Errc::InvalidTrajectory, "segment with unknown type '" + type + "'");
        }
    }
    return t;
}

} // namespace ragweave::grammar

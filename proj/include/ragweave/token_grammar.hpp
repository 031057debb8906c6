#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ragweave/error.hpp"

namespace ragweave::grammar {

// ============================================================================
// Control tokens
// ============================================================================

/// The fixed control vocabulary that structures a trajectory. Every kind has
/// exactly one surface form and every surface form maps back to one kind.
enum class ControlKind {
    SearchOpen,
    SearchClose,
    InfoOpen,
    InfoClose,
    PayloadImage,
    PayloadRegion,
    Eos,
};

std::string_view surface(ControlKind kind);
std::optional<ControlKind> control_from_surface(std::string_view text);

/// All seven surface forms, longest first (scanning order matters: a prefix
/// like `<search>` must not shadow `</search>` when matching at a position).
const std::vector<std::string_view>& control_surfaces();

// ============================================================================
// Trajectory model
// ============================================================================

enum class Modality { Text, Image, Region };

std::string_view modality_name(Modality m);
std::optional<Modality> modality_from_name(std::string_view name);

/// What goes between `<search>` and `</search>`: a payload marker selecting
/// image or region retrieval, or a bare textual query.
struct QueryPayload {
    Modality modality = Modality::Text;
    std::string text; // non-empty iff modality == Text

    bool operator==(const QueryPayload&) const = default;
};

/// Byte extent [begin, end) into the serialized trajectory. Span extents for
/// search/info segments include their marker strings, so segments tile the
/// serialized string exactly.
struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    bool operator==(const CharSpan&) const = default;
};

struct TextSegment {
    std::string content;
    CharSpan span;
    bool operator==(const TextSegment&) const = default;
};

struct SearchSegment {
    QueryPayload payload;
    CharSpan span;
    bool operator==(const SearchSegment&) const = default;
};

struct InfoSegment {
    std::string content;
    CharSpan span;
    bool operator==(const InfoSegment&) const = default;
};

using TrajectorySegment = std::variant<TextSegment, SearchSegment, InfoSegment>;

struct Trajectory {
    std::vector<TrajectorySegment> segments;
    bool terminated = false;

    bool operator==(const Trajectory&) const = default;

    /// Throws Error(InvalidTrajectory) if any type invariant is broken:
    /// marker substrings inside text/info/payload content, empty text
    /// segments, adjacent text segments, or a non-Text payload carrying text.
    void validate() const;
};

// ============================================================================
// Parsing and serialization
// ============================================================================

/// Emitted by the streaming parser whenever a span closes. The decode engine
/// listens for Search events to run retrieval mid-generation.
struct SpanEvent {
    enum class Kind { SearchClosed, InfoClosed };
    Kind kind;
    QueryPayload payload; // SearchClosed only
    std::string content;  // InfoClosed only
    CharSpan span;        // marker-inclusive extent
};

/// Incremental parser over the control-token grammar. Spans are paired with
/// an explicit stack (push on open, pop on close) so imbalance is reported
/// precisely; nesting and cross-kind interleaving are rejected outright.
///
/// Feeding may hold back up to max-marker-length bytes that could still turn
/// into a marker; finish() flushes them as text.
class StreamParser {
public:
    /// Appends bytes and returns the span events completed by them.
    std::vector<SpanEvent> feed(std::string_view bytes);

    /// Ends the input. Throws UnbalancedSpan if a span is still open.
    Trajectory finish();

    bool in_open_span() const { return open_.has_value(); }
    bool terminated() const { return terminated_; }

    /// Byte offset of the opening marker of the currently open span.
    std::size_t open_span_begin() const;

    /// Bytes consumed so far (including held-back tail).
    std::size_t size() const { return consumed_ + pending_.size(); }

    /// Trajectory of the complete segments seen so far, discarding any
    /// unterminated open span and any trailing undecided bytes. Used when a
    /// generation is cut off mid-span.
    Trajectory partial() const;

private:
    enum class OpenKind { Search, Info };
    struct OpenSpan {
        OpenKind kind;
        std::size_t begin;       // offset of the opening marker
        std::string body;        // raw bytes between the markers
    };

    void consume_marker(ControlKind kind, std::size_t begin, std::vector<SpanEvent>& events);
    void consume_text(char c, std::size_t offset);
    void flush_text();
    void close_search(std::vector<SpanEvent>& events, std::size_t end);
    void close_info(std::vector<SpanEvent>& events, std::size_t end);

    std::vector<TrajectorySegment> segments_;
    std::optional<OpenSpan> open_;
    std::string text_;           // accumulating plain-text run
    std::size_t text_begin_ = 0;
    std::string pending_;        // undecided tail (possible marker prefix)
    std::size_t consumed_ = 0;   // offset of pending_[0] in the full input
    bool terminated_ = false;
};

/// One-shot parse. Throws Error with code InvalidUtf8, UnbalancedSpan,
/// NestedSpan, or InterleavedSpan.
Trajectory parse_trajectory(std::string_view source);

/// Exact inverse of parse_trajectory on well-formed trajectories.
std::string serialize_trajectory(const Trajectory& t);

/// Marker-inclusive [begin, end) byte spans of every info segment, in order.
std::vector<CharSpan> info_char_spans(const Trajectory& t);

bool is_valid_utf8(std::string_view bytes);

// ============================================================================
// JSON encoding (repo-wide trajectory wire format)
// ============================================================================

std::string trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(std::string_view json_text);

} // namespace ragweave::grammar

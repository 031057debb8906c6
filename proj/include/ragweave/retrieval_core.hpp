#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragweave/error.hpp"
#include "ragweave/token_grammar.hpp"

namespace ragweave::retrieval {

using grammar::Modality;

/// A knowledge-store entry. text_embedding is required; image_embedding links
/// a picture of the entity to this document so image-space hits resolve back
/// to its text.
struct CorpusDocument {
    std::string doc_id;
    std::string title;
    std::string text;
    std::vector<float> text_embedding;
    std::vector<float> image_embedding; // empty = none
};

struct SearchQuery {
    Modality modality = Modality::Text;
    std::string text;                      // Text queries
    std::vector<std::uint8_t> image_bytes; // Image / Region queries

    static SearchQuery from_text(std::string text) {
        return SearchQuery{Modality::Text, std::move(text), {}};
    }
    static SearchQuery from_image(std::vector<std::uint8_t> bytes) {
        return SearchQuery{Modality::Image, {}, std::move(bytes)};
    }
    static SearchQuery from_region(std::vector<std::uint8_t> bytes) {
        return SearchQuery{Modality::Region, {}, std::move(bytes)};
    }
};

struct EvidenceChunk {
    std::string doc_id;
    std::string title;
    std::string snippet;
    double score = 0.0;
};

/// Top-k hits, scores nonincreasing, ties broken by ascending doc_id.
struct Evidence {
    std::vector<EvidenceChunk> chunks;
};

class EmbedderClient {
public:
    virtual ~EmbedderClient() = default;
    virtual std::vector<float> embed_text(std::string_view text) = 0;
    virtual std::vector<float> embed_image(std::span<const std::uint8_t> bytes) = 0;
};

/// Deterministic test embedder: hashes the input bytes into a seeded
/// pseudorandom unit vector. No model weights, stable across runs.
class HashEmbedder : public EmbedderClient {
public:
    explicit HashEmbedder(std::uint64_t seed, int text_dim = 64, int image_dim = 64)
        : seed_(seed), text_dim_(text_dim), image_dim_(image_dim) {}

    std::vector<float> embed_text(std::string_view text) override;
    std::vector<float> embed_image(std::span<const std::uint8_t> bytes) override;

    int text_dim() const { return text_dim_; }
    int image_dim() const { return image_dim_; }

private:
    std::uint64_t seed_;
    int text_dim_;
    int image_dim_;
};

/// Immutable exact-search index over both embedding spaces. Documents are
/// held in ascending doc_id order, which doubles as the tie-break order.
class VectorIndex {
public:
    VectorIndex() = default;

    /// Validates norms, dimensions, and id uniqueness; sorts by doc_id.
    static VectorIndex build(std::vector<CorpusDocument> docs);

    void save(const std::string& path) const;
    static VectorIndex load(const std::string& path);

    std::size_t doc_count() const { return docs_.size(); }
    std::size_t image_count() const { return image_rows_.size(); }
    int text_dim() const { return text_dim_; }
    int image_dim() const { return image_dim_; }
    const CorpusDocument& doc(std::size_t i) const { return docs_[i]; }

    /// Ranked (doc index, cosine score), length <= k.
    std::vector<std::pair<std::size_t, double>> top_k_text(std::span<const float> query,
                                                           int k) const;
    std::vector<std::pair<std::size_t, double>> top_k_image(std::span<const float> query,
                                                            int k) const;

private:
    std::vector<CorpusDocument> docs_;
    std::vector<std::size_t> image_rows_; // doc index per image embedding row
    int text_dim_ = 0;
    int image_dim_ = 0;
};

/// Routes the query to the matching embedding space and resolves image-space
/// hits to their linked documents. An empty index yields empty Evidence.
Evidence search(const VectorIndex& index, const SearchQuery& query, int k,
                EmbedderClient& embedder, int snippet_max_chars = 160);

/// Title plus as much leading text as fits in max_chars, truncated at a
/// whitespace boundary. The title is always emitted, even when it alone
/// exceeds the budget.
std::string snippet(const CorpusDocument& doc, int max_chars);

// ----------------------------------------------------------------------------
// Corpus JSONL
// ----------------------------------------------------------------------------

CorpusDocument corpus_document_from_json(std::string_view line);
std::string corpus_document_to_json(const CorpusDocument& doc);
std::vector<CorpusDocument> read_corpus_jsonl(const std::string& path);
void write_corpus_jsonl(const std::string& path, std::span<const CorpusDocument> docs);

// ----------------------------------------------------------------------------
// Retriever seam used by the decode engine
// ----------------------------------------------------------------------------

class Retriever {
public:
    virtual ~Retriever() = default;
    virtual Evidence search(const SearchQuery& query, int k) = 0;
};

class IndexRetriever : public Retriever {
public:
    IndexRetriever(const VectorIndex& index, EmbedderClient& embedder,
                   int snippet_max_chars = 160)
        : index_(index), embedder_(embedder), snippet_max_chars_(snippet_max_chars) {}

    Evidence search(const SearchQuery& query, int k) override {
        return retrieval::search(index_, query, k, embedder_, snippet_max_chars_);
    }

private:
    const VectorIndex& index_;
    EmbedderClient& embedder_;
    int snippet_max_chars_;
};

} // namespace ragweave::retrieval

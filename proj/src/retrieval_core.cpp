#include "ragweave/retrieval_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace ragweave::retrieval {

namespace {

// ----------------------------------------------------------------------------
// Seeded pseudorandom unit vectors
// ----------------------------------------------------------------------------

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h) {
    for (auto b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
    // 53 random bits into (0, 1]; never exactly 0 so log() below is safe.
    return (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
}

std::vector<float> hashed_unit_vector(std::uint64_t seed, std::uint64_t domain,
                                      std::span<const std::uint8_t> payload, int dim) {
    std::uint64_t h = kFnvOffset;
    h = fnv1a(payload, h);
    h ^= domain;
    h *= kFnvPrime;
    h ^= seed;
    std::uint64_t state = h;

    std::vector<double> values(dim);
    for (int i = 0; i < dim; i += 2) {
        // Box-Muller: two uniforms to two gaussians.
        const double u1 = uniform01(state);
        const double u2 = uniform01(state);
        const double r = std::sqrt(-2.0 * std::log(u1));
        values[i] = r * std::cos(2.0 * M_PI * u2);
        if (i + 1 < dim) values[i + 1] = r * std::sin(2.0 * M_PI * u2);
    }
    double norm_sq = 0.0;
    for (double v : values) norm_sq += v * v;
    const double inv = 1.0 / std::sqrt(norm_sq);
    std::vector<float> out(dim);
    for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(values[i] * inv);
    return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

void check_unit_norm(std::span<const float> v, const std::string& doc_id) {
    double norm_sq = 0.0;
    for (float x : v) norm_sq += static_cast<double>(x) * x;
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6) {
        raise(Errc::InvalidEmbedding, "embedding of '" + doc_id + "' is not unit length");
    }
}

// Ranked top-k over (index, score) with the doc-index tie-break. Scores are
// computed lazily by `score_of` over `count` rows.
template <typename ScoreFn>
std::vector<std::pair<std::size_t, double>> ranked_top_k(std::size_t count, int k,
                                                         ScoreFn score_of) {
    std::vector<std::pair<std::size_t, double>> scored(count);
    for (std::size_t i = 0; i < count; ++i) scored[i] = {i, score_of(i)};
    const std::size_t keep = std::min<std::size_t>(count, static_cast<std::size_t>(k));
    auto better = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(), better);
    scored.resize(keep);
    return scored;
}

// ----------------------------------------------------------------------------
// Little-endian primitives for the index file
// ----------------------------------------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

struct Reader {
    const std::string& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) raise(Errc::IoError, "index file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = data.substr(pos, n);
        pos += n;
        return s;
    }
};

constexpr char kMagic[4] = {'R', 'W', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

} // namespace

std::vector<float> HashEmbedder::embed_text(std::string_view text) {
    return hashed_unit_vector(
        seed_, 0x7465787400000000ull,
        {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}, text_dim_);
}

std::vector<float> HashEmbedder::embed_image(std::span<const std::uint8_t> bytes) {
    return hashed_unit_vector(seed_, 0x696d616765000000ull, bytes, image_dim_);
}

VectorIndex VectorIndex::build(std::vector<CorpusDocument> docs) {
    std::sort(docs.begin(), docs.end(),
              [](const CorpusDocument& a, const CorpusDocument& b) { return a.doc_id < b.doc_id; });
    VectorIndex index;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto& doc = docs[i];
        if (i > 0 && doc.doc_id == docs[i - 1].doc_id) {
            raise(Errc::DuplicateDocId, "duplicate doc_id '" + doc.doc_id + "'");
        }
        if (doc.text_embedding.empty()) {
            raise(Errc::DimensionMismatch, "document '" + doc.doc_id + "' has no text embedding");
        }
        if (index.text_dim_ == 0) {
            index.text_dim_ = static_cast<int>(doc.text_embedding.size());
        } else if (static_cast<int>(doc.text_embedding.size()) != index.text_dim_) {
            raise(Errc::DimensionMismatch,
                  "text embedding dimension differs for '" + doc.doc_id + "'");
        }
        check_unit_norm(doc.text_embedding, doc.doc_id);
        if (!doc.image_embedding.empty()) {
            if (index.image_dim_ == 0) {
                index.image_dim_ = static_cast<int>(doc.image_embedding.size());
            } else if (static_cast<int>(doc.image_embedding.size()) != index.image_dim_) {
                raise(Errc::DimensionMismatch,
                      "image embedding dimension differs for '" + doc.doc_id + "'");
            }
            check_unit_norm(doc.image_embedding, doc.doc_id);
            index.image_rows_.push_back(i);
        }
    }
    index.docs_ = std::move(docs);
    return index;
}

std::vector<std::pair<std::size_t, double>> VectorIndex::top_k_text(
    std::span<const float> query, int k) const {
    if (k < 1) raise(Errc::ConfigError, "k must be >= 1");
    if (!docs_.empty() && static_cast<int>(query.size()) != text_dim_) {
        raise(Errc::DimensionMismatch, "query dimension does not match text index");
    }
    return ranked_top_k(docs_.size(), k,
                        [&](std::size_t i) { return dot(docs_[i].text_embedding, query); });
}

std::vector<std::pair<std::size_t, double>> VectorIndex::top_k_image(
    std::span<const float> query, int k) const {
    if (k < 1) raise(Errc::ConfigError, "k must be >= 1");
    if (!image_rows_.empty() && static_cast<int>(query.size()) != image_dim_) {
        raise(Errc::DimensionMismatch, "query dimension does not match image index");
    }
    auto ranked = ranked_top_k(image_rows_.size(), k, [&](std::size_t row) {
        return dot(docs_[image_rows_[row]].image_embedding, query);
    });
    for (auto& [row, score] : ranked) row = image_rows_[row];
    return ranked;
}

void VectorIndex::save(const std::string& path) const {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(text_dim_));
    put_u32(out, static_cast<std::uint32_t>(image_dim_));
    put_u64(out, docs_.size());
    put_u64(out, image_rows_.size());
    const std::size_t table_offset_pos = out.size();
    put_u64(out, 0); // doc-table offset, patched below

    for (const auto& doc : docs_) {
        for (float v : doc.text_embedding) put_f32(out, v);
    }
    for (std::size_t row : image_rows_) put_u64(out, row);
    for (std::size_t row : image_rows_) {
        for (float v : docs_[row].image_embedding) put_f32(out, v);
    }

    const std::uint64_t table_offset = out.size();
    for (const auto& doc : docs_) {
        put_string(out, doc.doc_id);
        put_string(out, doc.title);
        put_string(out, doc.text);
    }
    std::string patched;
    put_u64(patched, table_offset);
    out.replace(table_offset_pos, 8, patched);

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file || !file.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        raise(Errc::IoError, "cannot write index file '" + path + "'");
    }
}

VectorIndex VectorIndex::load(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) raise(Errc::IoError, "cannot open index file '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    Reader r{data};
    r.need(4);
    if (std::memcmp(data.data(), kMagic, 4) != 0) {
        raise(Errc::IoError, "not an index file: bad magic");
    }
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        raise(Errc::IoError, "unsupported index version " + std::to_string(version));
    }
    VectorIndex index;
    index.text_dim_ = static_cast<int>(r.u32());
    index.image_dim_ = static_cast<int>(r.u32());
    const std::uint64_t doc_count = r.u64();
    const std::uint64_t image_count = r.u64();
    const std::uint64_t table_offset = r.u64();

    std::vector<std::vector<float>> text_embeddings(doc_count);
    for (auto& emb : text_embeddings) {
        emb.resize(index.text_dim_);
        for (auto& v : emb) v = r.f32();
    }
    index.image_rows_.resize(image_count);
    for (auto& row : index.image_rows_) row = r.u64();
    std::vector<std::vector<float>> image_embeddings(image_count);
    for (auto& emb : image_embeddings) {
        emb.resize(index.image_dim_);
        for (auto& v : emb) v = r.f32();
    }

    if (r.pos != table_offset) raise(Errc::IoError, "doc table offset mismatch");
    index.docs_.resize(doc_count);
    for (std::size_t i = 0; i < doc_count; ++i) {
        index.docs_[i].doc_id = r.str();
        index.docs_[i].title = r.str();
        index.docs_[i].text = r.str();
        index.docs_[i].text_embedding = std::move(text_embeddings[i]);
    }
    for (std::size_t row = 0; row < image_count; ++row) {
        index.docs_[index.image_rows_[row]].image_embedding = std::move(image_embeddings[row]);
    }
    return index;
}

std::string snippet(const CorpusDocument& doc, int max_chars) {
    if (max_chars < 1) raise(Errc::ConfigError, "max_chars must be >= 1");
    std::string out = doc.title;
    if (doc.text.empty()) return out;
    const std::string sep = out.empty() ? "" : ": ";
    const std::size_t budget = static_cast<std::size_t>(max_chars);
    if (out.size() + sep.size() >= budget && !out.empty()) {
        return out; // the title is always emitted, even over budget
    }
    const std::size_t room = budget - out.size() - sep.size();
    std::string_view text = doc.text;
    if (text.size() <= room) {
        return out + sep + std::string(text);
    }
    // Longest prefix that ends on a whitespace boundary.
    std::size_t cut = room;
    if (text[cut] != ' ') {
        const std::size_t last_space = text.substr(0, cut).rfind(' ');
        if (last_space == std::string_view::npos) {
            return out; // no word fits
        }
        cut = last_space;
    }
    while (cut > 0 && text[cut - 1] == ' ') --cut;
    if (cut == 0) return out;
    return out + sep + std::string(text.substr(0, cut));
}

Evidence search(const VectorIndex& index, const SearchQuery& query, int k,
                EmbedderClient& embedder, int snippet_max_chars) {
    if (k < 1) raise(Errc::ConfigError, "k must be >= 1");
    Evidence evidence;
    if (index.doc_count() == 0) return evidence;

    std::vector<std::pair<std::size_t, double>> ranked;
    if (query.modality == Modality::Text) {
        const auto q = embedder.embed_text(query.text);
        ranked = index.top_k_text(q, k);
    } else {
        const auto q = embedder.embed_image(query.image_bytes);
        ranked = index.top_k_image(q, k);
    }
    evidence.chunks.reserve(ranked.size());
    for (const auto& [i, score] : ranked) {
        const auto& doc = index.doc(i);
        evidence.chunks.push_back(
            EvidenceChunk{doc.doc_id, doc.title, snippet(doc, snippet_max_chars), score});
    }
    return evidence;
}

// ----------------------------------------------------------------------------
// Corpus JSONL
// ----------------------------------------------------------------------------

using nlohmann::json;

CorpusDocument corpus_document_from_json(std::string_view line) {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        raise(Errc::IoError, "corpus line is not a JSON object");
    }
    CorpusDocument doc;
    doc.doc_id = obj.value("doc_id", "");
    doc.title = obj.value("title", "");
    doc.text = obj.value("text", "");
    if (doc.doc_id.empty()) raise(Errc::IoError, "corpus document missing doc_id");
    if (!obj.contains("text_embedding") || !obj["text_embedding"].is_array()) {
        raise(Errc::IoError, "corpus document '" + doc.doc_id + "' missing text_embedding");
    }
    doc.text_embedding = obj["text_embedding"].get<std::vector<float>>();
    if (obj.contains("image_embedding") && obj["image_embedding"].is_array()) {
        doc.image_embedding = obj["image_embedding"].get<std::vector<float>>();
    }
    return doc;
}

std::string corpus_document_to_json(const CorpusDocument& doc) {
    json obj;
    obj["doc_id"] = doc.doc_id;
    obj["title"] = doc.title;
    obj["text"] = doc.text;
    obj["text_embedding"] = doc.text_embedding;
    if (!doc.image_embedding.empty()) {
        obj["image_embedding"] = doc.image_embedding;
    }
    return obj.dump();
}

std::vector<CorpusDocument> read_corpus_jsonl(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(Errc::IoError, "cannot open corpus file '" + path + "'");
    std::vector<CorpusDocument> docs;
    std::string line;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        docs.push_back(corpus_document_from_json(line));
    }
    return docs;
}

void write_corpus_jsonl(const std::string& path, std::span<const CorpusDocument> docs) {
    std::ofstream file(path, std::ios::trunc);
    if (!file) raise(Errc::IoError, "cannot write corpus file '" + path + "'");
    for (const auto& doc : docs) {
        file << corpus_document_to_json(doc) << '\n';
    }
}

} // namespace ragweave::retrieval

#include "ragweave/wire_clients.hpp"

#include <cmath>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace ragweave::wire {

using nlohmann::json;

namespace {

std::string require_body(httplib::Result& result, Errc on_error, const std::string& what) {
    if (!result) {
        raise(on_error, what + ": connection failed");
    }
    if (result->status != 200) {
        raise(on_error, what + ": HTTP " + std::to_string(result->status));
    }
    return result->body;
}

std::vector<float> parse_float_array(const std::string& body, Errc on_error) {
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) {
        raise(on_error, "response is not a JSON array");
    }
    auto vec = parsed.get<std::vector<float>>();
    // Client contract: embeddings are unit length.
    double norm_sq = 0.0;
    for (float x : vec) norm_sq += static_cast<double>(x) * x;
    if (vec.empty() || std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6) {
        raise(on_error, "embedding response is not unit length");
    }
    return vec;
}

} // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static const char alphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
    }
    if (i + 1 == bytes.size()) {
        const std::uint32_t v = bytes[i] << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<float> HttpEmbedder::post_for_vector(const std::string& path, const char* body,
                                                 std::size_t size, const char* content_type) {
    httplib::Client client(base_url_);
    auto result = client.Post(path, body, size, content_type);
    return parse_float_array(require_body(result, Errc::EmbedderError, "embedder " + path),
                             Errc::EmbedderError);
}

std::vector<float> HttpEmbedder::embed_text(std::string_view text) {
    return post_for_vector("/embed/text", text.data(), text.size(), "text/plain");
}

std::vector<float> HttpEmbedder::embed_image(std::span<const std::uint8_t> bytes) {
    return post_for_vector("/embed/image", reinterpret_cast<const char*>(bytes.data()),
                           bytes.size(), "application/octet-stream");
}

retrieval::Evidence HttpRetriever::search(const retrieval::SearchQuery& query, int k) {
    json request;
    request["modality"] = std::string(grammar::modality_name(query.modality));
    request["k"] = k;
    if (query.modality == grammar::Modality::Text) {
        request["text"] = query.text;
    } else {
        request["image_b64"] = base64_encode(query.image_bytes);
    }
    httplib::Client client(base_url_);
    auto result = client.Post("/search", request.dump(), "application/json");
    const std::string body = require_body(result, Errc::RetrieverError, "retriever /search");
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("chunks") || !parsed["chunks"].is_array()) {
        raise(Errc::RetrieverError, "retriever response missing chunks array");
    }
    retrieval::Evidence evidence;
    for (const auto& chunk : parsed["chunks"]) {
        evidence.chunks.push_back(retrieval::EvidenceChunk{
            chunk.value("doc_id", ""), chunk.value("title", ""), chunk.value("snippet", ""),
            chunk.value("score", 0.0)});
    }
    return evidence;
}

std::string HttpLlmClient::complete(const std::string& prompt) {
    httplib::Client client(base_url_);
    auto result = client.Post("/complete", prompt, "text/plain");
    return require_body(result, Errc::ClientError, "llm /complete");
}

eval::Verdict HttpJudge::judge(std::string_view question, std::string_view prediction,
                               std::string_view gold) {
    json request = {{"question", std::string(question)},
                    {"prediction", std::string(prediction)},
                    {"gold", std::string(gold)}};
    httplib::Client client(base_url_);
    auto result = client.Post("/judge", request.dump(), "application/json");
    const std::string body = require_body(result, Errc::ClientError, "judge /judge");
    json parsed = json::parse(body, nullptr, false);
    const std::string label = parsed.is_object() ? parsed.value("label", "") : "";
    if (label == "accurate") return eval::Verdict::Accurate;
    if (label == "missing") return eval::Verdict::Missing;
    if (label == "hallucination") return eval::Verdict::Hallucination;
    raise(Errc::ClientError, "judge returned unknown label '" + label + "'");
}

} // namespace ragweave::wire

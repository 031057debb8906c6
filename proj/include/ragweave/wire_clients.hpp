#pragma once

#include <string>

#include "ragweave/eval_harness.hpp"
#include "ragweave/retrieval_core.hpp"
#include "ragweave/sft_builder.hpp"

namespace ragweave::wire {

/// Remote embedder: POST utf-8 text to <base>/embed/text or raw bytes to
/// <base>/embed/image; the response body is a JSON float array. The endpoint
/// normally comes from the EMBEDDER_URL environment variable.
class HttpEmbedder : public retrieval::EmbedderClient {
public:
    explicit HttpEmbedder(std::string base_url) : base_url_(std::move(base_url)) {}

    std::vector<float> embed_text(std::string_view text) override;
    std::vector<float> embed_image(std::span<const std::uint8_t> bytes) override;

private:
    std::vector<float> post_for_vector(const std::string& path, const char* body,
                                       std::size_t size, const char* content_type);
    std::string base_url_;
};

/// Wire client for an externally hosted search pipeline. POST JSON
/// {"modality": ..., "text": ..., "image_b64": ..., "k": N} to <base>/search;
/// the response mirrors the Evidence chunk list.
class HttpRetriever : public retrieval::Retriever {
public:
    explicit HttpRetriever(std::string base_url) : base_url_(std::move(base_url)) {}

    retrieval::Evidence search(const retrieval::SearchQuery& query, int k) override;

private:
    std::string base_url_;
};

/// Remote completion service: POST the prompt as text/plain to
/// <base>/complete, plain-text completion back. Endpoint from LLM_URL.
class HttpLlmClient : public sft::LlmClient {
public:
    explicit HttpLlmClient(std::string base_url) : base_url_(std::move(base_url)) {}

    std::string complete(const std::string& prompt) override;

private:
    std::string base_url_;
};

/// Remote judge: POST JSON {"question","prediction","gold"} to <base>/judge;
/// response {"label": "accurate"|"missing"|"hallucination"}. Endpoint from
/// JUDGE_URL.
class HttpJudge : public eval::JudgeClient {
public:
    explicit HttpJudge(std::string base_url) : base_url_(std::move(base_url)) {}

    eval::Verdict judge(std::string_view question, std::string_view prediction,
                        std::string_view gold) override;

private:
    std::string base_url_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);

} // namespace ragweave::wire

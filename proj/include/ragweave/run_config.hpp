#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "ragweave/decode_engine.hpp"

namespace ragweave::cli {

/// Shared settings for every subcommand. A key=value config file supplies
/// defaults; command-line flags override; endpoint URLs come from the
/// environment (EMBEDDER_URL, LLM_URL, JUDGE_URL).
struct RunConfig {
    std::optional<int> budget;              // absent = unbounded
    std::string modalities = "text,image,region";
    int top_k = 5;
    int max_steps = 2048;
    std::string empty_mask_policy = "fallback"; // or "error"
    double pad_fraction = 0.10;
    std::uint64_t seed = 0;
    int dim_text = 64;
    int dim_image = 64;
    int snippet_max_chars = 160;
    int candidates = 5;
    std::string bucket;
    bool include_skipped = false;
    std::string prompts_dir = "data/prompts";
    std::string refusal_lexicon = "data/refusal_lexicon.txt";

    /// Applies config-file entries; throws ConfigError on unknown keys or
    /// unparseable values.
    void apply(const std::map<std::string, std::string>& entries);

    engine::EngineConfig engine_config() const;
};

/// Parses "key = value" lines; '#' starts a comment; blank lines are skipped.
/// Throws ConfigError on anything else.
std::map<std::string, std::string> parse_kv_config(const std::string& text);
std::map<std::string, std::string> read_kv_config(const std::string& path);

std::set<grammar::Modality> parse_modalities(const std::string& csv);

} // namespace ragweave::cli

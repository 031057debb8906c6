#include "ragweave/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ragweave::cli {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

long long parse_int(const std::string& key, const std::string& value) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        raise(Errc::ConfigError, "'" + key + "' expects an integer, got '" + value + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        raise(Errc::ConfigError, "'" + key + "' expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    raise(Errc::ConfigError, "'" + key + "' expects a boolean, got '" + value + "'");
}

} // namespace

std::map<std::string, std::string> parse_kv_config(const std::string& text) {
    std::map<std::string, std::string> entries;
    std::istringstream lines(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string content = trim(line);
        if (content.empty()) continue;
        const std::size_t eq = content.find('=');
        if (eq == std::string::npos) {
            raise(Errc::ConfigError,
                  "config line " + std::to_string(lineno) + " is not 'key = value'");
        }
        const std::string key = trim(content.substr(0, eq));
        std::string value = trim(content.substr(eq + 1));
        // Allow optionally quoted values.
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty()) {
            raise(Errc::ConfigError, "config line " + std::to_string(lineno) + " has no key");
        }
        entries[key] = value;
    }
    return entries;
}

std::map<std::string, std::string> read_kv_config(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(Errc::ConfigError, "cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << file.rdbuf();
    return parse_kv_config(buffer.str());
}

std::set<grammar::Modality> parse_modalities(const std::string& csv) {
    std::set<grammar::Modality> out;
    std::istringstream parts(csv);
    std::string part;
    while (std::getline(parts, part, ',')) {
        const std::string name = trim(part);
        if (name.empty()) continue;
        const auto modality = grammar::modality_from_name(name);
        if (!modality) {
            raise(Errc::ConfigError, "unknown modality '" + name + "'");
        }
        out.insert(*modality);
    }
    if (out.empty()) raise(Errc::ConfigError, "modalities must name at least one modality");
    return out;
}

void RunConfig::apply(const std::map<std::string, std::string>& entries) {
    for (const auto& [key, value] : entries) {
        if (key == "budget") {
            const long long v = parse_int(key, value);
            if (v < 0) {
                budget.reset();
            } else {
                budget = static_cast<int>(v);
            }
        } else if (key == "modalities") {
            parse_modalities(value); // validate now, store as text
            modalities = value;
        } else if (key == "top_k") {
            top_k = static_cast<int>(parse_int(key, value));
        } else if (key == "max_steps") {
            max_steps = static_cast<int>(parse_int(key, value));
        } else if (key == "empty_mask_policy") {
            if (value != "fallback" && value != "error") {
                raise(Errc::ConfigError, "empty_mask_policy must be 'fallback' or 'error'");
            }
            empty_mask_policy = value;
        } else if (key == "pad_fraction") {
            pad_fraction = parse_double(key, value);
        } else if (key == "seed") {
            seed = static_cast<std::uint64_t>(parse_int(key, value));
        } else if (key == "dim_text") {
            dim_text = static_cast<int>(parse_int(key, value));
        } else if (key == "dim_image") {
            dim_image = static_cast<int>(parse_int(key, value));
        } else if (key == "snippet_max_chars") {
            snippet_max_chars = static_cast<int>(parse_int(key, value));
        } else if (key == "candidates") {
            candidates = static_cast<int>(parse_int(key, value));
        } else if (key == "bucket") {
            bucket = value;
        } else if (key == "include_skipped") {
            include_skipped = parse_bool(key, value);
        } else if (key == "prompts_dir") {
            prompts_dir = value;
        } else if (key == "refusal_lexicon") {
            refusal_lexicon = value;
        } else {
            raise(Errc::ConfigError, "unknown config key '" + key + "'");
        }
    }
}

engine::EngineConfig RunConfig::engine_config() const {
    engine::EngineConfig cfg;
    cfg.search_budget = budget;
    cfg.allowed_modalities = parse_modalities(modalities);
    cfg.top_k = top_k;
    cfg.max_steps = max_steps;
    cfg.empty_mask_policy = empty_mask_policy == "error"
                                ? engine::EmptyMaskPolicy::Error
                                : engine::EmptyMaskPolicy::FallbackWholeImage;
    cfg.pad_fraction = pad_fraction;
    cfg.validate();
    return cfg;
}

} // namespace ragweave::cli

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ragweave/behavior_analytics.hpp"
#include "ragweave/decode_engine.hpp"
#include "ragweave/eval_harness.hpp"
#include "ragweave/loss_kit.hpp"
#include "ragweave/retrieval_core.hpp"
#include "ragweave/run_config.hpp"
#include "ragweave/sft_builder.hpp"
#include "ragweave/wire_clients.hpp"

namespace {

using namespace ragweave;
using nlohmann::json;

std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value && *value ? std::string(value) : fallback;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream file(path, std::ios::trunc | std::ios::binary);
    if (!file || !file.write(content.data(), static_cast<std::streamsize>(content.size()))) {
        raise(Errc::IoError, "cannot write '" + path + "'");
    }
}

struct Paths {
    std::string corpus, index, dataset, records, gold, report, out, offsets, input;
    std::string judge_url, llm_url;
};

int cmd_build_index(const cli::RunConfig&, const Paths& paths) {
    auto docs = retrieval::read_corpus_jsonl(paths.corpus);
    const auto index = retrieval::VectorIndex::build(std::move(docs));
    index.save(paths.out);
    std::cout << "indexed " << index.doc_count() << " documents ("
              << index.image_count() << " with image embeddings) -> " << paths.out
              << "\n";
    return 0;
}

int cmd_decode(const cli::RunConfig& cfg, const Paths& paths) {
    const auto engine_cfg = cfg.engine_config();
    const auto samples = engine::read_dataset_jsonl(paths.dataset);

    retrieval::VectorIndex index;
    if (!paths.index.empty()) index = retrieval::VectorIndex::load(paths.index);

    std::unique_ptr<retrieval::EmbedderClient> embedder;
    const std::string embedder_url = env_or("EMBEDDER_URL", "");
    if (!embedder_url.empty()) {
        embedder = std::make_unique<wire::HttpEmbedder>(embedder_url);
    } else {
        embedder = std::make_unique<retrieval::HashEmbedder>(cfg.seed, cfg.dim_text,
                                                             cfg.dim_image);
    }
    retrieval::IndexRetriever retriever(index, *embedder, cfg.snippet_max_chars);

    std::ofstream out(paths.out, std::ios::trunc);
    if (!out) raise(Errc::IoError, "cannot write records file '" + paths.out + "'");
    for (const auto& sample : samples) {
        engine::ImageRef image = sample.image_path.empty()
                                     ? engine::ImageRef::absent()
                                     : engine::ImageRef::from_path(sample.image_path);
        engine::ScriptedGenerator generator(sample.script, sample.mask);
        engine::RecordLine line;
        line.id = sample.id;
        line.record = engine::decode(sample.question, image, generator, retriever, engine_cfg);
        line.meta = sample.meta;
        line.meta.emplace("question", sample.question);
        out << engine::record_line_to_json(line) << '\n';
    }
    std::cout << "decoded " << samples.size() << " samples -> " << paths.out << "\n";
    return 0;
}

int cmd_eval(const cli::RunConfig& cfg, const Paths& paths) {
    const auto records = engine::read_records_jsonl(paths.records);

    struct GoldEntry {
        std::string gold;
        std::map<std::string, std::string> fields;
    };
    std::map<std::string, GoldEntry> gold_by_id;
    {
        std::ifstream file(paths.gold);
        if (!file) raise(Errc::IoError, "cannot open gold file '" + paths.gold + "'");
        std::string line;
        while (std::getline(file, line)) {
            if (line.empty()) continue;
            json obj = json::parse(line, nullptr, false);
            if (obj.is_discarded() || !obj.is_object()) {
                raise(Errc::IoError, "gold line is not a JSON object");
            }
            GoldEntry entry;
            for (const char* key : {"gold", "gold_answer", "answer"}) {
                if (obj.contains(key) && obj[key].is_string()) {
                    entry.gold = obj[key].get<std::string>();
                    break;
                }
            }
            for (const auto& [key, value] : obj.items()) {
                entry.fields[key] = value.is_string() ? value.get<std::string>() : value.dump();
            }
            gold_by_id[obj.value("id", "")] = std::move(entry);
        }
    }

    std::unique_ptr<eval::JudgeClient> judge;
    const std::string judge_url = !paths.judge_url.empty()
                                      ? paths.judge_url
                                      : env_or("JUDGE_URL", "");
    if (!judge_url.empty()) {
        judge = std::make_unique<wire::HttpJudge>(judge_url);
    } else {
        judge = std::make_unique<eval::DefaultJudge>(
            eval::load_refusal_lexicon(cfg.refusal_lexicon));
    }

    std::vector<eval::Verdict> verdicts;
    std::vector<std::string> tags;
    for (const auto& line : records) {
        auto it = gold_by_id.find(line.id);
        if (it == gold_by_id.end()) {
            raise(Errc::IoError, "no gold answer for record '" + line.id + "'");
        }
        std::string question;
        if (auto q = line.meta.find("question"); q != line.meta.end()) question = q->second;
        verdicts.push_back(judge->judge(question, line.record.final_answer, it->second.gold));
        std::string tag;
        if (!cfg.bucket.empty()) {
            if (auto f = it->second.fields.find(cfg.bucket); f != it->second.fields.end()) {
                tag = f->second;
            } else if (auto m = line.meta.find(cfg.bucket); m != line.meta.end()) {
                tag = m->second;
            }
        }
        tags.push_back(tag);
    }

    const auto report = eval::aggregate(verdicts, tags);
    write_file(paths.report, eval::eval_report_to_json(report) + "\n");
    std::cout << "evaluated " << verdicts.size() << " records: truthfulness "
              << report.truthfulness << ", accuracy " << report.accuracy << " -> "
              << paths.report << "\n";
    return 0;
}

int cmd_analyze(const cli::RunConfig& cfg, const Paths& paths) {
    const auto records = engine::read_records_jsonl(paths.records);
    const auto report = analytics::analyze(records, cfg.bucket, cfg.include_skipped);
    write_file(paths.out, analytics::emit_plot_data(report));
    std::cout << "analyzed " << records.size() << " records -> " << paths.out << "\n";
    return 0;
}

int cmd_build_sft(const cli::RunConfig& cfg, const Paths& paths) {
    const auto raw = sft::read_raw_jsonl(paths.input);
    const auto prompts = sft::PromptLibrary::load(cfg.prompts_dir);

    std::unique_ptr<sft::LlmClient> client;
    const std::string llm_url =
        !paths.llm_url.empty() ? paths.llm_url : env_or("LLM_URL", "");
    if (!llm_url.empty()) {
        client = std::make_unique<wire::HttpLlmClient>(llm_url);
    } else {
        client = std::make_unique<sft::RuleLlmClient>();
    }

    const auto samples = sft::run_pipeline(raw, *client, prompts, cfg.candidates);
    sft::emit_dataset(paths.out, samples);
    std::cout << "retained " << samples.size() << " of " << raw.size() << " samples -> "
              << paths.out << "\n";
    return 0;
}

int cmd_mask_audit(const cli::RunConfig&, const Paths& paths) {
    const auto records = engine::read_records_jsonl(paths.records);

    struct OffsetsLine {
        std::string id;
        loss::OffsetMap offsets;
    };
    std::vector<OffsetsLine> offsets;
    {
        std::ifstream file(paths.offsets);
        if (!file) raise(Errc::IoError, "cannot open offsets file '" + paths.offsets + "'");
        std::string line;
        while (std::getline(file, line)) {
            if (line.empty()) continue;
            json obj = json::parse(line, nullptr, false);
            if (obj.is_discarded() || !obj.is_object() || !obj.contains("offsets")) {
                raise(Errc::IoError, "offsets line must be an object with 'offsets'");
            }
            OffsetsLine entry;
            entry.id = obj.value("id", "");
            for (const auto& pair : obj["offsets"]) {
                if (!pair.is_array() || pair.size() != 2) {
                    raise(Errc::IoError, "offset entries must be [begin, end] pairs");
                }
                entry.offsets.push_back(
                    grammar::CharSpan{pair[0].get<std::size_t>(), pair[1].get<std::size_t>()});
            }
            offsets.push_back(std::move(entry));
        }
    }
    if (offsets.size() != records.size()) {
        raise(Errc::IoError, "offsets line count differs from records line count");
    }

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!paths.out.empty()) {
        file.open(paths.out, std::ios::trunc);
        if (!file) raise(Errc::IoError, "cannot write '" + paths.out + "'");
        out = &file;
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!offsets[i].id.empty() && !records[i].id.empty() &&
            offsets[i].id != records[i].id) {
            raise(Errc::IoError, "offsets id '" + offsets[i].id +
                                     "' does not match record id '" + records[i].id + "'");
        }
        const auto spans = grammar::info_char_spans(records[i].record.trajectory);
        const auto mask = loss::info_mask(offsets[i].offsets, spans);
        std::size_t kept = 0;
        for (auto bit : mask) kept += bit;
        json stats = {{"id", records[i].id},
                      {"tokens", mask.size()},
                      {"kept", kept},
                      {"masked", mask.size() - kept},
                      {"info_spans", spans.size()}};
        *out << stats.dump() << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"search-interleaved retrieval-augmented generation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key = value config file");

    cli::RunConfig cfg;
    Paths paths;
    long long budget_flag = -2; // sentinel: flag not given

    auto add_shared = [&](CLI::App* sub) {
        sub->fallthrough(); // lets --config/--seed appear after the subcommand
        sub->add_option("--seed", cfg.seed, "seed for the deterministic test clients");
    };

    auto* build_index = app.add_subcommand("build-index", "build a vector index from corpus JSONL");
    build_index->add_option("--corpus", paths.corpus, "corpus JSONL path")->required();
    build_index->add_option("--out", paths.out, "output index path")->required();
    add_shared(build_index);

    auto* decode = app.add_subcommand("decode", "run search-interleaved decoding over a dataset");
    decode->add_option("--dataset", paths.dataset, "dataset JSONL path")->required();
    decode->add_option("--out", paths.out, "output records JSONL path")->required();
    decode->add_option("--index", paths.index, "vector index path (omit for an empty index)");
    decode->add_option("--budget", budget_flag, "max executed searches; negative = unbounded");
    decode->add_option("--modalities", cfg.modalities, "allowed modalities, e.g. text,region");
    decode->add_option("--top-k", cfg.top_k, "evidence chunks per search");
    decode->add_option("--max-steps", cfg.max_steps, "generation step limit");
    decode->add_option("--pad-fraction", cfg.pad_fraction, "crop padding fraction");
    decode->add_option("--empty-mask-policy", cfg.empty_mask_policy, "fallback|error");
    decode->add_option("--snippet-max-chars", cfg.snippet_max_chars, "snippet length cap");
    decode->add_option("--dim-text", cfg.dim_text, "test embedder text dimension");
    decode->add_option("--dim-image", cfg.dim_image, "test embedder image dimension");
    add_shared(decode);

    auto* eval_cmd = app.add_subcommand("eval", "score records against gold answers");
    eval_cmd->add_option("--records", paths.records, "records JSONL path")->required();
    eval_cmd->add_option("--gold", paths.gold, "gold JSONL path")->required();
    eval_cmd->add_option("--report", paths.report, "output report JSON path")->required();
    eval_cmd->add_option("--judge-url", paths.judge_url, "remote judge endpoint");
    eval_cmd->add_option("--bucket", cfg.bucket, "gold/meta field for per-bucket reports");
    eval_cmd->add_option("--refusal-lexicon", cfg.refusal_lexicon, "refusal phrase file");
    add_shared(eval_cmd);

    auto* analyze = app.add_subcommand("analyze", "search-behavior statistics from records");
    analyze->add_option("--records", paths.records, "records JSONL path")->required();
    analyze->add_option("--out", paths.out, "output CSV path")->required();
    analyze->add_option("--bucket", cfg.bucket, "meta field to group by");
    analyze->add_flag("--include-skipped", cfg.include_skipped,
                      "count skipped search spans too");
    add_shared(analyze);

    auto* build_sft = app.add_subcommand("build-sft", "construct SFT samples from raw questions");
    build_sft->add_option("--in", paths.input, "raw samples JSONL path")->required();
    build_sft->add_option("--out", paths.out, "output SFT JSONL path")->required();
    build_sft->add_option("--n", cfg.candidates, "trajectory candidates per sample");
    build_sft->add_option("--llm-url", paths.llm_url, "remote completion endpoint");
    build_sft->add_option("--prompts-dir", cfg.prompts_dir, "prompt template directory");
    add_shared(build_sft);

    auto* mask_audit = app.add_subcommand("mask-audit", "per-record loss-mask statistics");
    mask_audit->add_option("--records", paths.records, "records JSONL path")->required();
    mask_audit->add_option("--offsets", paths.offsets, "token offset JSONL path")->required();
    mask_audit->add_option("--out", paths.out, "output JSONL path (default stdout)");
    add_shared(mask_audit);

    try {
        // Config file first, flags override: re-parse flags after applying it.
        app.parse(argc, argv);
        if (!config_path.empty()) {
            cfg.apply(cli::read_kv_config(config_path));
            app.clear();
            app.parse(argc, argv);
        }
        if (budget_flag >= 0) {
            cfg.budget = static_cast<int>(budget_flag);
        } else if (budget_flag == -1) {
            cfg.budget.reset();
        }

        if (build_index->parsed()) return cmd_build_index(cfg, paths);
        if (decode->parsed()) return cmd_decode(cfg, paths);
        if (eval_cmd->parsed()) return cmd_eval(cfg, paths);
        if (analyze->parsed()) return cmd_analyze(cfg, paths);
        if (build_sft->parsed()) return cmd_build_sft(cfg, paths);
        if (mask_audit->parsed()) return cmd_mask_audit(cfg, paths);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ragweave::Error& e) {
        std::cerr << nlohmann::json{{"error", std::string(errc_name(e.code()))},
                                    {"message", e.what()}}
                         .dump()
                  << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "Unhandled"}, {"message", e.what()}}.dump()
                  << "\n";
        return 1;
    }
}

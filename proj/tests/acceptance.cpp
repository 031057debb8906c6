// Acceptance suite: one criterion per function, one PASS/FAIL line each,
// nonzero exit when anything fails. Criterion 12 drives the CLI binary given
// as argv[1] end to end.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ragweave/behavior_analytics.hpp"
#include "ragweave/decode_engine.hpp"
#include "ragweave/eval_harness.hpp"
#include "ragweave/loss_kit.hpp"
#include "ragweave/region_ops.hpp"
#include "ragweave/retrieval_core.hpp"
#include "ragweave/sft_builder.hpp"
#include "ragweave/token_grammar.hpp"
#include "testutil.hpp"

using namespace ragweave;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string g_cli_path;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Check {
    bool ok = true;
    std::string detail;

    void fail(const std::string& message) {
        if (ok) detail = message;
        ok = false;
    }
    void expect(bool condition, const std::string& message) {
        if (!condition) fail(message);
    }
};

std::string read_file(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) return "<unreadable:" + path + ">";
    return std::string((std::istreambuf_iterator<char>(file)), {});
}

// ----------------------------------------------------------------------------
// 1. Truthfulness identity over the published benchmark rows
// ----------------------------------------------------------------------------

Check truthfulness_identity() {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    json rows = json::parse(read_file("data/benchmark_rows.json"), nullptr, false);
    if (rows.is_discarded() || !rows.is_array() || rows.size() < 60) {
        check.fail("benchmark fixture missing or too small");
        return check;
    }
    int errata = 0;
    for (const auto& row : rows) {
        const std::string name = row.value("name", "?");
        const double acc = row["accuracy"].get<double>();
        const double hallu = row["hallucination"].get<double>();
        const double printed = row["truthfulness"].get<double>();

        const auto n_acc = static_cast<std::size_t>(std::llround(10.0 * acc));
        const auto n_hallu = static_cast<std::size_t>(std::llround(10.0 * hallu));
        const std::size_t n_miss = 1000 - n_acc - n_hallu;
        std::vector<eval::Verdict> verdicts;
        verdicts.insert(verdicts.end(), n_acc, eval::Verdict::Accurate);
        verdicts.insert(verdicts.end(), n_miss, eval::Verdict::Missing);
        verdicts.insert(verdicts.end(), n_hallu, eval::Verdict::Hallucination);
        const auto report = eval::aggregate(verdicts);

        // A handful of printed rows contradict their own accuracy and
        // hallucination columns beyond rounding (see README); for those the
        // arithmetic identity acc - hallu is the checkable expectation.
        const double identity = acc - hallu;
        double expected = printed;
        if (std::abs(identity - printed) > 0.1 + 1e-9) {
            expected = identity;
            ++errata;
            std::printf("       erratum %-28s printed %+6.1f vs acc-hallu %+6.1f\n",
                        name.c_str(), printed, identity);
        }
        if (std::abs(report.truthfulness - expected) > 0.1 + 1e-9) {
            check.fail(name + ": aggregate gave " + std::to_string(report.truthfulness));
        }
        if (std::abs(report.accuracy + report.missing + report.hallucination - 100.0) > 0.05) {
            check.fail(name + ": rates do not sum to 100");
        }
        if (std::abs(report.truthfulness - (report.accuracy - report.hallucination)) > 0.05) {
            check.fail(name + ": identity broken inside the report");
        }
    }
    check.expect(errata == 7, "expected exactly 7 self-inconsistent source rows, saw " +
                                  std::to_string(errata));
    const double elapsed = seconds_since(start);
    check.expect(elapsed < 1.0, "took " + std::to_string(elapsed) + "s (limit 1s)");
    if (check.ok) {
        check.detail = std::to_string(rows.size()) + " rows, " + std::to_string(errata) +
                       " documented source errata";
    }
    return check;
}

// ----------------------------------------------------------------------------
// 2. Parser round-trip and malformed error classes
// ----------------------------------------------------------------------------

Check parser_round_trip() {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    testutil::Rng rng(0xA11CE);
    for (int rep = 0; rep < 10000 && check.ok; ++rep) {
        const auto t = testutil::random_trajectory(rng);
        const std::string serialized = grammar::serialize_trajectory(t);
        try {
            if (!(grammar::parse_trajectory(serialized) == t)) {
                check.fail("round-trip mismatch at rep " + std::to_string(rep));
            }
        } catch (const Error& e) {
            check.fail(std::string("round-trip threw: ") + e.what());
        }
    }
    int malformed = 0;
    while (malformed < 1000 && check.ok) {
        const auto t = testutil::random_trajectory(rng, /*ascii_only=*/true);
        const std::string mutant =
            testutil::mutate_serialized(rng, grammar::serialize_trajectory(t));
        const auto expected = testutil::bracket_oracle(mutant);
        if (!expected) {
            try {
                grammar::parse_trajectory(mutant);
            } catch (const Error& e) {
                check.fail(std::string("oracle says well-formed, parser threw ") + e.what());
            }
            continue;
        }
        ++malformed;
        try {
            grammar::parse_trajectory(mutant);
            check.fail("parser accepted a malformed mutant");
        } catch (const Error& e) {
            if (e.code() != *expected) {
                check.fail("error class mismatch on '" + mutant + "': parser " +
                           std::string(errc_name(e.code())) + " vs oracle " +
                           std::string(errc_name(*expected)));
            }
        }
    }
    const double elapsed = seconds_since(start);
    check.expect(elapsed < 10.0, "took " + std::to_string(elapsed) + "s (limit 10s)");
    if (check.ok) {
        check.detail = "10000 round-trips, 1000 malformed mutants, " +
                       std::to_string(elapsed).substr(0, 4) + "s";
    }
    return check;
}

// ----------------------------------------------------------------------------
// 3. Masking oracle equivalence
// ----------------------------------------------------------------------------

Check masking_oracle() {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    testutil::Rng rng(0xBEEF);
    for (int rep = 0; rep < 10000 && check.ok; ++rep) {
        std::vector<grammar::CharSpan> offsets;
        std::size_t at = rng() % 3;
        const std::size_t tokens = rng() % 24;
        for (std::size_t i = 0; i < tokens; ++i) {
            const std::size_t end = at + 1 + rng() % 6;
            offsets.push_back({at, end});
            at = end + rng() % 3; // gaps allowed, like real offset maps
        }
        std::vector<grammar::CharSpan> spans;
        std::size_t s = rng() % 5;
        const std::size_t span_count = rng() % 6;
        for (std::size_t i = 0; i < span_count && s + 1 < at + 12; ++i) {
            const std::size_t end = s + 1 + rng() % 8;
            spans.push_back({s, end});
            s = end + rng() % 4;
        }
        const auto got = loss::info_mask(offsets, spans);
        const auto expected = testutil::byte_overlap_mask_oracle(offsets, spans);
        if (got != expected) check.fail("mask mismatch at rep " + std::to_string(rep));
    }
    // Boundary cases pinned explicitly: touching spans never mask.
    check.expect(loss::info_mask({{5, 8}}, {{8, 20}}) == loss::LossMask{1},
                 "e_i == s_k must stay live");
    check.expect(loss::info_mask({{20, 24}}, {{8, 20}}) == loss::LossMask{1},
                 "s_i == e_k must stay live");
    check.expect(loss::info_mask({{5, 9}}, {{8, 20}}) == loss::LossMask{0},
                 "one byte of overlap must mask");
    const double elapsed = seconds_since(start);
    check.expect(elapsed < 5.0, "took " + std::to_string(elapsed) + "s (limit 5s)");
    if (check.ok) check.detail = "10000 random offset/span pairs match the per-byte oracle";
    return check;
}

// ----------------------------------------------------------------------------
// 4. Masked-loss insensitivity
// ----------------------------------------------------------------------------

Check masked_loss_insensitivity() {
    Check check;
    testutil::Rng rng(0xD00D);
    for (int rep = 0; rep < 1000 && check.ok; ++rep) {
        const std::size_t n = 1 + rng() % 64;
        std::vector<double> lp(n);
        loss::LossMask mask(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            lp[i] = -static_cast<double>(rng() % 2000) / 100.0;
            mask[i] = rng() % 3 != 0;
        }
        mask[rng() % n] = 1;
        const double base = loss::masked_lm_loss(lp, mask);
        auto poisoned = lp;
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask[i]) {
                poisoned[i] = (static_cast<double>(rng() % 4000) - 2000.0) * 1e6;
            }
        }
        if (loss::masked_lm_loss(poisoned, mask) != base) {
            check.fail("loss changed when masked positions changed, rep " +
                       std::to_string(rep));
        }
    }
    if (check.ok) check.detail = "1000 instances, change is exactly zero";
    return check;
}

// ----------------------------------------------------------------------------
// 5. Retrieval exactness on a 10k corpus
// ----------------------------------------------------------------------------

Check retrieval_exactness() {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    retrieval::HashEmbedder embedder(2024, 48, 48);
    std::vector<retrieval::CorpusDocument> docs;
    docs.reserve(10000);
    for (int i = 0; i < 10000; ++i) {
        retrieval::CorpusDocument doc;
        char id[16];
        std::snprintf(id, sizeof(id), "d%05d", i);
        doc.doc_id = id;
        doc.title = "T" + std::to_string(i);
        doc.text = "text seed " + std::to_string(i);
        doc.text_embedding = embedder.embed_text(doc.text);
        if (i % 2 == 0) {
            const std::string img = "image seed " + std::to_string(i);
            doc.image_embedding = embedder.embed_image(
                {reinterpret_cast<const std::uint8_t*>(img.data()), img.size()});
        }
        docs.push_back(std::move(doc));
    }
    // Deliberate exact ties: ten documents share one embedding.
    for (int i = 1; i <= 10; ++i) docs[9000 + i].text_embedding = docs[9000].text_embedding;

    auto docs_copy = docs;
    const auto index = retrieval::VectorIndex::build(std::move(docs));

    testutil::Rng rng(606);
    const int k = 10;
    for (int q = 0; q < 200 && check.ok; ++q) {
        retrieval::SearchQuery query;
        std::vector<float> embedded;
        const int modality = q % 3;
        if (modality == 0) {
            query = retrieval::SearchQuery::from_text(
                q % 6 == 0 ? docs_copy[9000].text : "probe " + std::to_string(rng()));
            embedded = embedder.embed_text(query.text);
        } else {
            std::vector<std::uint8_t> bytes(8);
            for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
            query = modality == 1 ? retrieval::SearchQuery::from_image(bytes)
                                  : retrieval::SearchQuery::from_region(bytes);
            embedded = embedder.embed_image(bytes);
        }
        const auto evidence = retrieval::search(index, query, k, embedder);
        const auto expected = testutil::brute_force_top_k(
            docs_copy, embedded, k, query.modality != grammar::Modality::Text);
        if (evidence.chunks.size() != expected.size()) {
            check.fail("result size mismatch at query " + std::to_string(q));
            break;
        }
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (evidence.chunks[i].doc_id != expected[i].doc_id) {
                check.fail("order/tie-break mismatch at query " + std::to_string(q) +
                           " rank " + std::to_string(i));
                break;
            }
            if (std::abs(evidence.chunks[i].score - expected[i].score) > 1e-9) {
                check.fail("score mismatch beyond 1e-9 at query " + std::to_string(q));
                break;
            }
        }
    }
    const double elapsed = seconds_since(start);
    check.expect(elapsed < 30.0, "took " + std::to_string(elapsed) + "s (limit 30s)");
    if (check.ok) {
        check.detail = "10000 docs, 200 queries across 3 modalities, " +
                       std::to_string(elapsed).substr(0, 4) + "s";
    }
    return check;
}

// ----------------------------------------------------------------------------
// 6. Budget semantics
// ----------------------------------------------------------------------------

struct CountingRetriever : retrieval::Retriever {
    retrieval::Evidence search(const retrieval::SearchQuery& query, int) override {
        retrieval::Evidence evidence;
        evidence.chunks.push_back(retrieval::EvidenceChunk{
            "d", "T",
            "fact for " + (query.modality == grammar::Modality::Text ? query.text : "visual"),
            1.0});
        return evidence;
    }
};

std::vector<std::string> four_search_script() {
    std::vector<std::string> script;
    for (int i = 0; i < 4; ++i) {
        script.push_back("claim " + std::to_string(i) + " ");
        script.push_back("<search>");
        script.push_back("query " + std::to_string(i));
        script.push_back("</search>");
    }
    script.push_back(" final answer");
    script.push_back("</s>");
    return script;
}

Check budget_semantics() {
    Check check;
    const std::vector<std::size_t> expected{0, 1, 2, 3, 4, 4};
    for (int budget = 0; budget <= 5; ++budget) {
        engine::ScriptedGenerator gen(four_search_script());
        CountingRetriever retriever;
        engine::EngineConfig cfg;
        cfg.search_budget = budget;
        const auto rec =
            engine::decode("q", engine::ImageRef::absent(), gen, retriever, cfg);
        if (rec.executed_count() != expected[budget]) {
            check.fail("budget " + std::to_string(budget) + " executed " +
                       std::to_string(rec.executed_count()) + ", expected " +
                       std::to_string(expected[budget]));
        }
        const auto info = grammar::info_char_spans(rec.trajectory);
        if (budget == 0 && !info.empty()) {
            check.fail("budget 0 produced info segments");
        }
        if (info.size() != rec.executed_count()) {
            check.fail("info segment count differs from executed searches");
        }
    }
    if (check.ok) check.detail = "executed counts for budgets 0..5 are [0,1,2,3,4,4]";
    return check;
}

// ----------------------------------------------------------------------------
// 7. Modality semantics
// ----------------------------------------------------------------------------

Check modality_semantics() {
    Check check;
    region::Image img;
    img.width = 6;
    img.height = 6;
    img.rgb.assign(6 * 6 * 3, 120);
    auto mask = region::BinaryMask::zeros(6, 6);
    mask.set(2, 2);
    mask.set(3, 3);

    engine::ScriptedGenerator gen(
        {"a ", "<search>", "<region>", "</search>", " b ", "<search>", "free text query",
         "</search>", " c ", "<search>", "<image>", "</search>", " d ", "<search>",
         "<region>", "</search>", " done", "</s>"},
        mask);
    CountingRetriever retriever;
    engine::EngineConfig cfg;
    cfg.allowed_modalities = {grammar::Modality::Region};
    const auto rec = engine::decode(
        "q", engine::ImageRef::from_bytes(region::encode_png(img)), gen, retriever, cfg);
    std::size_t executed = 0;
    for (const auto& search : rec.searches) {
        if (!search.executed) continue;
        ++executed;
        if (search.query.modality != grammar::Modality::Region) {
            check.fail("an executed search was not region-modality");
        }
    }
    check.expect(executed == 2, "expected the 2 region searches to execute, saw " +
                                    std::to_string(executed));
    // The text span is recorded as skipped; banned-marker spans never appear.
    std::size_t skipped_text = 0;
    for (const auto& search : rec.searches) {
        if (!search.executed && search.query.modality == grammar::Modality::Text) {
            ++skipped_text;
        }
    }
    check.expect(skipped_text == 1, "text span should be recorded as skipped");
    if (check.ok) check.detail = "under allowed={region}, only region searches execute";
    return check;
}

// ----------------------------------------------------------------------------
// 8. Loss-kit numerics
// ----------------------------------------------------------------------------

Check loss_kit_numerics() {
    Check check;
    testutil::Rng rng(0xFEED);
    const double step = 1e-5;
    for (int rep = 0; rep < 100 && check.ok; ++rep) {
        loss::SoftMaskPair pair;
        const std::size_t n = 4 + rng() % 24;
        pair.predicted.resize(n);
        pair.target.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            pair.predicted[i] = 0.05 + 0.9 * (static_cast<double>(rng() % 1000) / 999.0);
            pair.target[i] = rng() % 2 ? 1.0 : 0.0;
        }
        const auto grad = loss::focal_tversky_grad(pair);
        for (std::size_t i = 0; i < n; ++i) {
            auto plus = pair, minus = pair;
            plus.predicted[i] += step;
            minus.predicted[i] -= step;
            const double numeric =
                (loss::focal_tversky(plus) - loss::focal_tversky(minus)) / (2 * step);
            const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
            if (std::abs(grad[i] - numeric) / denom > 1e-4) {
                check.fail("gradient mismatch at rep " + std::to_string(rep) + " index " +
                           std::to_string(i));
                break;
            }
        }
    }

    loss::SoftMaskPair perfect;
    perfect.predicted = {1.0, 0.0, 1.0, 0.0, 1.0};
    perfect.target = {1.0, 0.0, 1.0, 0.0, 1.0};
    check.expect(loss::focal_tversky(perfect) <= 1e-9, "perfect prediction loss above 1e-9");

    loss::SoftMaskPair half;
    half.predicted.assign(32, 0.5);
    half.target.assign(32, 1.0);
    for (std::size_t i = 0; i < 16; ++i) half.target[i] = 0.0;
    check.expect(std::abs(loss::bce_loss(half) - std::log(2.0)) <= 1e-9,
                 "bce(0.5) is not ln 2 within 1e-9");

    const std::vector<std::vector<double>> emb = {{0.25, -1.5, 3.0}, {0.0, 2.0}};
    check.expect(loss::gaussian_kl(emb, emb) == 0.0, "gaussian_kl(identical) != 0");

    if (check.ok) check.detail = "100 gradient checks vs central differences at 1e-4";
    return check;
}

// ----------------------------------------------------------------------------
// 9. BIO merge vs linear-scan oracle
// ----------------------------------------------------------------------------

Check bio_merge() {
    Check check;
    // Exhaustive over all tag sequences of length <= 8.
    for (int len = 0; len <= 8 && check.ok; ++len) {
        const long total = static_cast<long>(std::pow(3, len));
        for (long code = 0; code < total; ++code) {
            std::vector<loss::BioTag> tags;
            long v = code;
            for (int i = 0; i < len; ++i) {
                tags.push_back(static_cast<loss::BioTag>(v % 3));
                v /= 3;
            }
            if (loss::merge_bio_spans(tags) != testutil::bio_oracle(tags)) {
                check.fail("mismatch at exhaustive code " + std::to_string(code) +
                           " length " + std::to_string(len));
                break;
            }
        }
    }
    testutil::Rng rng(0xB10);
    for (int rep = 0; rep < 10000 && check.ok; ++rep) {
        std::vector<loss::BioTag> tags(9 + rng() % 92);
        for (auto& tag : tags) tag = static_cast<loss::BioTag>(rng() % 3);
        if (loss::merge_bio_spans(tags) != testutil::bio_oracle(tags)) {
            check.fail("mismatch at random rep " + std::to_string(rep));
        }
    }
    if (check.ok) check.detail = "3^0..3^8 exhaustive plus 10000 random longer sequences";
    return check;
}

// ----------------------------------------------------------------------------
// 10. Region geometry
// ----------------------------------------------------------------------------

Check region_geometry() {
    Check check;
    // Exhaustive 3x3 masks against the coordinate-scan oracle.
    for (int bits = 0; bits < (1 << 9) && check.ok; ++bits) {
        auto mask = region::BinaryMask::zeros(3, 3);
        for (int i = 0; i < 9; ++i) mask.bits[i] = (bits >> i) & 1;
        for (const double pad : {0.0, 0.1, 0.5, 1.0, 2.0}) {
            if (region::mask_to_box(mask, pad) != testutil::box_oracle(mask, pad)) {
                check.fail("3x3 oracle mismatch at bits " + std::to_string(bits));
                break;
            }
        }
    }
    testutil::Rng rng(0x9E0);
    for (int rep = 0; rep < 10000 && check.ok; ++rep) {
        const int h = 1 + static_cast<int>(rng() % 16);
        const int w = 1 + static_cast<int>(rng() % 16);
        auto mask = region::BinaryMask::zeros(h, w);
        for (auto& bit : mask.bits) bit = rng() % 4 == 0;
        const double a = static_cast<double>(rng() % 25) / 10.0;
        const double b = a + static_cast<double>(rng() % 25) / 10.0;
        const auto inner = region::mask_to_box(mask, a);
        const auto outer = region::mask_to_box(mask, b);
        if (!inner.has_value()) {
            if (mask.popcount() != 0) check.fail("non-empty mask produced no box");
            continue;
        }
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (mask.at(r, c) && !(c >= inner->x0 && c < inner->x1 && r >= inner->y0 &&
                                       r < inner->y1)) {
                    check.fail("containment violated at rep " + std::to_string(rep));
                }
            }
        }
        if (!(outer->x0 <= inner->x0 && outer->y0 <= inner->y0 && outer->x1 >= inner->x1 &&
              outer->y1 >= inner->y1)) {
            check.fail("pad monotonicity violated at rep " + std::to_string(rep));
        }
        if (outer->x0 < 0 || outer->y0 < 0 || outer->x1 > w || outer->y1 > h) {
            check.fail("box exceeds mask bounds at rep " + std::to_string(rep));
        }
    }
    if (check.ok) check.detail = "2^9 exhaustive 3x3 masks and 10000 random masks";
    return check;
}

// ----------------------------------------------------------------------------
// 11. SFT pipeline fixtures
// ----------------------------------------------------------------------------

Check sft_fixtures() {
    Check check;
    sft::RuleLlmClient client;
    const auto prompts = sft::PromptLibrary::load("data/prompts");

    auto raw = [](const char* id, const char* question, const char* gold) {
        sft::RawSample sample;
        sample.id = id;
        sample.question = question;
        sample.gold_answer = gold;
        return sample;
    };

    const auto translate =
        sft::select_question(raw("t", "Translate this.", "-"), client, prompts);
    check.expect(!translate.retained, "'Translate this.' must not be retained");

    const auto brand =
        sft::select_question(raw("b", "What brand of car is this?", "VW"), client, prompts);
    check.expect(brand.retained && brand.type == sft::QuestionType::FineGrainedEntity,
                 "car-brand question must be retained as entity identification");

    const auto arena = raw("a", "What's the capacity of this arena?", "About 19,000");
    const auto arena_subs = sft::decompose(arena, client, prompts);
    const auto arena_traj = sft::generate_trajectory(arena, arena_subs, client, prompts, 5);
    const auto arena_assign =
        sft::assign_query_types(arena, arena_traj, arena_subs, client, prompts);
    check.expect(arena_assign.size() == 2 &&
                     arena_assign[0].modality == grammar::Modality::Image &&
                     arena_assign[1].modality == grammar::Modality::Text,
                 "arena sample must route [image, text]");

    const auto plant = raw("p", "What's the ideal temperature for this plant?", "65-85F");
    const auto plant_subs = sft::decompose(plant, client, prompts);
    const auto plant_traj = sft::generate_trajectory(plant, plant_subs, client, prompts, 5);
    const auto plant_assign =
        sft::assign_query_types(plant, plant_traj, plant_subs, client, prompts);
    check.expect(plant_assign.size() == 2 &&
                     plant_assign[0].modality == grammar::Modality::Region &&
                     plant_assign[0].query == "plant" &&
                     plant_assign[1].modality == grammar::Modality::Text,
                 "plant sample must route [region(plant), text]");

    // Byte-stable emission across runs.
    const std::vector<sft::RawSample> raws{arena, plant,
                                           raw("v",
                                               "Did this vehicle appear in the movie "
                                               "Pretty Woman back in the 90s?",
                                               "No")};
    const auto dir = fs::temp_directory_path();
    const std::string path1 = (dir / "rw_accept_sft1.jsonl").string();
    const std::string path2 = (dir / "rw_accept_sft2.jsonl").string();
    sft::emit_dataset(path1, sft::run_pipeline(raws, client, prompts, 5));
    sft::emit_dataset(path2, sft::run_pipeline(raws, client, prompts, 5));
    check.expect(read_file(path1) == read_file(path2), "emitted JSONL differs across runs");
    check.expect(!read_file(path1).empty(), "emitted JSONL is empty");
    fs::remove(path1);
    fs::remove(path2);

    if (check.ok) check.detail = "selection, routing, and byte-stable emission all hold";
    return check;
}

// ----------------------------------------------------------------------------
// 12. End-to-end determinism through the CLI
// ----------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string command = g_cli_path + " " + args;
    return std::system(command.c_str());
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream file(path, std::ios::trunc | std::ios::binary);
    file.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// Builds one complete fixture world (corpus, image, dataset, gold) under dir.
void build_fixture_world(const fs::path& dir) {
    fs::create_directories(dir);
    retrieval::HashEmbedder embedder(5);

    std::vector<retrieval::CorpusDocument> docs;
    const std::vector<std::pair<std::string, std::string>> entries = {
        {"Toyota RAV4", "The Toyota RAV4 is a compact crossover SUV launched in 1994."},
        {"Pretty Woman", "Pretty Woman is a 1990 romantic comedy film."},
        {"Madison Square Garden", "Madison Square Garden seats about 19000 people."},
        {"Ravenea rivularis", "Ravenea rivularis, the majesty palm, prefers 65-85F."},
        {"Eiffel Tower", "The Eiffel Tower is in Paris, France."},
    };
    int i = 0;
    for (const auto& [title, text] : entries) {
        retrieval::CorpusDocument doc;
        doc.doc_id = "k" + std::to_string(i++);
        doc.title = title;
        doc.text = text;
        doc.text_embedding = embedder.embed_text(text);
        const std::string img = "picture of " + title;
        doc.image_embedding = embedder.embed_image(
            {reinterpret_cast<const std::uint8_t*>(img.data()), img.size()});
        docs.push_back(std::move(doc));
    }
    for (int extra = 0; extra < 40; ++extra) {
        retrieval::CorpusDocument doc;
        doc.doc_id = "z" + std::to_string(extra);
        doc.title = "Filler " + std::to_string(extra);
        doc.text = "Filler body " + std::to_string(extra);
        doc.text_embedding = embedder.embed_text(doc.text);
        docs.push_back(std::move(doc));
    }
    retrieval::write_corpus_jsonl((dir / "corpus.jsonl").string(), docs);

    region::Image img;
    img.width = 10;
    img.height = 10;
    img.rgb.resize(300);
    for (std::size_t p = 0; p < img.rgb.size(); ++p) {
        img.rgb[p] = static_cast<std::uint8_t>(37 * p % 251);
    }
    const auto png = region::encode_png(img);
    std::ofstream image_file(dir / "scene.png", std::ios::binary);
    image_file.write(reinterpret_cast<const char*>(png.data()),
                     static_cast<std::streamsize>(png.size()));
    image_file.close();

    auto script = [](std::initializer_list<const char*> tokens) {
        json arr = json::array();
        for (const auto* tok : tokens) arr.push_back(tok);
        return arr;
    };
    std::string mask_bits(100, '0');
    for (int r = 3; r <= 5; ++r) {
        for (int c = 4; c <= 6; ++c) mask_bits[r * 10 + c] = '1';
    }

    std::ostringstream dataset;
    json s1;
    s1["id"] = "veh";
    s1["question"] = "Did this vehicle appear in the movie Pretty Woman?";
    s1["image"] = (dir / "scene.png").string();
    s1["script"] =
        script({"The vehicle ", "<search>", "<region>", "</search>", " is a Toyota RAV4. ",
                "The movie came out ", "<search>", "when was Pretty Woman released?",
                "</search>", " in 1990, the SUV ", "<search>",
                "when did the Toyota RAV4 launch?", "</search>",
                " in 1994, so the answer is no.", "</s>"});
    s1["mask"] = {{"height", 10}, {"width", 10}, {"bits", mask_bits}};
    s1["egocentric"] = "ego";
    dataset << s1.dump() << "\n";

    json s2;
    s2["id"] = "cap";
    s2["question"] = "What is the capacity of this arena?";
    s2["image"] = (dir / "scene.png").string();
    s2["script"] = script({"The place ", "<search>", "<image>", "</search>",
                           " holds around 19000 people.", "</s>"});
    s2["egocentric"] = "non-ego";
    dataset << s2.dump() << "\n";

    json s3;
    s3["id"] = "plain";
    s3["question"] = "What is the capital of France?";
    s3["script"] = script({"Paris", "</s>"});
    s3["egocentric"] = "non-ego";
    dataset << s3.dump() << "\n";

    json s4;
    s4["id"] = "refuse";
    s4["question"] = "What is the serial number of this device?";
    s4["script"] = script({"I don't know.", "</s>"});
    s4["egocentric"] = "ego";
    dataset << s4.dump() << "\n";
    write_text(dir / "dataset.jsonl", dataset.str());

    std::ostringstream gold;
    gold << json{{"id", "veh"}, {"gold", "No"}, {"egocentric", "ego"}}.dump() << "\n";
    gold << json{{"id", "cap"}, {"gold", "around 19000 people"}, {"egocentric", "non-ego"}}
                .dump()
         << "\n";
    gold << json{{"id", "plain"}, {"gold", "Paris"}, {"egocentric", "non-ego"}}.dump() << "\n";
    gold << json{{"id", "refuse"}, {"gold", "RW-998"}, {"egocentric", "ego"}}.dump() << "\n";
    write_text(dir / "gold.jsonl", gold.str());
}

// One full pipeline pass; returns concatenated output bytes for comparison.
std::string run_pipeline_once(const fs::path& dir, Check& check) {
    const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    if (run_cli("build-index --corpus " + q(dir / "corpus.jsonl") + " --out " +
                q(dir / "index.bin") + " > /dev/null") != 0) {
        check.fail("build-index failed");
        return {};
    }
    if (run_cli("decode --dataset " + q(dir / "dataset.jsonl") + " --index " +
                q(dir / "index.bin") + " --out " + q(dir / "records.jsonl") +
                " --seed 5 --top-k 3 > /dev/null") != 0) {
        check.fail("decode failed");
        return {};
    }
    if (run_cli("eval --records " + q(dir / "records.jsonl") + " --gold " +
                q(dir / "gold.jsonl") + " --report " + q(dir / "report.json") +
                " --bucket egocentric > /dev/null") != 0) {
        check.fail("eval failed");
        return {};
    }
    if (run_cli("analyze --records " + q(dir / "records.jsonl") +
                " --bucket egocentric --out " + q(dir / "behavior.csv") + " > /dev/null") !=
        0) {
        check.fail("analyze failed");
        return {};
    }
    return read_file((dir / "index.bin").string()) + "\x01" +
           read_file((dir / "records.jsonl").string()) + "\x01" +
           read_file((dir / "report.json").string()) + "\x01" +
           read_file((dir / "behavior.csv").string());
}

Check end_to_end_determinism() {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    const auto base = fs::temp_directory_path() / "rw_accept_e2e";
    fs::remove_all(base);
    const auto dir1 = base / "run1";
    const auto dir2 = base / "run2";
    build_fixture_world(dir1);
    build_fixture_world(dir2);

    const std::string bytes1 = run_pipeline_once(dir1, check);
    const std::string bytes2 = run_pipeline_once(dir2, check);
    if (!check.ok) return check;
    check.expect(bytes1 == bytes2, "pipeline outputs differ between seeded runs");
    check.expect(!bytes1.empty(), "pipeline produced no output");

    // Spot checks on the run-1 artifacts.
    const auto records = engine::read_records_jsonl((dir1 / "records.jsonl").string());
    check.expect(records.size() == 4, "expected 4 records");
    for (const auto& line : records) {
        if (line.id == "veh") {
            check.expect(line.record.executed_count() == 3, "veh should execute 3 searches");
            check.expect(line.record.searches[0].query.modality == grammar::Modality::Region,
                         "veh search 1 should be region");
        }
        if (line.id == "plain") {
            check.expect(line.record.final_answer == "Paris", "plain answer wrong");
        }
    }
    json report = json::parse(read_file((dir1 / "report.json").string()), nullptr, false);
    check.expect(!report.is_discarded(), "report.json unreadable");
    if (!report.is_discarded()) {
        check.expect(report["n"] == 4, "report sample count wrong");
        check.expect(report.contains("buckets") && report["buckets"].contains("ego"),
                     "report missing ego bucket");
        const double truth = report.value("truthfulness", -1000.0);
        const double acc = report.value("accuracy", -1.0);
        const double hallu = report.value("hallucination", -1.0);
        check.expect(std::abs(truth - (acc - hallu)) < 0.05, "report identity broken");
    }
    const std::string csv = read_file((dir1 / "behavior.csv").string());
    check.expect(csv.rfind("bucket,statistic,key,value\n", 0) == 0, "behavior csv malformed");
    check.expect(csv.find("ego,call_histogram,") != std::string::npos,
                 "behavior csv missing ego histogram");

    // Budget 0 through the CLI leaves no info blocks anywhere.
    const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    if (run_cli("decode --dataset " + q(dir1 / "dataset.jsonl") + " --index " +
                q(dir1 / "index.bin") + " --out " + q(dir1 / "records0.jsonl") +
                " --seed 5 --budget 0 > /dev/null") != 0) {
        check.fail("decode --budget 0 failed");
    } else {
        for (const auto& line :
             engine::read_records_jsonl((dir1 / "records0.jsonl").string())) {
            check.expect(grammar::info_char_spans(line.record.trajectory).empty(),
                         "budget 0 record contains info segments");
            check.expect(line.record.executed_count() == 0, "budget 0 executed a search");
        }
    }

    // Usage errors exit with 2, per the CLI contract.
    const int usage = run_cli("decode --no-such-flag 2> /dev/null");
    check.expect(WIFEXITED(usage) && WEXITSTATUS(usage) == 2,
                 "usage error should exit with code 2");

    fs::remove_all(base);
    const double elapsed = seconds_since(start);
    check.expect(elapsed < 120.0, "took " + std::to_string(elapsed) + "s (limit 120s)");
    if (check.ok) {
        check.detail = "two seeded runs byte-identical, " +
                       std::to_string(elapsed).substr(0, 4) + "s";
    }
    return check;
}

} // namespace

int main(int argc, char** argv) {
    g_cli_path = argc > 1 ? argv[1] : "./build/ragweave";

    struct Criterion {
        const char* name;
        std::function<Check()> run;
    };
    const std::vector<Criterion> criteria = {
        {"truthfulness-identity", truthfulness_identity},
        {"parser-round-trip", parser_round_trip},
        {"masking-oracle", masking_oracle},
        {"masked-loss-insensitivity", masked_loss_insensitivity},
        {"retrieval-exactness", retrieval_exactness},
        {"budget-semantics", budget_semantics},
        {"modality-semantics", modality_semantics},
        {"loss-kit-numerics", loss_kit_numerics},
        {"bio-merge", bio_merge},
        {"region-geometry", region_geometry},
        {"sft-pipeline-fixtures", sft_fixtures},
        {"end-to-end-determinism", end_to_end_determinism},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        Check check;
        try {
            check = criterion.run();
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = std::string("threw: ") + e.what();
        }
        if (check.ok) {
            std::printf("[PASS] %-26s %s\n", criterion.name, check.detail.c_str());
        } else {
            ++failures;
            std::printf("[FAIL] %-26s %s\n", criterion.name, check.detail.c_str());
        }
        std::fflush(stdout);
    }
    if (failures > 0) {
        std::printf("%d of %zu acceptance criteria failed\n", failures, criteria.size());
    }
    return failures == 0 ? 0 : 1;
}

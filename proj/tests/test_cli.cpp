#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ragweave/decode_engine.hpp"
#include "ragweave/sft_builder.hpp"

// Subcommand-level checks that shell out to the built binary. The test runner
// exports RAGWEAVE_CLI; without it these cases are skipped.

using namespace ragweave;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* path = std::getenv("RAGWEAVE_CLI");
    return path && *path ? path : "";
}

#define REQUIRE_CLI()                                      \
    if (cli_path().empty()) {                              \
        MESSAGE("[ SKIP ] RAGWEAVE_CLI not set");          \
        return;                                            \
    }

int run(const std::string& args) {
    const int status = std::system((cli_path() + " " + args).c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream file(path, std::ios::binary);
    REQUIRE(file);
    return std::string((std::istreambuf_iterator<char>(file)), {});
}

void spit(const fs::path& path, const std::string& content) {
    std::ofstream file(path, std::ios::trunc | std::ios::binary);
    file << content;
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "rw_cli_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("cli help and usage exit codes") {
    REQUIRE_CLI();
    CHECK(run("--help > /dev/null") == 0);
    CHECK(run("decode --help > /dev/null") == 0);
    CHECK(run("decode --bogus-flag 2> /dev/null") == 2);
    CHECK(run("2> /dev/null") == 2); // a subcommand is required
}

TEST_CASE("cli runtime errors are machine readable and exit 1") {
    REQUIRE_CLI();
    TempDir tmp;
    const auto err_path = tmp.path / "err.json";
    CHECK(run("build-index --corpus /nonexistent.jsonl --out " +
              (tmp.path / "x.bin").string() + " 2> " + err_path.string()) == 1);
    const json err = json::parse(slurp(err_path), nullptr, false);
    REQUIRE(!err.is_discarded());
    CHECK(err.contains("error"));
    CHECK(err["error"] == "IoError");
}

TEST_CASE("mask-audit emits per-record statistics") {
    REQUIRE_CLI();
    TempDir tmp;

    // One record whose trajectory has a single info span at bytes [8, 48).
    engine::RecordLine line;
    line.id = "r1";
    line.record.trajectory = grammar::parse_trajectory(
        "Answer: <information>evidence here</information> done");
    spit(tmp.path / "records.jsonl", engine::record_line_to_json(line) + "\n");
    // Tokens: [0,8) touches the span boundary (stays live), [8,21) overlaps,
    // [48,53) is past the closing marker.
    spit(tmp.path / "offsets.jsonl",
         R"({"id":"r1","offsets":[[0,8],[8,21],[48,53]]})" "\n");

    const auto out = tmp.path / "stats.jsonl";
    REQUIRE(run("mask-audit --records " + (tmp.path / "records.jsonl").string() +
                " --offsets " + (tmp.path / "offsets.jsonl").string() + " --out " +
                out.string()) == 0);
    const json stats = json::parse(slurp(out), nullptr, false);
    REQUIRE(!stats.is_discarded());
    CHECK(stats["id"] == "r1");
    CHECK(stats["tokens"] == 3);
    CHECK(stats["masked"] == 1);
    CHECK(stats["kept"] == 2);
    CHECK(stats["info_spans"] == 1);

    // Mismatched line counts are an error.
    spit(tmp.path / "offsets2.jsonl", "");
    CHECK(run("mask-audit --records " + (tmp.path / "records.jsonl").string() +
              " --offsets " + (tmp.path / "offsets2.jsonl").string() +
              " 2> /dev/null") == 1);
}

TEST_CASE("build-sft produces stable, valid samples") {
    REQUIRE_CLI();
    TempDir tmp;
    std::string raws;
    raws += json{{"id", "1"}, {"question", "Translate this."}, {"gold", "-"}}.dump() + "\n";
    raws += json{{"id", "2"},
                 {"question", "What brand of car is this?"},
                 {"gold", "Volkswagen"}}
                .dump() +
            "\n";
    raws += json{{"id", "3"},
                 {"question", "What's the ideal temperature for this plant?"},
                 {"gold", "65-85F"}}
                .dump() +
            "\n";
    spit(tmp.path / "raw.jsonl", raws);

    const auto out1 = tmp.path / "sft1.jsonl";
    const auto out2 = tmp.path / "sft2.jsonl";
    REQUIRE(run("build-sft --in " + (tmp.path / "raw.jsonl").string() + " --out " +
                out1.string() + " --n 5 > /dev/null") == 0);
    REQUIRE(run("build-sft --in " + (tmp.path / "raw.jsonl").string() + " --out " +
                out2.string() + " --n 5 > /dev/null") == 0);
    CHECK(slurp(out1) == slurp(out2));

    std::ifstream file(out1);
    std::string line;
    std::size_t count = 0;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        const auto sample = sft::sft_sample_from_json(line);
        CHECK(sft::is_retained(sample.question_type));
        ++count;
    }
    CHECK(count == 2); // the translation question is dropped
}

TEST_CASE("config file values apply with flag override") {
    REQUIRE_CLI();
    TempDir tmp;
    spit(tmp.path / "run.cfg",
         "budget = 0\n"
         "top_k = 2\n"
         "seed = 5\n");
    spit(tmp.path / "dataset.jsonl",
         json{{"id", "a"},
              {"question", "q"},
              {"script", json::array({"x ", "<search>", "find it", "</search>", " y", "</s>"})}}
             .dump() +
             "\n");

    // budget = 0 from the config file: the search is skipped.
    const auto rec0 = tmp.path / "rec0.jsonl";
    REQUIRE(run("decode --config " + (tmp.path / "run.cfg").string() + " --dataset " +
                (tmp.path / "dataset.jsonl").string() + " --out " + rec0.string() +
                " > /dev/null") == 0);
    const auto lines0 = engine::read_records_jsonl(rec0.string());
    REQUIRE(lines0.size() == 1);
    CHECK(lines0[0].record.executed_count() == 0);

    // The command line overrides it back to unbounded.
    const auto rec1 = tmp.path / "rec1.jsonl";
    REQUIRE(run("decode --config " + (tmp.path / "run.cfg").string() + " --dataset " +
                (tmp.path / "dataset.jsonl").string() + " --out " + rec1.string() +
                " --budget -1 > /dev/null") == 0);
    const auto lines1 = engine::read_records_jsonl(rec1.string());
    REQUIRE(lines1.size() == 1);
    CHECK(lines1[0].record.executed_count() == 1);

    // Unknown config keys are rejected up front.
    spit(tmp.path / "bad.cfg", "no_such_key = 1\n");
    CHECK(run("decode --config " + (tmp.path / "bad.cfg").string() + " --dataset " +
              (tmp.path / "dataset.jsonl").string() + " --out " + rec1.string() +
              " 2> /dev/null") == 1);
}

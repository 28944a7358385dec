#include "biaslens/detect.hpp"
#include "biaslens/embed_store.hpp"
#include "biaslens/weat.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace biaslens;
using biaslens::testing::TempDir;
using biaslens::testing::write_text;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Run run(const TempDir& dir, const std::vector<std::string>& args) {
    std::string cmd = quote(BIASLENS_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

void write_swe(const std::filesystem::path& path, const EmbeddingTable& table) {
    std::ofstream out(path);
    char buf[32];
    for (const auto& w : table.words()) {
        out << w;
        for (float x : table.lookup(w)) {
            std::snprintf(buf, sizeof buf, " %.9g", x);
            out << buf;
        }
        out << '\n';
    }
}

void write_toy(const TempDir& dir) {
    write_text(dir / "toy.txt", "x 1 0\ny 0 1\na 1 0\nb 0 1\n");
    write_text(dir / "toy.json", R"({"label": "toy", "X": ["x"], "Y": ["y"], "A": ["a"], "B": ["b"]})");
}

}  // namespace

TEST_CASE("weat on the singleton toy") {
    TempDir dir;
    write_toy(dir);
    const auto r = run(dir, {"weat", "--swe", (dir / "toy.txt").string(), "--spec", (dir / "toy.json").string()});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["effect_size"].get<double>() == 2.0);
    CHECK(j["p_value"].get<double>() == 0.0);
    CHECK(j["p_mode"] == "exact");
    CHECK(r.err.find("I:manifest:") != std::string::npos);

    const auto csv = run(dir, {"weat", "--swe", (dir / "toy.txt").string(), "--spec", (dir / "toy.json").string(),
                               "--format", "csv", "--mc", "500"});
    CHECK(csv.out == "label,effect_size,p_value,test_statistic,p_mode,p_count\ntoy,2,0,2,monte-carlo,500\n");
}

TEST_CASE("ceat with one sample on a single-vector bank equals the static effect") {
    TempDir dir;
    std::mt19937_64 rng(3);
    const WeatSpec spec{"s", {"x1", "x2", "x3"}, {"y1", "y2", "y3"}, {"a1", "a2"}, {"b1", "b2"}};
    std::vector<std::pair<std::string, std::vector<float>>> rows;
    for (const auto& w : stimuli(spec)) rows.emplace_back(w, biaslens::testing::gaussian(rng, 5, 1.0));
    const auto table = biaslens::testing::make_table(rows);
    write_bank(biaslens::testing::noisy_bank(table, stimuli(spec), 1, 0.0, 1), dir / "bank");
    write_text(dir / "spec.json", R"({"label": "s", "X": ["x1", "x2", "x3"], "Y": ["y1", "y2", "y3"],
        "A": ["a1", "a2"], "B": ["b1", "b2"]})");
    const auto r = run(dir, {"ceat", "--bank", (dir / "bank").string(), "--spec", (dir / "spec.json").string(),
                             "--samples", "1", "--out", (dir / "out.json").string()});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "out.json"));
    const double es = weat(spec, table, ExactPermutation{}).effect_size;
    CHECK(j["meta"]["ces"].get<double>() == es);
    CHECK(j["meta"]["sigma2_between"].get<double>() == 0.0);
    CHECK(std::filesystem::exists(dir / "out.json.manifest.json"));
    const auto m = nlohmann::json::parse(slurp(dir / "out.json.manifest.json"));
    CHECK(m["samples"] == 1);
    CHECK(m["seed"] == 10622);
    CHECK(m["input_digests"].size() == 2);

    const auto info = run(dir, {"bank-info", (dir / "bank").string()});
    REQUIRE(info.code == 0);
    const auto ij = nlohmann::json::parse(info.out);
    CHECK(ij["stimulus_count"] == 10);
    CHECK(ij["vector_count"] == 10);
    CHECK(ij["dimension"] == 5);
}

TEST_CASE("ceat output is reproducible and independent of workers") {
    TempDir dir;
    const WeatSpec spec{"s", {"x1", "x2"}, {"y1", "y2"}, {"a1", "a2"}, {"b1", "b2"}};
    std::mt19937_64 rng(4);
    std::vector<std::pair<std::string, std::vector<float>>> rows;
    for (const auto& w : stimuli(spec)) rows.emplace_back(w, biaslens::testing::gaussian(rng, 8, 1.0));
    const auto table = biaslens::testing::make_table(rows);
    write_bank(biaslens::testing::noisy_bank(table, stimuli(spec), 30, 0.3, 2), dir / "bank");
    write_text(dir / "spec.json", R"({"label": "s", "X": ["x1", "x2"], "Y": ["y1", "y2"], "A": ["a1", "a2"], "B": ["b1", "b2"]})");
    auto go = [&](const std::string& name, const std::string& workers) {
        return run(dir, {"ceat", "--bank", (dir / "bank").string(), "--spec", (dir / "spec.json").string(),
                         "--samples", "200", "--seed", "9", "--workers", workers, "--out", (dir / name).string()});
    };
    REQUIRE(go("a.json", "1").code == 0);
    REQUIRE(go("b.json", "4").code == 0);
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    const auto ma = nlohmann::json::parse(slurp(dir / "a.json.manifest.json"));
    const auto mb = nlohmann::json::parse(slurp(dir / "b.json.manifest.json"));
    CHECK(ma["input_digests"] == mb["input_digests"]);
}

TEST_CASE("ibd and eibd recover a planted grid") {
    TempDir dir;
    const auto w = biaslens::testing::planted_world(2);
    write_swe(dir / "planted.txt", w.table);
    write_text(dir / "grid.json", grid_to_json(w.grid));
    nlohmann::json pool{{"candidates", w.pool}};
    for (const auto& [word, pos] : w.ibd_truth)
        if (pos) pool["ibd_positives"].push_back(word);
    for (const auto& [word, pos] : w.eibd_truth)
        if (pos) pool["eibd_positives"].push_back(word);
    write_text(dir / "pool.json", pool.dump());

    for (const std::string cmd : {"ibd", "eibd"}) {
        const auto r = run(dir, {cmd, "--swe", (dir / "planted.txt").string(), "--grid", (dir / "grid.json").string(),
                                 "--target", "C00", "--pool", (dir / "pool.json").string(), "--auto-roc", "--roc-out",
                                 (dir / (cmd + "_roc.csv")).string()});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["confusion"]["accuracy"].get<double>() == 1.0);
        CHECK(slurp(dir / (cmd + "_roc.csv")).rfind("threshold,tpr,fpr\n", 0) == 0);
    }

    const auto fixed = run(dir, {"ibd", "--swe", (dir / "planted.txt").string(), "--grid",
                                 (dir / "grid.json").string(), "--target", "C00", "--pool", (dir / "pool.json").string(),
                                 "--threshold", "1.6"});
    REQUIRE(fixed.code == 0);
    CHECK(nlohmann::json::parse(fixed.out)["detected"].size() == 12);
}

TEST_CASE("errors and exit codes") {
    TempDir dir;
    write_toy(dir);
    const std::string swe = (dir / "toy.txt").string(), spec = (dir / "toy.json").string();

    auto usage = run(dir, {"frobnicate"});
    CHECK(usage.code == 1);
    CHECK(usage.err.rfind("E:usage:", 0) == 0);

    usage = run(dir, {"ibd", "--swe", swe, "--target", "AF"});
    CHECK(usage.code == 1);
    CHECK(usage.err.rfind("E:usage:", 0) == 0);

    auto io = run(dir, {"weat", "--swe", (dir / "absent.txt").string(), "--spec", spec});
    CHECK(io.code == 2);
    CHECK(io.err.rfind("E:io:", 0) == 0);

    write_text(dir / "short.txt", "x 1 0\na 1 0\n");
    auto missing = run(dir, {"weat", "--swe", (dir / "short.txt").string(), "--spec", spec});
    CHECK(missing.code == 2);
    CHECK(missing.err.rfind("E:missing-word:", 0) == 0);
    CHECK(missing.err.find("y") != std::string::npos);

    write_text(dir / "bad.json", R"({"label": "b", "X": ["x", "x"], "Y": ["y", "b"], "A": ["a"], "B": ["b"]})");
    auto invalid = run(dir, {"weat", "--swe", swe, "--spec", (dir / "bad.json").string()});
    CHECK(invalid.code == 2);
    CHECK(invalid.err.rfind("E:validation:", 0) == 0);

    auto degenerate = run(dir, {"weat", "--swe", swe, "--spec", spec, "--mc", "0"});
    CHECK(degenerate.code == 1);
    CHECK(degenerate.err.rfind("E:parameter:", 0) == 0);

    auto help = run(dir, {"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("ceat") != std::string::npos);
}

TEST_CASE("missing words can be skipped with a warning") {
    TempDir dir;
    write_text(dir / "toy.txt", "x 1 0\ny 0 1\nx2 0.9 0.1\na 1 0\nb 0 1\na2 0.8 0.3\n");
    write_text(dir / "spec.json",
               R"({"label": "t", "X": ["x", "x2"], "Y": ["y", "y2"], "A": ["a", "a2"], "B": ["b", "b2"]})");
    const auto strict = run(dir, {"weat", "--swe", (dir / "toy.txt").string(), "--spec", (dir / "spec.json").string()});
    CHECK(strict.code == 2);
    const auto skip = run(dir, {"weat", "--swe", (dir / "toy.txt").string(), "--spec", (dir / "spec.json").string(),
                                "--oov", "skip"});
    REQUIRE(skip.code == 0);
    CHECK(skip.err.find("W:missing-word:") != std::string::npos);
    const auto j = nlohmann::json::parse(skip.out);
    CHECK(j["oov"]["missing"].size() == 2);
    CHECK(j["oov"]["balanced_out"].size() == 2);
}

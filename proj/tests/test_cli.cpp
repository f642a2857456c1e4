#include "quantforge/presets.hpp"
#include "quantforge/types.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace quantforge;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("qf_clitest_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

RunResult run_cli(const std::string& args) {
    const std::string out_path = temp_path("stdout.txt");
    const std::string err_path = temp_path("stderr.txt");
    const std::string cmd = std::string(QF_CLI_PATH) + " " + args + " >" + out_path + " 2>" +
                            err_path;
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

// the tiny manifest from the pipeline tests, passed through a JSON file to
// exercise the file-resolution path
std::string tiny_manifest_path() {
    static const std::string path = [] {
        const ModelManifest m =
            llama_manifest("tiny-fixture", {256, 64, 512, 320, 1, ScalarType::BF16});
        const std::string p = temp_path("tiny_manifest.json");
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << m.to_json();
        return p;
    }();
    return path;
}

// stdout in JSON mode must be exactly one document; strict parsing rejects
// trailing garbage
nlohmann::json parse_single_json(const std::string& text) {
    return nlohmann::json::parse(text);
}

} // namespace

TEST_CASE("help text lists every command") {
    const RunResult r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* cmd : {"quantize", "inspect", "diff", "estimate", "synth"})
        CHECK(r.out.find(cmd) != std::string::npos);
}

TEST_CASE("all-stages estimate reproduces the published ladder") {
    const RunResult r = run_cli("estimate llama32-3b --all-stages --report json");
    REQUIRE(r.exit_code == 0);
    const nlohmann::json doc = parse_single_json(r.out);
    REQUIRE(doc.contains("stages"));
    REQUIRE(doc["stages"].size() == 3);

    const double baseline_gib =
        doc["stages"][0]["bytes"].get<double>() / (1024.0 * 1024.0 * 1024.0);
    CHECK(baseline_gib > 6.00 * 0.97);
    CHECK(baseline_gib < 6.00 * 1.03);
    CHECK(doc["stages"][0]["reduction_pct"].get<double>() == 0.0);

    const double nf4 = doc["stages"][1]["reduction_pct"].get<double>();
    CHECK(nf4 > 64.92 - 4.0);
    CHECK(nf4 < 64.92 + 4.0);
    const double q4 = doc["stages"][2]["reduction_pct"].get<double>();
    CHECK(q4 > 68.66 - 4.0);
    CHECK(q4 < 68.66 + 4.0);
}

TEST_CASE("synth, quantize, inspect, and diff chain end to end") {
    const std::string fixture = temp_path("chain.safetensors");
    const std::string gguf = temp_path("chain.gguf");

    const RunResult synth =
        run_cli("synth " + tiny_manifest_path() + " --seed 7 -o " + fixture);
    REQUIRE(synth.exit_code == 0);
    REQUIRE(std::filesystem::exists(fixture));

    const RunResult quant = run_cli("quantize " + fixture + " -o " + gguf +
                                    " --plan q4_k_m-default --report json");
    REQUIRE(quant.exit_code == 0);
    REQUIRE(std::filesystem::exists(gguf));
    const nlohmann::json report = parse_single_json(quant.out);
    CHECK(report["model"] == "tiny-fixture");
    CHECK(report["plan"] == "q4_k_m-default");
    CHECK(report["total_bytes"].get<uint64_t>() == std::filesystem::file_size(gguf));
    CHECK(report["reduction_pct"].get<double>() > 60.0);

    const RunResult inspect = run_cli("inspect " + gguf);
    CHECK(inspect.exit_code == 0);
    CHECK(inspect.out.find("model.embed_tokens.weight") != std::string::npos);
    CHECK(inspect.out.find("Q4_K") != std::string::npos);
    CHECK(inspect.out.find("Q6_K") != std::string::npos);

    const RunResult diff = run_cli("diff " + fixture + " " + gguf + " --report json");
    CHECK(diff.exit_code == 0);
    const nlohmann::json d = parse_single_json(diff.out);
    CHECK(d["overall_sqnr_db"].get<double>() > 20.0);
    CHECK(d["n_elements"].get<int64_t>() > 0);

    // identical inputs and flags give byte-identical files
    const std::string gguf2 = temp_path("chain2.gguf");
    const RunResult quant2 = run_cli("quantize " + fixture + " -o " + gguf2 +
                                     " --plan q4_k_m-default --report json");
    REQUIRE(quant2.exit_code == 0);
    CHECK(slurp(gguf) == slurp(gguf2));
}

TEST_CASE("json report mode puts exactly one document on stdout") {
    const RunResult r = run_cli("estimate llama32-3b-desk --plan q4_k_m-default --report json");
    REQUIRE(r.exit_code == 0);
    CHECK_NOTHROW(parse_single_json(r.out));
    // text rendering goes to stderr or nowhere, never mixed into stdout
    CHECK(r.out.rfind("{", 0) == 0);
}

TEST_CASE("exit codes distinguish the failure classes") {
    SUBCASE("missing input file is an argument error") {
        const std::string out = temp_path("never.gguf");
        std::filesystem::remove(out);
        const RunResult r = run_cli("quantize /nonexistent.safetensors -o " + out);
        CHECK(r.exit_code == 2);
        CHECK(!std::filesystem::exists(out));
    }

    SUBCASE("unknown flag is an argument error") {
        CHECK(run_cli("estimate llama32-3b --frobnicate").exit_code == 2);
    }

    SUBCASE("corrupt file is a format error") {
        const std::string bad = temp_path("bad.gguf");
        std::ofstream(bad, std::ios::binary) << "GGUF but not really";
        const RunResult r = run_cli("inspect " + bad);
        CHECK(r.exit_code == 3);
        CHECK(r.err.find("error:") != std::string::npos);
    }

    SUBCASE("NF4 plan without the staged pipeline is an unsupported-type error") {
        const std::string fixture = temp_path("codes.safetensors");
        run_cli("synth " + tiny_manifest_path() + " --seed 1 -o " + fixture);
        const RunResult r =
            run_cli("quantize " + fixture + " -o " + temp_path("codes.gguf") +
                    " --plan nf4-linear-only");
        CHECK(r.exit_code == 4);
        CHECK(r.err.find("--paper-pipeline") != std::string::npos);
    }

    SUBCASE("disjoint models are a diff mismatch") {
        const std::string fx_a = temp_path("diffa.safetensors");
        const std::string fx_b = temp_path("diffb.safetensors");
        run_cli("synth " + tiny_manifest_path() + " --seed 1 -o " + fx_a);

        ModelManifest other;
        other.model_name = "other";
        other.entries = {{"completely.different", {4, 256}, ScalarType::F32}};
        const std::string other_manifest = temp_path("other_manifest.json");
        std::ofstream(other_manifest, std::ios::binary) << other.to_json();
        run_cli("synth " + other_manifest + " --seed 1 -o " + fx_b);

        const RunResult r = run_cli("diff " + fx_a + " " + fx_b);
        CHECK(r.exit_code == 5);
    }

    SUBCASE("bad plan JSON is an argument error") {
        const std::string plan = temp_path("broken_plan.json");
        std::ofstream(plan, std::ios::binary) << "{not json";
        const std::string fixture = temp_path("planfx.safetensors");
        run_cli("synth " + tiny_manifest_path() + " --seed 1 -o " + fixture);
        const RunResult r =
            run_cli("quantize " + fixture + " -o " + temp_path("plan.gguf") + " --plan " + plan);
        CHECK(r.exit_code == 2);
    }

    SUBCASE("bad manifest JSON is a format error") {
        const std::string manifest = temp_path("broken_manifest.json");
        std::ofstream(manifest, std::ios::binary) << "[1,2,3]";
        CHECK(run_cli("estimate " + manifest).exit_code == 3);
    }
}

TEST_CASE("type shorthand and plan are mutually exclusive") {
    CHECK(run_cli("estimate llama32-3b-desk --plan q8_0-all --type q8_0").exit_code == 2);
    const RunResult r = run_cli("estimate llama32-3b-desk --type q8_0 --report json");
    REQUIRE(r.exit_code == 0);
    const nlohmann::json doc = parse_single_json(r.out);
    CHECK(doc["plan"] == "Q8_0");  // shorthand plans are named for the type
}

#include "quantforge/pipeline.hpp"

#include "quantforge/errors.hpp"
#include "quantforge/gguf.hpp"
#include "quantforge/metrics.hpp"
#include "quantforge/presets.hpp"
#include "quantforge/safetensors.hpp"

#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace quantforge;

namespace {

// single-layer model with the usual decoder proportions, small enough to
// quantize in milliseconds
ModelManifest tiny_manifest() {
    return llama_manifest("tiny-fixture", {256, 64, 512, 320, 1, ScalarType::BF16});
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("qf_pipetest_" + name)).string();
}

std::string tiny_fixture_path() {
    static const std::string path = [] {
        const std::string p = temp_path("tiny.safetensors");
        synth_fixture_file(tiny_manifest(), 11, p);
        return p;
    }();
    return path;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

const TensorSizeLine& line_for(const SizeReport& report, const std::string& name) {
    for (const auto& l : report.per_tensor)
        if (l.name == name) return l;
    FAIL("no per-tensor line for " << name);
    static TensorSizeLine none;
    return none;
}

} // namespace

TEST_CASE("written file size equals the analytic estimate exactly") {
    const std::string out = temp_path("direct.gguf");
    QuantizeOptions opt;
    opt.plan = *builtin_plan("q4_k_m-default");
    const QuantizeResult r = quantize_file(tiny_fixture_path(), out, opt);

    CHECK(r.output_path == out);
    CHECK(static_cast<uint64_t>(r.report.total_bytes) == std::filesystem::file_size(out));
    const SizeReport analytic = estimate_size(tiny_manifest(), opt.plan);
    CHECK(analytic.total_bytes == r.report.total_bytes);
    CHECK(analytic.tensor_bytes == r.report.tensor_bytes);
    CHECK(analytic.container_bytes == r.report.container_bytes);

    // plan routing: embeddings and value projections ride the wider format,
    // norms pin to F32, everything else takes the default
    const auto& embed = line_for(r.report, "model.embed_tokens.weight");
    CHECK(embed.type == QuantType::Q6_K);
    CHECK(embed.reason == AssignReason::Rule);
    const auto& vproj = line_for(r.report, "model.layers.0.self_attn.v_proj.weight");
    CHECK(vproj.type == QuantType::Q6_K);
    const auto& qproj = line_for(r.report, "model.layers.0.self_attn.q_proj.weight");
    CHECK(qproj.type == QuantType::Q4_K);
    CHECK(qproj.reason == AssignReason::Default);
    const auto& norm = line_for(r.report, "model.norm.weight");
    CHECK(norm.type == QuantType::F32);
    CHECK(norm.reason == AssignReason::Norm1D);

    CHECK(r.report.reduction_pct ==
          doctest::Approx(100.0 * (1.0 - static_cast<double>(r.report.total_bytes) /
                                             static_cast<double>(r.report.baseline_bytes))));
    CHECK(r.report.baseline_bytes == tiny_manifest().total_params() * 2);  // BF16 source

    // two stage rows in direct mode: baseline and the written file
    REQUIRE(r.stages.size() == 2);
    CHECK(r.stages[0].bytes == r.report.baseline_bytes);
    CHECK(r.stages[1].bytes == r.report.total_bytes);
    CHECK(r.stages[1].reduction_pct == r.report.reduction_pct);
}

TEST_CASE("worker count never changes the output bytes") {
    QuantizeOptions opt;
    opt.plan = *builtin_plan("q4_k_m-default");

    const std::string out1 = temp_path("jobs1.gguf");
    const std::string out3 = temp_path("jobs3.gguf");
    const std::string out0 = temp_path("jobs0.gguf");
    opt.jobs = 1;
    quantize_file(tiny_fixture_path(), out1, opt);
    opt.jobs = 3;
    quantize_file(tiny_fixture_path(), out3, opt);
    opt.jobs = 0;  // hardware concurrency
    quantize_file(tiny_fixture_path(), out0, opt);

    const std::string b1 = file_bytes(out1);
    CHECK(b1 == file_bytes(out3));
    CHECK(b1 == file_bytes(out0));
    CHECK(!b1.empty());
}

TEST_CASE("staged mode records the intermediate stage and still quantizes well") {
    const std::string direct_out = temp_path("direct2.gguf");
    const std::string staged_out = temp_path("staged.gguf");
    QuantizeOptions opt;
    opt.plan = *builtin_plan("q4_k_m-default");
    quantize_file(tiny_fixture_path(), direct_out, opt);
    opt.paper_pipeline = true;
    const QuantizeResult staged = quantize_file(tiny_fixture_path(), staged_out, opt);

    REQUIRE(staged.stages.size() == 3);
    CHECK(staged.stages[0].label.find("baseline") != std::string::npos);
    CHECK(staged.stages[1].label.find("nf4") != std::string::npos);
    CHECK(staged.stages[2].label.find("q4_k_m-default") != std::string::npos);
    CHECK(staged.stages[1].reduction_pct > 0.0);
    CHECK(staged.stages[2].reduction_pct > staged.stages[1].reduction_pct);

    // the intermediate pass perturbs the weights, so the files differ; the
    // direct path clears 20 dB against the source and the double
    // quantization of the staged path costs a few dB on top
    CHECK(file_bytes(direct_out) != file_bytes(staged_out));
    const LoadedModel source = load_model(tiny_fixture_path());
    const DiffReport direct_diff = diff_models(source, load_model(direct_out));
    const DiffReport staged_diff = diff_models(source, load_model(staged_out));
    CHECK(direct_diff.overall_sqnr_db > 20.0);
    CHECK(staged_diff.overall_sqnr_db > 15.0);
    CHECK(staged_diff.overall_sqnr_db < direct_diff.overall_sqnr_db);

    // same command again is byte-identical
    const std::string again = temp_path("staged2.gguf");
    quantize_file(tiny_fixture_path(), again, opt);
    CHECK(file_bytes(staged_out) == file_bytes(again));
}

TEST_CASE("identity plan writes the source dtypes losslessly") {
    const std::string out = temp_path("identity.gguf");
    QuantizeOptions opt;
    opt.plan = *builtin_plan("identity");
    const QuantizeResult r = quantize_file(tiny_fixture_path(), out, opt);

    CHECK(r.report.tensor_bytes == r.report.baseline_bytes);
    for (const auto& l : r.report.per_tensor) {
        CHECK(l.type == QuantType::BF16);
        CHECK(l.reason == AssignReason::Source);
    }

    const StContainer source = StContainer::open(tiny_fixture_path());
    const LoadedModel model = load_model(out);
    REQUIRE(model.tensors.size() == source.entries().size());
    for (const auto& t : model.tensors) {
        CHECK(t.storage == QuantType::BF16);
        CHECK(t.values == source.tensor_f32(t.name));  // bit-exact passthrough
    }
}

TEST_CASE("NF4 plans are rejected in direct mode before any output is written") {
    const std::string out = temp_path("nf4.gguf");
    std::filesystem::remove(out);
    QuantizeOptions opt;
    opt.plan = *builtin_plan("nf4-linear-only");
    try {
        quantize_file(tiny_fixture_path(), out, opt);
        FAIL("expected UnsupportedTypeError");
    } catch (const UnsupportedTypeError& e) {
        CHECK(std::string(e.what()).find("--paper-pipeline") != std::string::npos);
    }
    CHECK(!std::filesystem::exists(out));
}

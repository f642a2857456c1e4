#include "quantforge/errors.hpp"
#include "quantforge/gguf.hpp"
#include "quantforge/log.hpp"
#include "quantforge/metrics.hpp"
#include "quantforge/pipeline.hpp"
#include "quantforge/presets.hpp"
#include "quantforge/safetensors.hpp"
#include "quantforge/types.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>

namespace {

using quantforge::QuantPlan;
using quantforge::QuantType;
using ordered_json = nlohmann::ordered_json;

struct Cli {
    std::string input;
    std::string input_b;
    std::string output;
    std::string plan_arg;
    std::string type_arg;
    std::string report = "text";
    uint64_t seed = 42;
    int jobs = 0;  // 0 = hardware concurrency
    bool all_stages = false;
    bool paper_pipeline = false;

    bool json() const { return report == "json"; }
};

QuantType parse_type_arg(const std::string& arg) {
    std::string up = arg;
    std::transform(up.begin(), up.end(), up.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return quantforge::quant_type_from_string(up);
}

// --plan and --type are mutually exclusive; --type T is shorthand for an
// anonymous plan with default type T and no rules.
QuantPlan select_plan(const Cli& cli) {
    if (!cli.type_arg.empty()) {
        QuantPlan p;
        const QuantType t = parse_type_arg(cli.type_arg);
        p.name = quantforge::to_string(t);
        p.default_type = t;
        return p;
    }
    if (!cli.plan_arg.empty()) return quantforge::resolve_plan(cli.plan_arg);
    return *quantforge::builtin_plan("q4_k_m-default");
}

void emit(const Cli& cli, const ordered_json& doc, const std::string& text) {
    if (cli.json())
        std::cout << doc.dump(2) << "\n";
    else
        std::cout << text;
}

int cmd_quantize(const Cli& cli) {
    quantforge::QuantizeOptions options;
    options.plan = select_plan(cli);
    options.paper_pipeline = cli.paper_pipeline;
    options.jobs = cli.jobs;

    const quantforge::QuantizeResult result =
        quantforge::quantize_file(cli.input, cli.output, options);

    ordered_json doc = ordered_json::parse(quantforge::to_json(result.report));
    doc["output"] = result.output_path;
    doc["stages"] =
        ordered_json::parse(quantforge::stage_table_json(result.report.model, result.stages))
            .at("stages");

    std::string text;
    if (cli.paper_pipeline) text += quantforge::stage_table_text(result.stages) + "\n";
    text += quantforge::to_text(result.report, /*per_tensor_table=*/true);
    text += "wrote: " + result.output_path + "\n";
    emit(cli, doc, text);
    return 0;
}

int cmd_inspect(const Cli& cli) {
    char magic[4] = {0, 0, 0, 0};
    {
        std::ifstream in(cli.input, std::ios::binary);
        if (!in) throw quantforge::FormatError("cannot open '" + cli.input + "'");
        in.read(magic, 4);
    }
    const int64_t file_bytes =
        static_cast<int64_t>(std::filesystem::file_size(cli.input));

    ordered_json doc;
    doc["path"] = cli.input;
    std::ostringstream text;
    int64_t params = 0, tensor_bytes = 0;

    if (std::string_view(magic, 4) == "GGUF") {
        const quantforge::GgufFile file = quantforge::read_gguf_file(cli.input);
        doc["format"] = "gguf";
        doc["version"] = file.version;
        doc["metadata"] = ordered_json::object();
        text << "format: gguf v" << file.version << "\n\nmetadata:\n";
        for (const auto& [key, value] : file.metadata) {
            doc["metadata"][key] = value.to_display();
            text << "  " << key << " = " << value.to_display() << "\n";
        }
        doc["tensors"] = ordered_json::array();
        size_t name_w = 4;
        for (const auto& t : file.tensors) name_w = std::max(name_w, t.name.size());
        text << "\ntensors:\n";
        for (const auto& t : file.tensors) {
            params += static_cast<int64_t>(t.elem_count());
            tensor_bytes += static_cast<int64_t>(t.nbytes);
            ordered_json j;
            j["name"] = t.name;
            j["shape"] = t.shape();
            j["type"] = quantforge::ggml_type_display(t.type_id);
            j["bytes"] = t.nbytes;
            doc["tensors"].push_back(std::move(j));
            std::string shape = "[";
            for (size_t i = 0; i < t.shape().size(); ++i)
                shape += (i ? ", " : "") + std::to_string(t.shape()[i]);
            shape += "]";
            text << "  " << std::left << std::setw(static_cast<int>(name_w) + 2) << t.name
                 << std::setw(10) << quantforge::ggml_type_display(t.type_id) << std::right
                 << std::setw(12) << t.nbytes << "  " << shape << "\n";
        }
    } else {
        const quantforge::StContainer container = quantforge::StContainer::open(cli.input);
        const quantforge::ModelManifest& manifest = container.manifest();
        doc["format"] = "safetensors";
        doc["metadata"] = ordered_json::object();
        text << "format: safetensors\n";
        if (!manifest.model_name.empty()) {
            doc["model"] = manifest.model_name;
            text << "model: " << manifest.model_name << "\n";
        }
        text << "\nmetadata:\n";
        for (const auto& [key, value] : manifest.metadata) {
            doc["metadata"][key] = value;
            text << "  " << key << " = " << value << "\n";
        }
        doc["tensors"] = ordered_json::array();
        size_t name_w = 4;
        for (const auto& e : manifest.entries) name_w = std::max(name_w, e.name.size());
        text << "\ntensors:\n";
        for (const auto& e : manifest.entries) {
            params += e.elem_count();
            tensor_bytes += e.byte_count();
            ordered_json j;
            j["name"] = e.name;
            j["shape"] = e.shape;
            j["type"] = quantforge::to_string(e.dtype);
            j["bytes"] = e.byte_count();
            doc["tensors"].push_back(std::move(j));
            std::string shape = "[";
            for (size_t i = 0; i < e.shape.size(); ++i)
                shape += (i ? ", " : "") + std::to_string(e.shape[i]);
            shape += "]";
            text << "  " << std::left << std::setw(static_cast<int>(name_w) + 2) << e.name
                 << std::setw(10) << quantforge::to_string(e.dtype) << std::right << std::setw(12)
                 << e.byte_count() << "  " << shape << "\n";
        }
    }

    const double bpw =
        params > 0 ? 8.0 * static_cast<double>(tensor_bytes) / static_cast<double>(params) : 0.0;
    doc["params"] = params;
    doc["tensor_bytes"] = tensor_bytes;
    doc["file_bytes"] = file_bytes;
    doc["bits_per_weight"] = bpw;
    text << "\nparams: " << params << "\ntensor bytes: " << tensor_bytes
         << "\nfile bytes: " << file_bytes << " (" << quantforge::format_size(file_bytes) << ")"
         << "\nbits/weight: " << bpw << "\n";
    emit(cli, doc, text.str());
    return 0;
}

int cmd_diff(const Cli& cli) {
    const quantforge::LoadedModel a = quantforge::load_model(cli.input);
    const quantforge::LoadedModel b = quantforge::load_model(cli.input_b);
    const quantforge::DiffReport report = quantforge::diff_models(a, b, cli.jobs);
    emit(cli, ordered_json::parse(quantforge::to_json(report)), quantforge::to_text(report));
    return 0;
}

int cmd_estimate(const Cli& cli) {
    const quantforge::ModelManifest manifest = quantforge::resolve_manifest(cli.input);

    if (cli.all_stages) {
        std::vector<quantforge::StageRow> rows;
        const auto baseline = quantforge::estimate_size(manifest, *quantforge::builtin_plan("identity"));
        rows.push_back({"baseline (source)", baseline.baseline_bytes, 0.0});
        for (const char* plan_name : {"nf4-linear-only", "q4_k_m-default"}) {
            const auto est = quantforge::estimate_size(manifest, *quantforge::builtin_plan(plan_name));
            rows.push_back({plan_name, est.total_bytes, est.reduction_pct});
        }
        emit(cli, ordered_json::parse(quantforge::stage_table_json(manifest.model_name, rows)),
             quantforge::stage_table_text(rows));
        return 0;
    }

    const quantforge::SizeReport report = quantforge::estimate_size(manifest, select_plan(cli));
    emit(cli, ordered_json::parse(quantforge::to_json(report)),
         quantforge::to_text(report, /*per_tensor_table=*/true));
    return 0;
}

int cmd_synth(const Cli& cli) {
    const quantforge::ModelManifest manifest = quantforge::resolve_manifest(cli.input);
    quantforge::synth_fixture_file(manifest, cli.seed, cli.output);
    const int64_t bytes = static_cast<int64_t>(std::filesystem::file_size(cli.output));

    ordered_json doc;
    doc["model"] = manifest.model_name;
    doc["output"] = cli.output;
    doc["seed"] = cli.seed;
    doc["params"] = manifest.total_params();
    doc["bytes"] = bytes;
    std::ostringstream text;
    text << "wrote " << cli.output << " (" << bytes << " B, " << manifest.total_params()
         << " params, seed " << cli.seed << ")\n";
    emit(cli, doc, text.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantforge: post-training quantization workbench (GGUF k-quants, NF4, affine)"};
    app.require_subcommand(1);
    Cli cli;

    auto add_report = [&](CLI::App* cmd) {
        cmd->add_option("--report", cli.report, "Report format")
            ->check(CLI::IsMember({"text", "json"}));
    };
    auto add_jobs = [&](CLI::App* cmd) {
        cmd->add_option("--jobs", cli.jobs, "Worker threads (0 = auto); output is identical for any value");
    };

    CLI::App* quantize = app.add_subcommand("quantize", "Quantize a source container into a GGUF file");
    quantize->add_option("input", cli.input, "Source container")->required()->check(CLI::ExistingFile);
    quantize->add_option("-o,--output", cli.output, "Output GGUF path")->required();
    auto* plan_opt = quantize->add_option("--plan", cli.plan_arg, "Plan name or JSON file");
    quantize->add_option("--type", cli.type_arg, "Single-type shorthand plan")->excludes(plan_opt);
    quantize->add_flag("--paper-pipeline", cli.paper_pipeline,
                       "Quantize through the NF4 intermediate stage and report all stages");
    add_jobs(quantize);
    add_report(quantize);

    CLI::App* inspect = app.add_subcommand("inspect", "List metadata and tensors of a GGUF or source container");
    inspect->add_option("path", cli.input, "File to inspect")->required()->check(CLI::ExistingFile);
    add_report(inspect);

    CLI::App* diff = app.add_subcommand("diff", "Compare two models tensor by tensor");
    diff->add_option("a", cli.input, "First model")->required()->check(CLI::ExistingFile);
    diff->add_option("b", cli.input_b, "Second model")->required()->check(CLI::ExistingFile);
    add_jobs(diff);
    add_report(diff);

    CLI::App* estimate = app.add_subcommand("estimate", "Analytic size report from a shape manifest (no weights)");
    estimate->add_option("manifest", cli.input, "Manifest JSON file or built-in name")->required();
    auto* est_plan = estimate->add_option("--plan", cli.plan_arg, "Plan name or JSON file");
    auto* est_type = estimate->add_option("--type", cli.type_arg, "Single-type shorthand plan")->excludes(est_plan);
    estimate->add_flag("--all-stages", cli.all_stages, "Three-row report: baseline, nf4-linear-only, q4_k_m-default")
        ->excludes(est_plan)
        ->excludes(est_type);
    add_report(estimate);

    CLI::App* synth = app.add_subcommand("synth", "Write a deterministic Gaussian fixture for a manifest");
    synth->add_option("manifest", cli.input, "Manifest JSON file or built-in name")->required();
    synth->add_option("-o,--output", cli.output, "Output container path")->required();
    synth->add_option("--seed", cli.seed, "RNG seed");
    add_report(synth);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (quantize->parsed()) return cmd_quantize(cli);
        if (inspect->parsed()) return cmd_inspect(cli);
        if (diff->parsed()) return cmd_diff(cli);
        if (estimate->parsed()) return cmd_estimate(cli);
        if (synth->parsed()) return cmd_synth(cli);
        return 2;
    } catch (const quantforge::DiffMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const quantforge::UnsupportedTypeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const quantforge::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::range_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

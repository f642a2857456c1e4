#include "quantforge/pipeline.hpp"

#include "quantforge/errors.hpp"
#include "quantforge/gguf.hpp"
#include "quantforge/kquant.hpp"
#include "quantforge/log.hpp"
#include "quantforge/parallel.hpp"
#include "quantforge/presets.hpp"

#include <algorithm>
#include <utility>

namespace quantforge {
namespace {

double reduction_against(int64_t baseline, int64_t bytes) {
    if (baseline <= 0) return 0.0;
    return 100.0 * (1.0 - static_cast<double>(bytes) / static_cast<double>(baseline));
}

} // namespace

QuantizeResult quantize_container(const StContainer& source, const std::string& output_path,
                                  const QuantizeOptions& options) {
    const ModelManifest& manifest = source.manifest();
    const std::vector<TypeAssignment> assignments = assign_types(manifest, options.plan);

    for (const TypeAssignment& a : assignments) {
        if (a.type == QuantType::NF4 && !options.paper_pipeline)
            throw UnsupportedTypeError(
                "plan '" + options.plan.name + "' assigns NF4 to '" + a.name +
                "', which GGUF cannot store; pass --paper-pipeline to use NF4 as the "
                "intermediate stage before a GGUF-storable plan");
    }

    std::vector<TypeAssignment> stage1;
    if (options.paper_pipeline)
        stage1 = assign_types(manifest, *builtin_plan("nf4-linear-only"));

    std::vector<TensorView> packed(manifest.entries.size());
    parallel_for(options.jobs, manifest.entries.size(), [&](size_t i) {
        const ManifestEntry& entry = manifest.entries[i];
        std::vector<float> values = source.tensor_f32(entry.name);
        if (options.paper_pipeline) {
            const std::vector<uint8_t> mid = quantize_row(values, stage1[i].type);
            values = dequantize_row(mid, stage1[i].type);
        }
        packed[i] = TensorView{entry.name, entry.shape, assignments[i].type,
                               quantize_row(values, assignments[i].type)};
    });

    const GgufFile file = pack_model(packed, manifest);
    const uint64_t file_bytes = write_gguf_file(file, output_path);
    log_info("wrote " + output_path + " (" + std::to_string(file_bytes) + " bytes)");

    QuantizeResult result;
    result.output_path = output_path;
    SizeReport& report = result.report;
    report.model = manifest.model_name;
    report.plan = options.plan.name;
    report.params = manifest.total_params();
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const ManifestEntry& entry = manifest.entries[i];
        report.per_tensor.push_back({entry.name, assignments[i].type, assignments[i].reason,
                                     entry.elem_count(),
                                     static_cast<int64_t>(packed[i].data.size())});
        report.baseline_bytes += entry.byte_count();
        report.tensor_bytes += static_cast<int64_t>(packed[i].data.size());
    }
    report.total_bytes = static_cast<int64_t>(file_bytes);
    report.container_bytes = report.total_bytes - report.tensor_bytes;
    report.reduction_pct = reduction_against(report.baseline_bytes, report.total_bytes);
    report.bits_per_weight =
        report.params > 0
            ? 8.0 * static_cast<double>(report.tensor_bytes) / static_cast<double>(report.params)
            : 0.0;

    result.stages.push_back({"baseline (source)", report.baseline_bytes, 0.0});
    if (options.paper_pipeline) {
        const int64_t stage1_total =
            static_cast<int64_t>(estimate_gguf_size(manifest, stage1));
        result.stages.push_back({"nf4-linear-only (intermediate)", stage1_total,
                                 reduction_against(report.baseline_bytes, stage1_total)});
    }
    result.stages.push_back(
        {options.plan.name + " (written)", report.total_bytes, report.reduction_pct});
    return result;
}

QuantizeResult quantize_file(const std::string& source_path, const std::string& output_path,
                             const QuantizeOptions& options) {
    const StContainer container = StContainer::open(source_path);
    return quantize_container(container, output_path, options);
}

} // namespace quantforge

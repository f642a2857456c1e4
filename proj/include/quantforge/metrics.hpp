#pragma once

#include "quantforge/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace quantforge {

// Quality proxies computed in double precision with compensated summation.
struct ErrorStats {
    double rmse = 0.0;
    double max_abs_err = 0.0;
    double sqnr_db = 0.0;    // 10*log10(signal power / noise power); +-inf sentinels
    double cosine_sim = 1.0;
    int64_t n_elements = 0;
};

ErrorStats compare_tensors(std::span<const float> original, std::span<const float> reconstructed);

struct TensorSizeLine {
    std::string name;
    QuantType type = QuantType::F32;
    AssignReason reason = AssignReason::Default;
    int64_t params = 0;
    int64_t bytes = 0;
};

struct SizeReport {
    std::string model;
    std::string plan;
    int64_t params = 0;
    int64_t baseline_bytes = 0;   // weights at their source dtypes
    int64_t tensor_bytes = 0;     // stored weight bytes under the plan
    int64_t container_bytes = 0;  // header + metadata + infos + alignment padding
    int64_t total_bytes = 0;      // tensor_bytes + container_bytes
    double reduction_pct = 0.0;   // 100 * (1 - total/baseline)
    double bits_per_weight = 0.0; // 8 * tensor_bytes / params
    std::vector<TensorSizeLine> per_tensor;
};

// Pure accounting: per-tensor bytes from the plan assignment and block
// geometry, container overhead replicated from the writer's exact layout.
SizeReport estimate_size(const ModelManifest& manifest, const QuantPlan& plan);

// Compression factors relative to 32-bit storage.
double ratio_ladder(QuantType target);  // 32 / bits_per_weight(target)
double nominal_ratio(int bits);         // 32 / bits, the idealized ladder

// A model loaded for comparison: every tensor dequantized to float32.
struct LoadedTensor {
    std::string name;
    std::vector<int64_t> shape;
    QuantType storage = QuantType::F32;
    std::vector<float> values;
};

struct LoadedModel {
    std::string path;
    int64_t file_bytes = 0;
    std::vector<LoadedTensor> tensors;
};

// Reads a GGUF file or a source container and dequantizes every tensor.
// Opaque GGUF tensors (unknown type ids) raise UnsupportedTypeError.
LoadedModel load_model(const std::string& path);

struct TensorDiff {
    std::string name;
    QuantType a_storage = QuantType::F32;
    QuantType b_storage = QuantType::F32;
    ErrorStats stats;
};

struct DiffReport {
    std::string a_path, b_path;
    int64_t a_bytes = 0, b_bytes = 0;
    std::vector<TensorDiff> tensors;
    double overall_rmse = 0.0;     // element-weighted across tensors
    double overall_sqnr_db = 0.0;  // from aggregated signal and noise power
    int64_t n_elements = 0;
};

// Tensor names must coincide and shapes must match; mismatches raise
// DiffMismatchError listing every offender.
DiffReport diff_models(const LoadedModel& a, const LoadedModel& b, int jobs = 1);

// Report serialization: one JSON document, and an aligned text table.
std::string to_json(const SizeReport& report);
std::string to_text(const SizeReport& report, bool per_tensor_table);
std::string to_json(const DiffReport& report);
std::string to_text(const DiffReport& report);

// Three-row stage table (Format | Size | Reduction) used by --all-stages
// and the staged pipeline report.
struct StageRow {
    std::string label;
    int64_t bytes = 0;
    double reduction_pct = 0.0;
};
std::string stage_table_text(const std::vector<StageRow>& rows);
std::string stage_table_json(const std::string& model, const std::vector<StageRow>& rows);

// "1.799 GiB (1.932 GB)" style rendering used across reports.
std::string format_size(int64_t bytes);

} // namespace quantforge

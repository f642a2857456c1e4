#pragma once

#include "quantforge/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace quantforge {

// Llama-style decoder shapes: tied embeddings, grouped-query attention,
// gated MLP, RMS-norm weights per layer plus a final norm.
struct LlamaShape {
    int64_t hidden = 0;
    int64_t kv_dim = 0;  // kv heads * head dim
    int64_t ffn = 0;
    int64_t vocab = 0;
    int layers = 0;
    ScalarType dtype = ScalarType::BF16;
};

ModelManifest llama_manifest(const std::string& name, const LlamaShape& shape);

// Named manifests and plans usable anywhere a JSON path is accepted:
//   llama32-3b       3072/1024/8192, 28 layers, vocab 128256 (3.21 B params)
//   llama32-3b-desk   768/ 256/2048,  4 layers, vocab   4584 (28.7 M params)
//   q4_k_m-default   Q4_K, with Q6_K embeddings/output/value projections
//   nf4-linear-only  NF4 projections, F16 embeddings (norms pin to F32)
//   q8_0-all, f16-all, identity
std::vector<std::string> builtin_manifest_names();
std::vector<std::string> builtin_plan_names();
std::optional<ModelManifest> builtin_manifest(const std::string& name);
std::optional<QuantPlan> builtin_plan(const std::string& name);

// Preset name, else a JSON file. Manifest problems throw FormatError;
// plan problems throw std::invalid_argument.
ModelManifest resolve_manifest(const std::string& arg);
QuantPlan resolve_plan(const std::string& arg);

} // namespace quantforge

#pragma once

#include "quantforge/metrics.hpp"
#include "quantforge/safetensors.hpp"
#include "quantforge/types.hpp"

#include <string>
#include <vector>

namespace quantforge {

struct QuantizeOptions {
    QuantPlan plan;
    bool paper_pipeline = false;  // route through the NF4 intermediate stage
    int jobs = 1;                 // 0 = hardware concurrency; output is jobs-independent
};

struct QuantizeResult {
    SizeReport report;            // measured accounting of the written GGUF
    std::vector<StageRow> stages; // baseline [, NF4 intermediate], final
    std::string output_path;
};

// Quantizes every tensor per the plan assignment and writes a GGUF.
// Plans assigning NF4 are rejected (UnsupportedTypeError) unless
// paper_pipeline is set, in which case tensors pass through an NF4
// quantize/dequantize stage first and the plan applies to the result.
QuantizeResult quantize_container(const StContainer& source, const std::string& output_path,
                                  const QuantizeOptions& options);
QuantizeResult quantize_file(const std::string& source_path, const std::string& output_path,
                             const QuantizeOptions& options);

} // namespace quantforge

#include "quantforge/presets.hpp"

#include "quantforge/errors.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace quantforge {
namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool file_exists(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return static_cast<bool>(in);
}

} // namespace

ModelManifest llama_manifest(const std::string& name, const LlamaShape& s) {
    ModelManifest m;
    m.model_name = name;
    const ScalarType dt = s.dtype;
    m.entries.push_back({"model.embed_tokens.weight", {s.vocab, s.hidden}, dt});
    for (int i = 0; i < s.layers; ++i) {
        const std::string p = "model.layers." + std::to_string(i) + ".";
        m.entries.push_back({p + "self_attn.q_proj.weight", {s.hidden, s.hidden}, dt});
        m.entries.push_back({p + "self_attn.k_proj.weight", {s.kv_dim, s.hidden}, dt});
        m.entries.push_back({p + "self_attn.v_proj.weight", {s.kv_dim, s.hidden}, dt});
        m.entries.push_back({p + "self_attn.o_proj.weight", {s.hidden, s.hidden}, dt});
        m.entries.push_back({p + "mlp.gate_proj.weight", {s.ffn, s.hidden}, dt});
        m.entries.push_back({p + "mlp.up_proj.weight", {s.ffn, s.hidden}, dt});
        m.entries.push_back({p + "mlp.down_proj.weight", {s.hidden, s.ffn}, dt});
        m.entries.push_back({p + "input_layernorm.weight", {s.hidden}, dt});
        m.entries.push_back({p + "post_attention_layernorm.weight", {s.hidden}, dt});
    }
    m.entries.push_back({"model.norm.weight", {s.hidden}, dt});
    return m;
}

std::vector<std::string> builtin_manifest_names() { return {"llama32-3b", "llama32-3b-desk"}; }

std::vector<std::string> builtin_plan_names() {
    return {"q4_k_m-default", "nf4-linear-only", "q8_0-all", "f16-all", "identity"};
}

std::optional<ModelManifest> builtin_manifest(const std::string& name) {
    if (name == "llama32-3b")
        return llama_manifest(name, {3072, 1024, 8192, 128256, 28, ScalarType::BF16});
    if (name == "llama32-3b-desk")
        return llama_manifest(name, {768, 256, 2048, 4584, 4, ScalarType::BF16});
    return std::nullopt;
}

std::optional<QuantPlan> builtin_plan(const std::string& name) {
    if (name == "q4_k_m-default") {
        QuantPlan p;
        p.name = name;
        p.default_type = QuantType::Q4_K;
        p.rules = {{"*embed_tokens*", QuantType::Q6_K},
                   {"*lm_head*", QuantType::Q6_K},
                   {"output.weight", QuantType::Q6_K},
                   {"*v_proj*", QuantType::Q6_K}};
        return p;
    }
    if (name == "nf4-linear-only") {
        QuantPlan p;
        p.name = name;
        p.default_type = QuantType::NF4;
        p.rules = {{"*embed_tokens*", QuantType::F16},
                   {"*lm_head*", QuantType::F16},
                   {"output.weight", QuantType::F16}};
        return p;
    }
    if (name == "q8_0-all") {
        QuantPlan p;
        p.name = name;
        p.default_type = QuantType::Q8_0;
        return p;
    }
    if (name == "f16-all") {
        QuantPlan p;
        p.name = name;
        p.default_type = QuantType::F16;
        return p;
    }
    if (name == "identity") {
        QuantPlan p;
        p.name = name;
        p.default_type = QuantType::F16;
        p.keep_source = true;
        return p;
    }
    return std::nullopt;
}

ModelManifest resolve_manifest(const std::string& arg) {
    if (auto m = builtin_manifest(arg)) return *m;
    if (!file_exists(arg))
        throw FormatError("manifest '" + arg + "' is neither a built-in name nor a readable file");
    return ModelManifest::from_json(read_text_file(arg));
}

QuantPlan resolve_plan(const std::string& arg) {
    if (auto p = builtin_plan(arg)) return *p;
    if (!file_exists(arg))
        throw std::invalid_argument("plan '" + arg +
                                    "' is neither a built-in name nor a readable file");
    return QuantPlan::from_json(read_text_file(arg));
}

} // namespace quantforge

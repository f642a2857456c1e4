#include "quantforge/types.hpp"

#include "quantforge/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace quantforge {

const char* to_string(ScalarType t) {
    switch (t) {
        case ScalarType::F32: return "F32";
        case ScalarType::F16: return "F16";
        case ScalarType::BF16: return "BF16";
    }
    return "?";
}

const char* to_string(QuantType t) {
    switch (t) {
        case QuantType::F32: return "F32";
        case QuantType::F16: return "F16";
        case QuantType::BF16: return "BF16";
        case QuantType::Q8_0: return "Q8_0";
        case QuantType::Q4_K: return "Q4_K";
        case QuantType::Q6_K: return "Q6_K";
        case QuantType::NF4: return "NF4";
    }
    return "?";
}

ScalarType scalar_type_from_string(const std::string& s) {
    if (s == "F32") return ScalarType::F32;
    if (s == "F16") return ScalarType::F16;
    if (s == "BF16") return ScalarType::BF16;
    throw std::invalid_argument("unknown scalar type: \"" + s + "\"");
}

QuantType quant_type_from_string(const std::string& s) {
    if (s == "F32") return QuantType::F32;
    if (s == "F16") return QuantType::F16;
    if (s == "BF16") return QuantType::BF16;
    if (s == "Q8_0") return QuantType::Q8_0;
    if (s == "Q4_K") return QuantType::Q4_K;
    if (s == "Q6_K") return QuantType::Q6_K;
    if (s == "NF4") return QuantType::NF4;
    throw std::invalid_argument("unknown quant type: \"" + s + "\"");
}

QuantType to_quant_type(ScalarType t) {
    switch (t) {
        case ScalarType::F32: return QuantType::F32;
        case ScalarType::F16: return QuantType::F16;
        case ScalarType::BF16: return QuantType::BF16;
    }
    return QuantType::F32;
}

static int64_t shape_product(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

int64_t TensorView::elem_count() const { return shape_product(shape); }

int64_t TensorView::row_length() const { return shape.empty() ? 0 : shape.back(); }

int64_t TensorView::row_count() const {
    if (shape.empty()) return 0;
    int64_t n = 1;
    for (size_t i = 0; i + 1 < shape.size(); ++i) n *= shape[i];
    return n;
}

int64_t TensorView::expected_bytes() const {
    const BlockGeometry g = geometry(dtype);
    return row_count() * (row_length() / g.block_elems) * g.block_bytes;
}

void TensorView::validate() const {
    if (shape.empty()) throw std::invalid_argument("tensor \"" + name + "\": empty shape");
    for (int64_t d : shape)
        if (d < 1) throw std::invalid_argument("tensor \"" + name + "\": non-positive dimension");
    const BlockGeometry g = geometry(dtype);
    if (row_length() % g.block_elems != 0)
        throw std::invalid_argument("tensor \"" + name + "\": row length " +
                                    std::to_string(row_length()) + " not divisible by block size " +
                                    std::to_string(g.block_elems) + " of " + to_string(dtype));
    if (static_cast<int64_t>(data.size()) != expected_bytes())
        throw std::invalid_argument("tensor \"" + name + "\": data is " +
                                    std::to_string(data.size()) + " bytes, expected " +
                                    std::to_string(expected_bytes()));
}

int64_t ManifestEntry::elem_count() const { return shape_product(shape); }

int64_t ModelManifest::total_params() const {
    int64_t n = 0;
    for (const auto& e : entries) n += e.elem_count();
    return n;
}

void ModelManifest::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        if (e.name.empty()) throw std::invalid_argument("manifest: empty tensor name");
        if (!seen.insert(e.name).second)
            throw std::invalid_argument("manifest: duplicate tensor name \"" + e.name + "\"");
        if (e.shape.empty())
            throw std::invalid_argument("manifest: tensor \"" + e.name + "\" has empty shape");
        for (int64_t d : e.shape)
            if (d < 1)
                throw std::invalid_argument("manifest: tensor \"" + e.name +
                                            "\" has non-positive dimension");
    }
}

std::string ModelManifest::to_json() const {
    nlohmann::ordered_json j;
    j["model_name"] = model_name;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json je;
        je["name"] = e.name;
        je["shape"] = e.shape;
        je["dtype"] = to_string(e.dtype);
        j["entries"].push_back(std::move(je));
    }
    j["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : metadata) j["metadata"][k] = v;
    return j.dump(2) + "\n";
}

ModelManifest ModelManifest::from_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: invalid JSON: ") + e.what());
    }
    ModelManifest m;
    try {
        if (!j.is_object()) throw FormatError("manifest: top-level JSON value is not an object");
        m.model_name = j.value("model_name", std::string());
        if (!j.contains("entries") || !j["entries"].is_array())
            throw FormatError("manifest: missing \"entries\" array");
        for (const auto& je : j["entries"]) {
            ManifestEntry e;
            e.name = je.at("name").get<std::string>();
            e.shape = je.at("shape").get<std::vector<int64_t>>();
            e.dtype = scalar_type_from_string(je.at("dtype").get<std::string>());
            m.entries.push_back(std::move(e));
        }
        if (j.contains("metadata")) {
            if (!j["metadata"].is_object())
                throw FormatError("manifest: \"metadata\" is not an object");
            for (const auto& [k, v] : j["metadata"].items())
                m.metadata.emplace_back(k, v.get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return m;
}

std::string QuantPlan::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["default"] = keep_source ? "SOURCE" : to_string(default_type);
    j["fallback"] = "F16";
    j["rules"] = nlohmann::ordered_json::array();
    for (const auto& r : rules) {
        nlohmann::ordered_json jr;
        jr["pattern"] = r.pattern;
        jr["type"] = to_string(r.type);
        j["rules"].push_back(std::move(jr));
    }
    return j.dump(2) + "\n";
}

QuantPlan QuantPlan::from_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("plan: invalid JSON: ") + e.what());
    }
    QuantPlan p;
    try {
        if (!j.is_object()) throw std::invalid_argument("plan: top-level JSON value is not an object");
        p.name = j.value("name", std::string("unnamed"));
        const std::string def = j.at("default").get<std::string>();
        if (def == "SOURCE") {
            p.keep_source = true;
            p.default_type = QuantType::F32;
        } else {
            p.default_type = quant_type_from_string(def);
        }
        if (j.contains("fallback")) {
            const std::string fb = j["fallback"].get<std::string>();
            if (fb != "F16")
                throw std::invalid_argument("plan: only \"F16\" fallback is supported, got \"" + fb + "\"");
        }
        if (j.contains("rules")) {
            if (!j["rules"].is_array()) throw std::invalid_argument("plan: \"rules\" is not an array");
            for (const auto& jr : j["rules"]) {
                PlanRule r;
                r.pattern = jr.at("pattern").get<std::string>();
                r.type = quant_type_from_string(jr.at("type").get<std::string>());
                p.rules.push_back(std::move(r));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("plan: ") + e.what());
    }
    return p;
}

const char* to_string(AssignReason r) {
    switch (r) {
        case AssignReason::Rule: return "rule";
        case AssignReason::Default: return "default";
        case AssignReason::Source: return "source";
        case AssignReason::Norm1D: return "norm-1d";
        case AssignReason::Divisibility: return "fallback-f16";
    }
    return "?";
}

bool glob_match(const std::string& pattern, const std::string& text) {
    // iterative matcher with single-star backtracking
    size_t p = 0, t = 0, star = std::string::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<TypeAssignment> assign_types(const ModelManifest& manifest, const QuantPlan& plan) {
    manifest.validate();
    std::vector<TypeAssignment> out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        if (plan.keep_source) {
            out.push_back({e.name, to_quant_type(e.dtype), AssignReason::Source});
            continue;
        }
        if (e.shape.size() == 1) {
            out.push_back({e.name, QuantType::F32, AssignReason::Norm1D});
            continue;
        }
        QuantType t = plan.default_type;
        AssignReason reason = AssignReason::Default;
        for (const auto& r : plan.rules) {
            if (glob_match(r.pattern, e.name)) {
                t = r.type;
                reason = AssignReason::Rule;
                break;
            }
        }
        const BlockGeometry g = geometry(t);
        if (e.shape.back() % g.block_elems != 0) {
            t = QuantType::F16;
            reason = AssignReason::Divisibility;
        }
        out.push_back({e.name, t, reason});
    }
    return out;
}

int64_t stored_bytes(QuantType t, int64_t elems) {
    const BlockGeometry g = geometry(t);
    if (elems % g.block_elems != 0)
        throw std::invalid_argument(std::string("element count ") + std::to_string(elems) +
                                    " not divisible by block size of " + to_string(t));
    return elems / g.block_elems * g.block_bytes;
}

} // namespace quantforge

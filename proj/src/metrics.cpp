#include "quantforge/metrics.hpp"

#include "quantforge/errors.hpp"
#include "quantforge/gguf.hpp"
#include "quantforge/kquant.hpp"
#include "quantforge/parallel.hpp"
#include "quantforge/safetensors.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <thread>

namespace quantforge {
namespace {

using ordered_json = nlohmann::ordered_json;

// Neumaier-compensated accumulator; keeps double sums exact enough for
// billions of squared terms.
struct KahanSum {
    double sum = 0.0, comp = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::fabs(sum) >= std::fabs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

struct RawComparison {
    double sse = 0.0;      // sum (a-b)^2
    double signal = 0.0;   // sum a^2
    double norm_b = 0.0;   // sum b^2
    double dot = 0.0;      // sum a*b
    double max_abs_err = 0.0;
    int64_t n = 0;
};

RawComparison accumulate(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("compare_tensors: length mismatch");
    if (a.empty()) throw std::invalid_argument("compare_tensors: empty input");
    KahanSum sse, signal, norm_b, dot;
    double max_err = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        const double e = x - y;
        sse.add(e * e);
        signal.add(x * x);
        norm_b.add(y * y);
        dot.add(x * y);
        max_err = std::max(max_err, std::fabs(e));
    }
    return {sse.value(), signal.value(), norm_b.value(), dot.value(),
            max_err, static_cast<int64_t>(a.size())};
}

double sqnr_db_from(double signal, double noise) {
    if (noise <= 0.0)
        return std::numeric_limits<double>::infinity();
    if (signal <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal / noise);
}

ErrorStats stats_from(const RawComparison& r) {
    ErrorStats s;
    s.n_elements = r.n;
    s.rmse = r.n > 0 ? std::sqrt(r.sse / static_cast<double>(r.n)) : 0.0;
    s.max_abs_err = r.max_abs_err;
    s.sqnr_db = sqnr_db_from(r.signal, r.sse);
    if (r.signal == 0.0 && r.norm_b == 0.0)
        s.cosine_sim = 1.0;
    else if (r.signal == 0.0 || r.norm_b == 0.0)
        s.cosine_sim = 0.0;
    else
        s.cosine_sim = std::clamp(r.dot / (std::sqrt(r.signal) * std::sqrt(r.norm_b)), -1.0, 1.0);
    return s;
}

std::string shape_string(const std::vector<int64_t>& shape) {
    std::string out = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

ordered_json finite_or_null(double v) {
    // nlohmann already serializes non-finite doubles as null; being explicit
    // keeps the report schema independent of that implementation detail.
    if (!std::isfinite(v)) return nullptr;
    return v;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

} // namespace

ErrorStats compare_tensors(std::span<const float> original, std::span<const float> reconstructed) {
    return stats_from(accumulate(original, reconstructed));
}

SizeReport estimate_size(const ModelManifest& manifest, const QuantPlan& plan) {
    manifest.validate();
    const std::vector<TypeAssignment> assignments = assign_types(manifest, plan);

    SizeReport report;
    report.model = manifest.model_name;
    report.plan = plan.name;
    report.params = manifest.total_params();
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const ManifestEntry& e = manifest.entries[i];
        const TypeAssignment& a = assignments[i];
        const int64_t bytes = stored_bytes(a.type, e.elem_count());
        report.per_tensor.push_back({e.name, a.type, a.reason, e.elem_count(), bytes});
        report.baseline_bytes += e.byte_count();
        report.tensor_bytes += bytes;
    }
    report.total_bytes = static_cast<int64_t>(estimate_gguf_size(manifest, assignments));
    report.container_bytes = report.total_bytes - report.tensor_bytes;
    report.reduction_pct =
        report.baseline_bytes > 0
            ? 100.0 * (1.0 - static_cast<double>(report.total_bytes) /
                                 static_cast<double>(report.baseline_bytes))
            : 0.0;
    report.bits_per_weight =
        report.params > 0
            ? 8.0 * static_cast<double>(report.tensor_bytes) / static_cast<double>(report.params)
            : 0.0;
    return report;
}

double ratio_ladder(QuantType target) { return 32.0 / bits_per_weight(target); }

double nominal_ratio(int bits) {
    if (bits <= 0) throw std::invalid_argument("nominal_ratio: bits must be positive");
    return 32.0 / static_cast<double>(bits);
}

LoadedModel load_model(const std::string& path) {
    LoadedModel model;
    model.path = path;

    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw FormatError("cannot open '" + path + "'");
    }
    model.file_bytes = static_cast<int64_t>(std::filesystem::file_size(path));

    char magic[4] = {0, 0, 0, 0};
    {
        std::ifstream in(path, std::ios::binary);
        in.read(magic, 4);
    }

    if (std::string_view(magic, 4) == "GGUF") {
        const GgufFile file = read_gguf_file(path);
        for (const GgufTensorInfo& info : file.tensors) {
            const auto qt = quant_type_from_ggml(info.type_id);
            if (!qt)
                throw UnsupportedTypeError("cannot dequantize tensor '" + info.name +
                                           "' of type " + ggml_type_display(info.type_id));
            LoadedTensor t;
            t.name = info.name;
            t.shape = info.shape();
            t.storage = *qt;
            t.values = dequantize_row(file.tensor_bytes(info), *qt);
            model.tensors.push_back(std::move(t));
        }
        return model;
    }

    const StContainer container = StContainer::open(path);
    for (const ManifestEntry& e : container.manifest().entries) {
        LoadedTensor t;
        t.name = e.name;
        t.shape = e.shape;
        t.storage = to_quant_type(e.dtype);
        t.values = container.tensor_f32(e.name);
        model.tensors.push_back(std::move(t));
    }
    return model;
}

DiffReport diff_models(const LoadedModel& a, const LoadedModel& b, int jobs) {
    std::map<std::string, const LoadedTensor*> b_index;
    for (const LoadedTensor& t : b.tensors) b_index.emplace(t.name, &t);

    std::vector<std::string> problems;
    std::vector<std::pair<const LoadedTensor*, const LoadedTensor*>> matched;
    for (const LoadedTensor& t : a.tensors) {
        auto it = b_index.find(t.name);
        if (it == b_index.end()) {
            problems.push_back("only in " + a.path + ": " + t.name);
            continue;
        }
        if (t.shape != it->second->shape) {
            problems.push_back("shape mismatch for " + t.name + ": " + shape_string(t.shape) +
                               " vs " + shape_string(it->second->shape));
            continue;
        }
        matched.emplace_back(&t, it->second);
    }
    {
        std::map<std::string, bool> a_names;
        for (const LoadedTensor& t : a.tensors) a_names.emplace(t.name, true);
        for (const LoadedTensor& t : b.tensors)
            if (!a_names.count(t.name)) problems.push_back("only in " + b.path + ": " + t.name);
    }
    if (!problems.empty()) {
        std::string msg = "models do not line up:";
        for (const std::string& p : problems) msg += "\n  " + p;
        throw DiffMismatchError(msg);
    }

    DiffReport report;
    report.a_path = a.path;
    report.b_path = b.path;
    report.a_bytes = a.file_bytes;
    report.b_bytes = b.file_bytes;
    report.tensors.resize(matched.size());

    std::vector<RawComparison> raw(matched.size());
    parallel_for(jobs, matched.size(), [&](size_t i) {
        raw[i] = accumulate(matched[i].first->values, matched[i].second->values);
        report.tensors[i] = {matched[i].first->name, matched[i].first->storage,
                             matched[i].second->storage, stats_from(raw[i])};
    });

    KahanSum sse, signal;
    for (const RawComparison& r : raw) {
        sse.add(r.sse);
        signal.add(r.signal);
        report.n_elements += r.n;
    }
    report.overall_rmse =
        report.n_elements > 0 ? std::sqrt(sse.value() / static_cast<double>(report.n_elements))
                              : 0.0;
    report.overall_sqnr_db = sqnr_db_from(signal.value(), sse.value());
    return report;
}

std::string to_json(const SizeReport& report) {
    ordered_json doc;
    doc["model"] = report.model;
    doc["plan"] = report.plan;
    doc["params"] = report.params;
    doc["baseline_bytes"] = report.baseline_bytes;
    doc["tensor_bytes"] = report.tensor_bytes;
    doc["container_bytes"] = report.container_bytes;
    doc["total_bytes"] = report.total_bytes;
    doc["reduction_pct"] = report.reduction_pct;
    doc["bits_per_weight"] = report.bits_per_weight;
    doc["tensors"] = ordered_json::array();
    for (const TensorSizeLine& line : report.per_tensor) {
        ordered_json t;
        t["name"] = line.name;
        t["type"] = to_string(line.type);
        t["reason"] = to_string(line.reason);
        t["params"] = line.params;
        t["bytes"] = line.bytes;
        doc["tensors"].push_back(std::move(t));
    }
    return doc.dump(2) + "\n";
}

std::string to_text(const SizeReport& report, bool per_tensor_table) {
    std::ostringstream out;
    out << "model: " << report.model << "\n";
    out << "plan: " << report.plan << "\n";
    out << "params: " << report.params << "\n";
    out << "baseline: " << report.baseline_bytes << " B  (" << format_size(report.baseline_bytes)
        << ")\n";
    out << "tensors: " << report.tensor_bytes << " B\n";
    out << "container: " << report.container_bytes << " B\n";
    out << "total: " << report.total_bytes << " B  (" << format_size(report.total_bytes) << ")\n";
    out << "reduction: " << fixed(report.reduction_pct, 2) << " %\n";
    out << "bits/weight: " << fixed(report.bits_per_weight, 3) << "\n";
    if (per_tensor_table && !report.per_tensor.empty()) {
        size_t name_w = 4, type_w = 4, reason_w = 6;
        for (const TensorSizeLine& l : report.per_tensor) {
            name_w = std::max(name_w, l.name.size());
            type_w = std::max(type_w, std::string_view(to_string(l.type)).size());
            reason_w = std::max(reason_w, std::string_view(to_string(l.reason)).size());
        }
        out << "\n";
        out << std::left << std::setw(static_cast<int>(name_w) + 2) << "name"
            << std::setw(static_cast<int>(type_w) + 2) << "type"
            << std::setw(static_cast<int>(reason_w) + 2) << "reason" << std::right
            << std::setw(14) << "params" << std::setw(14) << "bytes" << "\n";
        for (const TensorSizeLine& l : report.per_tensor) {
            out << std::left << std::setw(static_cast<int>(name_w) + 2) << l.name
                << std::setw(static_cast<int>(type_w) + 2) << to_string(l.type)
                << std::setw(static_cast<int>(reason_w) + 2) << to_string(l.reason) << std::right
                << std::setw(14) << l.params << std::setw(14) << l.bytes << "\n";
        }
    }
    return out.str();
}

std::string to_json(const DiffReport& report) {
    ordered_json doc;
    doc["a"] = report.a_path;
    doc["b"] = report.b_path;
    doc["a_bytes"] = report.a_bytes;
    doc["b_bytes"] = report.b_bytes;
    doc["n_elements"] = report.n_elements;
    doc["overall_rmse"] = report.overall_rmse;
    doc["overall_sqnr_db"] = finite_or_null(report.overall_sqnr_db);
    doc["tensors"] = ordered_json::array();
    for (const TensorDiff& t : report.tensors) {
        ordered_json j;
        j["name"] = t.name;
        j["a_type"] = to_string(t.a_storage);
        j["b_type"] = to_string(t.b_storage);
        j["n_elements"] = t.stats.n_elements;
        j["rmse"] = t.stats.rmse;
        j["max_abs_err"] = t.stats.max_abs_err;
        j["sqnr_db"] = finite_or_null(t.stats.sqnr_db);
        j["cosine_sim"] = t.stats.cosine_sim;
        doc["tensors"].push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

namespace {

std::string sqnr_display(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fixed(v, 2);
}

} // namespace

std::string to_text(const DiffReport& report) {
    std::ostringstream out;
    out << "a: " << report.a_path << " (" << report.a_bytes << " B)\n";
    out << "b: " << report.b_path << " (" << report.b_bytes << " B)\n";
    out << "elements: " << report.n_elements << "\n";
    out << "overall rmse: " << report.overall_rmse << "\n";
    out << "overall sqnr: " << sqnr_display(report.overall_sqnr_db) << " dB\n";
    if (!report.tensors.empty()) {
        size_t name_w = 4;
        for (const TensorDiff& t : report.tensors) name_w = std::max(name_w, t.name.size());
        out << "\n";
        out << std::left << std::setw(static_cast<int>(name_w) + 2) << "name" << std::right
            << std::setw(12) << "types" << std::setw(14) << "rmse" << std::setw(14) << "max_err"
            << std::setw(12) << "sqnr_db" << std::setw(10) << "cosine" << "\n";
        for (const TensorDiff& t : report.tensors) {
            const std::string types =
                std::string(to_string(t.a_storage)) + "/" + to_string(t.b_storage);
            std::ostringstream rmse, maxe;
            rmse << t.stats.rmse;
            maxe << t.stats.max_abs_err;
            out << std::left << std::setw(static_cast<int>(name_w) + 2) << t.name << std::right
                << std::setw(12) << types << std::setw(14) << rmse.str() << std::setw(14)
                << maxe.str() << std::setw(12) << sqnr_display(t.stats.sqnr_db) << std::setw(10)
                << fixed(t.stats.cosine_sim, 6) << "\n";
        }
    }
    return out.str();
}

std::string stage_table_text(const std::vector<StageRow>& rows) {
    size_t label_w = 6, size_w = 4;
    std::vector<std::string> sizes;
    for (const StageRow& r : rows) {
        sizes.push_back(std::to_string(r.bytes) + " B (" + format_size(r.bytes) + ")");
        label_w = std::max(label_w, r.label.size());
        size_w = std::max(size_w, sizes.back().size());
    }
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(label_w) + 2) << "Format"
        << std::setw(static_cast<int>(size_w) + 2) << "Size" << "Reduction\n";
    for (size_t i = 0; i < rows.size(); ++i) {
        out << std::left << std::setw(static_cast<int>(label_w) + 2) << rows[i].label
            << std::setw(static_cast<int>(size_w) + 2) << sizes[i]
            << fixed(rows[i].reduction_pct, 2) << " %\n";
    }
    return out.str();
}

std::string stage_table_json(const std::string& model, const std::vector<StageRow>& rows) {
    ordered_json doc;
    doc["model"] = model;
    doc["stages"] = ordered_json::array();
    for (const StageRow& r : rows) {
        ordered_json j;
        j["format"] = r.label;
        j["bytes"] = r.bytes;
        j["reduction_pct"] = r.reduction_pct;
        doc["stages"].push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

std::string format_size(int64_t bytes) {
    const double b = static_cast<double>(bytes);
    if (bytes >= (int64_t{1} << 30))
        return fixed(b / 1073741824.0, 3) + " GiB / " + fixed(b / 1e9, 3) + " GB";
    if (bytes >= (int64_t{1} << 20))
        return fixed(b / 1048576.0, 3) + " MiB / " + fixed(b / 1e6, 3) + " MB";
    if (bytes >= 1024)
        return fixed(b / 1024.0, 3) + " KiB / " + fixed(b / 1e3, 3) + " kB";
    return std::to_string(bytes) + " B";
}

} // namespace quantforge

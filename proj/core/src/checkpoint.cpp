#include "dimignn/checkpoint.hpp"

#include <json.hpp>

#include <fstream>

namespace dimignn {

namespace {
using nlohmann::json;

json config_to_json(const ModelConfig& c) {
    json j;
    j["input_len"] = c.input_len;
    j["horizon"] = c.horizon;
    j["segment_len"] = c.segment_len;
    j["blocks"] = c.blocks;
    j["hidden"] = c.hidden;
    j["heads"] = c.heads;
    j["k_neighbors"] = c.k_neighbors;
    j["lambda"] = c.lambda;
    j["norm"] = norm_kind_name(c.norm);
    j["fusion"] = fusion_kind_name(c.fusion);
    j["dnsm_enabled"] = c.dnsm_enabled;
    j["d_fuse"] = c.d_fuse;
    j["lr"] = c.lr;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["patience"] = c.patience;
    j["seed"] = c.seed;
    return j;
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.input_len = j.at("input_len").get<int>();
    c.horizon = j.at("horizon").get<int>();
    c.segment_len = j.at("segment_len").get<int>();
    c.blocks = j.at("blocks").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.heads = j.at("heads").get<int>();
    c.k_neighbors = j.at("k_neighbors").get<int>();
    c.lambda = j.at("lambda").get<double>();
    c.norm = parse_norm_kind(j.at("norm").get<std::string>());
    c.fusion = parse_fusion_kind(j.at("fusion").get<std::string>());
    c.dnsm_enabled = j.at("dnsm_enabled").get<bool>();
    c.d_fuse = j.at("d_fuse").get<int>();
    c.lr = j.at("lr").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}
} // namespace

void save_checkpoint(const Model& model, const NormStats& norm,
                     const std::vector<std::string>& variable_names, const std::string& path) {
    json j;
    j["format"] = "dimignn-checkpoint";
    j["version"] = 1;
    j["config"] = config_to_json(model.cfg);
    j["n_vars"] = model.n_vars;
    j["c_attrs"] = model.c_attrs;
    j["variable_names"] = variable_names;
    j["norm_stats"] = json::parse(norm.to_json());
    json params = json::object();
    for (const auto& [name, tensor] : model.store.entries()) {
        json entry;
        entry["shape"] = tensor.shape();
        entry["values"] = tensor.values();
        params[name] = std::move(entry);
    }
    j["parameters"] = std::move(params);

    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << j.dump(1) << '\n';
}

std::pair<Model, Checkpoint> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("checkpoint is not valid JSON: " + std::string(e.what()));
    }
    if (j.value("format", "") != "dimignn-checkpoint") {
        throw DataError("not a dimignn checkpoint: " + path);
    }

    Checkpoint meta;
    meta.cfg = config_from_json(j.at("config"));
    meta.n_vars = j.at("n_vars").get<int>();
    meta.c_attrs = j.at("c_attrs").get<int>();
    meta.variable_names = j.at("variable_names").get<std::vector<std::string>>();
    meta.norm = NormStats::from_json(j.at("norm_stats").dump());

    Model model = Model::init(meta.cfg, meta.n_vars, meta.c_attrs);
    const json& params = j.at("parameters");
    for (auto& [name, tensor] : model.store.entries()) {
        (void)tensor;
        if (!params.contains(name)) {
            throw DataError("checkpoint is missing parameter '" + name + "'");
        }
    }
    for (const auto& [name, entry] : params.items()) {
        if (!model.store.contains(name)) {
            throw DataError("checkpoint has unexpected parameter '" + name + "'");
        }
        Tensor t = model.store.get(name);
        const Shape shape = entry.at("shape").get<Shape>();
        if (shape != t.shape()) {
            throw DataError("checkpoint shape audit failed for '" + name + "': stored " +
                            shape_to_string(shape) + ", model expects " + shape_to_string(t.shape()));
        }
        auto values = entry.at("values").get<std::vector<double>>();
        if (values.size() != t.values().size()) {
            throw DataError("checkpoint value count mismatch for '" + name + "'");
        }
        t.mutable_values() = std::move(values);
    }
    return {std::move(model), std::move(meta)};
}

} // namespace dimignn

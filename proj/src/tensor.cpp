#include "neu/tensor.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace neu::nn {

using nlohmann::json;

Tensor& ParameterSet::add(const std::string& name, std::vector<size_t> shape, bool trainable) {
    if (index_.count(name)) fail("ParameterSet: duplicate parameter name '", name, "'");
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, Tensor(std::move(shape)), trainable});
    Tensor& t = entries_.back().tensor;
    if (trainable) t.alloc_grad();
    return t;
}

Tensor& ParameterSet::add_init(const std::string& name, std::vector<size_t> shape, Rng& rng,
                               bool trainable) {
    Tensor& t = add(name, std::move(shape), trainable);
    size_t fan_in = t.shape.size() >= 2 ? t.shape.back() : t.size();
    size_t fan_out = t.shape.size() >= 2 ? t.shape.front() : t.size();
    double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& x : t.v) x = rng.uniform(-r, r);
    return t;
}

Tensor& ParameterSet::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail("ParameterSet: no parameter named '", name, "'");
    return entries_[it->second].tensor;
}

const Tensor& ParameterSet::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail("ParameterSet: no parameter named '", name, "'");
    return entries_[it->second].tensor;
}

void ParameterSet::zero_grads() {
    for (auto& e : entries_)
        if (e.trainable) e.tensor.zero_grad();
}

void save_checkpoint(const std::string& path, const ParameterSet& params, long step,
                     const std::unordered_map<std::string, std::string>& meta) {
    json j;
    j["version"] = params.version();
    j["step"] = step;
    for (const auto& [k, v] : meta) j["meta"][k] = v;
    json tensors = json::object();
    for (const auto& e : params.entries()) {
        json t;
        t["shape"] = e.tensor.shape;
        t["values"] = e.tensor.v;
        t["trainable"] = e.trainable;
        tensors[e.name] = std::move(t);
    }
    j["tensors"] = std::move(tensors);
    std::ofstream os(path);
    if (!os) fail("cannot write checkpoint '", path, "'");
    os << j.dump() << "\n";
    if (!os) fail("write failed for checkpoint '", path, "'");
}

Checkpoint load_checkpoint(const std::string& path, ParameterSet& params) {
    std::ifstream is(path);
    if (!is) fail("cannot open checkpoint '", path, "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail("checkpoint '", path, "' is not valid JSON: ", e.what());
    }
    const std::string version = j.value("version", std::string());
    if (version != params.version())
        fail("checkpoint '", path, "' has version '", version, "', expected '", params.version(),
             "'");
    Checkpoint ck;
    ck.step = j.value("step", 0L);
    if (j.contains("meta"))
        for (auto& [k, v] : j["meta"].items()) ck.meta[k] = v.get<std::string>();
    const auto& tensors = j.at("tensors");
    size_t seen = 0;
    for (auto& e : params.entries()) {
        if (!tensors.contains(e.name))
            fail("checkpoint '", path, "' is missing tensor '", e.name, "'");
        const auto& t = tensors.at(e.name);
        auto shape = t.at("shape").get<std::vector<size_t>>();
        if (shape != e.tensor.shape)
            fail("checkpoint tensor '", e.name, "' shape mismatch in '", path, "'");
        e.tensor.v = t.at("values").get<std::vector<double>>();
        if (e.tensor.v.size() != Tensor::count(shape))
            fail("checkpoint tensor '", e.name, "' has wrong value count in '", path, "'");
        ++seen;
    }
    if (seen != tensors.size())
        fail("checkpoint '", path, "' contains ", tensors.size(), " tensors, model expects ", seen);
    return ck;
}

}  // namespace neu::nn

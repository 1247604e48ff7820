#include "alignlab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace alignlab {

const std::vector<float>* CheckpointData::find(const std::string& name) const {
    for (auto& [n, shape, v] : tensors)
        if (n == name) return &v;
    return nullptr;
}

std::string CheckpointData::hyper_or(const std::string& key, const std::string& fallback) const {
    auto it = hyper.find(key);
    return it == hyper.end() ? fallback : it->second;
}

void write_checkpoint_raw(const CheckpointData& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint: " + path);
    out << "ALIGNLAB-CKPT v1\n";
    for (auto& [k, v] : ckpt.hyper) out << "hyper " << k << ' ' << v << '\n';
    size_t offset = 0;
    for (auto& [name, shape, data] : ckpt.tensors) {
        out << "tensor " << name << " f32 ";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) out << 'x';
            out << shape[i];
        }
        out << ' ' << offset << '\n';
        offset += data.size() * sizeof(float);
    }
    out << "data\n";
    for (auto& [name, shape, data] : ckpt.tensors)
        out.write(reinterpret_cast<const char*>(data.data()),
                  std::streamsize(data.size() * sizeof(float)));
}

CheckpointData read_checkpoint_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "ALIGNLAB-CKPT v1")
        throw FormatError(path + ": not an ALIGNLAB-CKPT v1 file");
    CheckpointData ckpt;
    struct Entry {
        std::string name;
        std::vector<int> shape;
        size_t offset;
    };
    std::vector<Entry> entries;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "hyper") {
            std::string k, v;
            ss >> k >> v;
            ckpt.hyper[k] = v;
        } else if (kind == "tensor") {
            Entry e;
            std::string dtype, shape_str;
            ss >> e.name >> dtype >> shape_str >> e.offset;
            if (dtype != "f32") throw FormatError(path + ": unsupported dtype " + dtype);
            std::istringstream shs(shape_str);
            std::string dim;
            while (std::getline(shs, dim, 'x')) e.shape.push_back(std::stoi(dim));
            entries.push_back(std::move(e));
        } else {
            throw FormatError(path + ": unexpected manifest line: " + line);
        }
    }
    std::streampos payload = in.tellg();
    for (auto& e : entries) {
        size_t n = 1;
        for (int d : e.shape) n *= size_t(d);
        std::vector<float> data(n);
        in.seekg(payload + std::streamoff(e.offset));
        in.read(reinterpret_cast<char*>(data.data()), std::streamsize(n * sizeof(float)));
        if (!in) throw FormatError(path + ": truncated payload for tensor " + e.name);
        ckpt.tensors.push_back({e.name, e.shape, std::move(data)});
    }
    return ckpt;
}

CheckpointData model_to_checkpoint(const TransformerModel& m) {
    CheckpointData ckpt;
    ckpt.hyper["layers"] = std::to_string(m.hp.layers);
    ckpt.hyper["heads"] = std::to_string(m.hp.heads);
    ckpt.hyper["d_model"] = std::to_string(m.hp.d_model);
    ckpt.hyper["d_ff"] = std::to_string(m.hp.d_ff);
    ckpt.hyper["dropout"] = std::to_string(m.hp.dropout);
    ckpt.hyper["src_vocab"] = std::to_string(m.hp.src_vocab);
    ckpt.hyper["tgt_vocab"] = std::to_string(m.hp.tgt_vocab);
    for (auto& [name, t] : m.named_parameters())
        ckpt.tensors.push_back({name, t->shape, t->data});
    return ckpt;
}

TransformerModel model_from_checkpoint(const CheckpointData& ckpt) {
    Hyper hp;
    hp.layers = std::stoi(ckpt.hyper_or("layers", "4"));
    hp.heads = std::stoi(ckpt.hyper_or("heads", "4"));
    hp.d_model = std::stoi(ckpt.hyper_or("d_model", "64"));
    hp.d_ff = std::stoi(ckpt.hyper_or("d_ff", "256"));
    hp.dropout = std::stof(ckpt.hyper_or("dropout", "0.1"));
    hp.src_vocab = std::stoi(ckpt.hyper_or("src_vocab", "0"));
    hp.tgt_vocab = std::stoi(ckpt.hyper_or("tgt_vocab", "0"));
    Rng rng(1);
    auto m = TransformerModel::init(hp, rng);
    for (auto& [name, t] : m.named_parameters()) {
        const auto* data = ckpt.find(name);
        if (!data) throw FormatError("checkpoint missing tensor: " + name);
        if (data->size() != t->numel())
            throw FormatError("checkpoint tensor size mismatch: " + name);
        t->data = *data;
    }
    return m;
}

void save_model(const TransformerModel& m, const std::string& path) {
    write_checkpoint_raw(model_to_checkpoint(m), path);
}

TransformerModel load_model(const std::string& path) {
    return model_from_checkpoint(read_checkpoint_raw(path));
}

}  // namespace alignlab

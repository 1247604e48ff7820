#pragma once

#include <map>
#include <string>
#include <vector>

#include "alignlab/transformer.hpp"

namespace alignlab {

// Checkpoint container: ASCII header `ALIGNLAB-CKPT v1`, a manifest of
// `hyper <key> <value>` and `tensor <name> f32 <shape> <offset>` lines,
// a `data` separator, then raw float32 little-endian row-major payloads.
struct CheckpointData {
    std::map<std::string, std::string> hyper;
    std::vector<std::tuple<std::string, std::vector<int>, std::vector<float>>> tensors;

    const std::vector<float>* find(const std::string& name) const;
    std::string hyper_or(const std::string& key, const std::string& fallback) const;
};

void write_checkpoint_raw(const CheckpointData& ckpt, const std::string& path);
CheckpointData read_checkpoint_raw(const std::string& path);

void save_model(const TransformerModel& m, const std::string& path);
TransformerModel load_model(const std::string& path);

// Builders shared with the AET checkpoint format.
CheckpointData model_to_checkpoint(const TransformerModel& m);
TransformerModel model_from_checkpoint(const CheckpointData& ckpt);

}  // namespace alignlab

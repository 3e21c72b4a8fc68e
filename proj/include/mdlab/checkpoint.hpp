#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdlab/model.hpp"

namespace mdlab {

// Everything needed to continue or evaluate a run. RNG state is implicit:
// all streams are derived statelessly from (seed, epoch, segment id), so
// seed + step pin them exactly.
struct CheckpointData {
    std::string run_config_text;  // resolved flat key=value
    std::string vocab_text;       // tokenizer file contents
    ModelConfig model_config;
    uint64_t seed = 0;
    uint64_t next_step = 0;       // number of completed optimizer steps
    uint64_t total_steps = 0;
    std::vector<double> params;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
};

// Binary container: magic, format version, payload length, FNV-1a-64 of the
// payload, payload. Load verifies all four before touching the contents.
void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);  // DataError on any mismatch

uint64_t fnv1a64(const void* bytes, size_t n);

}  // namespace mdlab

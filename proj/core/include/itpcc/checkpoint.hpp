#pragma once

#include <string>
#include <utility>
#include <vector>

#include "itpcc/nn.hpp"
#include "itpcc/tensor.hpp"

namespace itpcc {

// Self-describing weight container: an architecture-description JSON
// string (hashed for integrity), followed by named f32 tensors. All
// scalars little-endian regardless of platform.
struct Checkpoint {
    std::string arch_json;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

uint64_t arch_hash(const std::string& json);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws std::runtime_error on bad magic/version, a hash mismatch, or
// truncated data.
Checkpoint load_checkpoint(const std::string& path);

// Snapshot / restore against a live parameter set. Restoring matches
// by name and verifies shapes; missing or extra names are errors.
Checkpoint snapshot_params(const std::string& arch_json,
                           const std::vector<nn::Param<float>*>& params);
void restore_params(const Checkpoint& ckpt,
                    const std::vector<nn::Param<float>*>& params);

}  // namespace itpcc

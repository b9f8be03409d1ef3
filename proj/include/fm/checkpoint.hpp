#pragma once

// Model checkpoint file format:
//   line 1  : header JSON + '\n' — {"config": ..., "tensors": [{name, shape,
//             offset}, ...]} with offsets in bytes into the payload
//   payload : raw little-endian float32 values, tensors in manifest order
//   trailer : 4-byte little-endian CRC-32 of the payload bytes
// One file per model. Round-trips are bit-identical.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fm/encoder.hpp"
#include "fm/params.hpp"
#include "fm/tensor.hpp"

namespace fm {

// Standard CRC-32 (reflected 0xEDB88320 polynomial, zlib-compatible).
// Chain calls by passing the previous return value as state.
std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t state = 0);

void to_json(nlohmann::json& j, const EncoderConfig& cfg);
void from_json(const nlohmann::json& j, EncoderConfig& cfg);

void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     const ParamStore<float>& store);

struct LoadedTensor {
    TensorSpec spec;
    Tensor<float> data;
};

struct LoadedCheckpoint {
    nlohmann::json config;
    std::vector<LoadedTensor> tensors;

    ParamStore<float> to_store() const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Checks that a loaded manifest carries exactly the expected tensors, in
// order, with matching shapes.
void verify_manifest(const LoadedCheckpoint& ckpt, const std::vector<TensorSpec>& expected);

} // namespace fm

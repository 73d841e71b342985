#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "rsak/model/model.hpp"

namespace rsak::cli {

inline constexpr std::uint32_t kCheckpointVersion = 1;
/// Name of the record holding the serialized ModelConfig.
inline constexpr std::string_view kConfigTensor = "meta.config";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Binary layout, all integers little-endian:
 *   "RSAK" | u32 version | u32 tensor_count |
 *   per tensor: u16 name_len | name | u8 rank | u32 dims[rank] | u8 trainable | f64 values
 *   | u32 CRC-32 of every preceding byte
 *
 * Tensors appear in name order. The model configuration travels as the
 * rank-1 record "meta.config" so a checkpoint is self-describing.
 */
std::vector<std::uint8_t> encode_checkpoint(const model::Model& model);
/// Throws CheckpointError on a bad magic, version, CRC, truncation, or a
/// tensor set that does not match the embedded configuration.
model::Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const model::Model& model);
model::Model load_checkpoint(const std::filesystem::path& path);

/// ModelConfig <-> flat vector used by the "meta.config" record.
std::vector<double> config_to_values(const model::ModelConfig& cfg);
model::ModelConfig config_from_values(std::span<const double> values);

}  // namespace rsak::cli

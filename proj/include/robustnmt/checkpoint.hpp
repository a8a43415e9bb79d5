// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "robustnmt/adam.hpp"
#include "robustnmt/discriminator.hpp"
#include "robustnmt/model.hpp"

// Versioned on-disk training snapshot: a fixed magic, a JSON header listing
// the model configuration and every tensor's name and shape, then the raw
// float64 payload little-endian in header order. Writes go through a
// temporary file and an atomic rename, so a crash never leaves a truncated
// checkpoint under the final name.
namespace robustnmt {

struct CheckpointData {
  std::uint64_t step = 0;
  ModelConfig config;
  ModelParams model;
  bool has_discriminator = false;
  DiscriminatorParams dis;  // meaningful only when has_discriminator
  std::uint64_t adam_t = 0;
  std::map<std::string, AdamSlot> adam_slots;
};

// DataError on unwritable paths.
void save_checkpoint(const CheckpointData& data, const std::string& path);

// Rebuilds parameters from the stored config and fills every tensor bitwise.
// DataError (naming the file) on a bad magic, an unsupported version, or any
// missing/extra/mis-shaped tensor.
CheckpointData load_checkpoint(const std::string& path);

}  // namespace robustnmt

#pragma once

#include <filesystem>

#include "evdet/network.hpp"

namespace evdet {

// Checkpoint file, magic "DSM1": u64 JSON header length, the header
// (architecture config plus a parameter manifest of name/shape/byte offset),
// then all parameters as little-endian f32 in manifest order. Running
// batch-norm statistics are part of the payload. Round-trip is exact.
void write_checkpoint(const DetectorModel<float>& model,
                      const std::filesystem::path& path);
DetectorModel<float> read_checkpoint(const std::filesystem::path& path);

}  // namespace evdet

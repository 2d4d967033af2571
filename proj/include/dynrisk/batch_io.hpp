#pragma once

#include <filesystem>
#include <string>

#include "dynrisk/stochastics.hpp"

namespace dynrisk {

/// Batch export: M rows of cells*d increments, either little-endian float64 binary or CSV,
/// plus a JSON sidecar carrying T, n, d, M and the seed.
enum class BatchFormat { Binary, Csv };

void write_batch(const BrownianBatch& batch, const std::filesystem::path& data_path, BatchFormat format);
BrownianBatch read_batch(const std::filesystem::path& data_path, BatchFormat format);

/// Sidecar path next to a data file: "paths.bin" -> "paths.bin.json".
std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

}  // namespace dynrisk

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tnnsim/model.hpp"

namespace tnnsim {

/// Binary model container (magic "TNN1"); see docs/model_format.md.
std::vector<std::uint8_t> serialize_model(const NetworkModel& model);

/// Throws FormatError (with the byte offset) on truncated, malformed or
/// internally inconsistent input, including thresholds that do not match the
/// stored bias and batchnorm parameters.
NetworkModel parse_model(std::span<const std::uint8_t> bytes);

void save_model(const NetworkModel& model, const std::filesystem::path& path);
NetworkModel load_model(const std::filesystem::path& path);

}  // namespace tnnsim

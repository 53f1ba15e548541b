#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "hdrssl/tensor.hpp"

namespace hdrssl::rgbe {

std::array<std::uint8_t, 4> encode(float r, float g, float b);
std::array<float, 3> decode(const std::array<std::uint8_t, 4>& rgbe);

/// Value that survives a write/read cycle through the shared-exponent encoding.
std::array<float, 3> quantize(float r, float g, float b);

/// Reads a Radiance picture (flat or run-length encoded scanlines, "-Y H +X W" orientation)
/// into a 1x3xHxW linear RGB tensor.
Tensor read(const std::filesystem::path& file);

/// Writes flat 32-bit_rle_rgbe scanlines.
void write(const std::filesystem::path& file, const Tensor& image);

}  // namespace hdrssl::rgbe

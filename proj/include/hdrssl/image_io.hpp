#pragma once

#include <filesystem>

#include "hdrssl/tensor.hpp"

namespace hdrssl {

/// Reads an 8- or 16-bit RGB TIFF into a 1x3xHxW tensor scaled to [0,1].
Tensor read_ldr_tiff(const std::filesystem::path& file);

/// Writes values in [0,1] as a 16-bit RGB TIFF (round-to-nearest).
void write_ldr_tiff(const std::filesystem::path& file, const Tensor& image);

/// Writes a 1- or 3-channel image in [0,1] as an 8-bit PNG.
void write_png8(const std::filesystem::path& file, const Tensor& image);

}  // namespace hdrssl

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mlci::tiff {

/// One grayscale page. Samples are widened to 16 bit regardless of the
/// on-disk depth; `bits_per_sample` records the source depth (8 or 16).
struct Page {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint16_t bits_per_sample = 8;
    std::vector<std::uint16_t> samples; // row-major, width*height
};

/// Baseline reader: uncompressed, one sample per pixel, 8/16-bit unsigned,
/// strips, either byte order. Throws InvalidInput on anything else.
std::vector<Page> read(const std::filesystem::path& path);

/// Writes a little-endian multi-page file, one strip per page.
void write(const std::filesystem::path& path, const std::vector<Page>& pages);

bool has_tiff_signature(const std::filesystem::path& path);

} // namespace mlci::tiff

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mlci/units.hpp"

namespace mlci {

struct StackMetadata {
    Quantity pixel_size{0.0, dim::length};    // um per pixel
    Quantity frame_interval{0.0, dim::time};
    std::vector<std::string> channel_names;
    std::string origin_id;

    /// InvalidMetadata naming the offending sidecar key.
    void validate() const;

    /// Index of a named channel; IndexError when absent.
    std::size_t channel_index(const std::string& name) const;
};

/// Sidecar JSON: {"pixel_size_um", "frame_interval_min", "channels", "origin_id"}.
/// Missing keys raise InvalidInput with the key name.
StackMetadata read_sidecar(const std::filesystem::path& path);
StackMetadata parse_sidecar(const std::string& json_text);
void write_sidecar(const std::filesystem::path& path, const StackMetadata& meta);

struct StackShape {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t plane() const noexcept { return height * width; }
    std::size_t count() const noexcept { return frames * height * width * channels; }
    friend bool operator==(const StackShape&, const StackShape&) = default;
};

/// H x W view over one channel of one frame (strided over interleaved channels).
class ChannelView {
public:
    ChannelView(const float* base, std::size_t height, std::size_t width, std::size_t stride)
        : base_(base), height_(height), width_(width), stride_(stride) {}

    float operator()(std::size_t row, std::size_t col) const {
        return base_[(row * width_ + col) * stride_];
    }
    float operator[](std::size_t flat) const { return base_[flat * stride_]; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }

private:
    const float* base_;
    std::size_t height_;
    std::size_t width_;
    std::size_t stride_;
};

/// H x W x C view over one frame.
class FrameView {
public:
    FrameView(std::span<const float> data, std::size_t height, std::size_t width, std::size_t channels)
        : data_(data), height_(height), width_(width), channels_(channels) {}

    float operator()(std::size_t row, std::size_t col, std::size_t c) const {
        return data_[(row * width_ + col) * channels_ + c];
    }
    std::span<const float> data() const noexcept { return data_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t channels() const noexcept { return channels_; }

private:
    std::span<const float> data_;
    std::size_t height_;
    std::size_t width_;
    std::size_t channels_;
};

/// T x H x W x C intensities normalized to [0, 1], T-major with channels
/// interleaved per pixel. Immutable after construction.
class ImageStack {
public:
    ImageStack(StackShape shape, std::vector<float> pixels, StackMetadata meta);

    const StackShape& shape() const noexcept { return shape_; }
    std::size_t frames() const noexcept { return shape_.frames; }
    std::size_t height() const noexcept { return shape_.height; }
    std::size_t width() const noexcept { return shape_.width; }
    std::size_t channels() const noexcept { return shape_.channels; }
    const StackMetadata& metadata() const noexcept { return meta_; }
    std::span<const float> pixels() const noexcept { return pixels_; }

    FrameView frame(std::size_t t) const;
    ChannelView channel(std::size_t t, std::size_t c) const;

    /// t * frame_interval, in canonical hours.
    Quantity time_of(std::size_t t) const;
    std::vector<Quantity> frame_times() const;

private:
    StackShape shape_;
    std::vector<float> pixels_;
    StackMetadata meta_;
};

/// Integer instance labels, T x H x W; 0 is background.
struct LabelStack {
    StackShape shape; // channels == 1
    std::vector<std::int32_t> labels;

    std::int32_t at(std::size_t t, std::size_t row, std::size_t col) const {
        return labels[(t * shape.height + row) * shape.width + col];
    }
    std::span<const std::int32_t> frame(std::size_t t) const;
};

/// Raw interchange format: four little-endian uint32 dims (T, H, W, C)
/// followed by T*H*W*C little-endian float32 values.
struct RawArray {
    StackShape shape;
    std::vector<float> values;
};
RawArray read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const StackShape& shape, std::span<const float> values);

/// Multi-page TIFF (page index = t*C + c) or raw binary, plus a JSON sidecar.
ImageStack load_stack(const std::filesystem::path& path, const std::filesystem::path& metadata_path);
ImageStack load_stack(const std::filesystem::path& path, StackMetadata meta);

/// Label images from raw binary (C must be 1) or 8/16-bit TIFF (no
/// normalization). Non-integer values raise InvalidInput.
LabelStack load_labels(const std::filesystem::path& path);
LabelStack labels_from_values(const StackShape& shape, std::span<const float> values);

} // namespace mlci

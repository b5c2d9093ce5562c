#include "mlci/imagestack.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <json.hpp>

#include "mlci/tiff.hpp"

namespace mlci {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "raw I/O assumes a little-endian host");

const json& require_key(const json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) throw InvalidInput(key);
    return doc.at(key);
}

} // namespace

void StackMetadata::validate() const {
    if (pixel_size.dimension() != dim::length || !std::isfinite(pixel_size.value()) ||
        pixel_size.value() <= 0.0) {
        throw InvalidMetadata("pixel_size_um must be a positive length");
    }
    if (frame_interval.dimension() != dim::time || !std::isfinite(frame_interval.value()) ||
        frame_interval.value() <= 0.0) {
        throw InvalidMetadata("frame_interval_min must be a positive time");
    }
    if (channel_names.empty()) throw InvalidMetadata("channels must name at least one channel");
}

std::size_t StackMetadata::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i) {
        if (channel_names[i] == name) return i;
    }
    throw IndexError("no channel named '" + name + "'");
}

StackMetadata parse_sidecar(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("sidecar is not valid JSON: ") + e.what());
    }
    StackMetadata meta;
    try {
        meta.pixel_size = Quantity(require_key(doc, "pixel_size_um").get<double>(), unit::um);
        meta.frame_interval = Quantity(require_key(doc, "frame_interval_min").get<double>(), unit::min);
        meta.channel_names = require_key(doc, "channels").get<std::vector<std::string>>();
        meta.origin_id = require_key(doc, "origin_id").get<std::string>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("sidecar has a mistyped value: ") + e.what());
    }
    meta.validate();
    return meta;
}

StackMetadata read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open sidecar '" + path.string() + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_sidecar(text);
}

void write_sidecar(const std::filesystem::path& path, const StackMetadata& meta) {
    nlohmann::ordered_json doc;
    doc["pixel_size_um"] = meta.pixel_size.in(unit::um);
    doc["frame_interval_min"] = meta.frame_interval.in(unit::min);
    doc["channels"] = meta.channel_names;
    doc["origin_id"] = meta.origin_id;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

ImageStack::ImageStack(StackShape shape, std::vector<float> pixels, StackMetadata meta)
    : shape_(shape), pixels_(std::move(pixels)), meta_(std::move(meta)) {
    if (shape_.frames == 0 || shape_.height == 0 || shape_.width == 0 || shape_.channels == 0) {
        throw InvalidInput("stack dimensions must be positive");
    }
    if (pixels_.size() != shape_.count()) throw InvalidInput("pixel count does not match T*H*W*C");
    if (meta_.channel_names.size() != shape_.channels) {
        throw InvalidInput("channels: sidecar names " + std::to_string(meta_.channel_names.size()) +
                           " channels, data has " + std::to_string(shape_.channels));
    }
    for (const float v : pixels_) {
        if (!std::isfinite(v) || v < 0.0F || v > 1.0F) {
            throw InvalidInput("intensities must be finite and normalized to [0, 1]");
        }
    }
    meta_.validate();
}

FrameView ImageStack::frame(std::size_t t) const {
    if (t >= shape_.frames) throw IndexError("frame " + std::to_string(t) + " out of range");
    const std::size_t n = shape_.plane() * shape_.channels;
    return {std::span<const float>(pixels_).subspan(t * n, n), shape_.height, shape_.width,
            shape_.channels};
}

ChannelView ImageStack::channel(std::size_t t, std::size_t c) const {
    if (t >= shape_.frames) throw IndexError("frame " + std::to_string(t) + " out of range");
    if (c >= shape_.channels) throw IndexError("channel " + std::to_string(c) + " out of range");
    const float* base = pixels_.data() + t * shape_.plane() * shape_.channels + c;
    return {base, shape_.height, shape_.width, shape_.channels};
}

Quantity ImageStack::time_of(std::size_t t) const {
    if (t >= shape_.frames) throw IndexError("frame " + std::to_string(t) + " out of range");
    return static_cast<double>(t) * meta_.frame_interval;
}

std::vector<Quantity> ImageStack::frame_times() const {
    std::vector<Quantity> out;
    out.reserve(shape_.frames);
    for (std::size_t t = 0; t < shape_.frames; ++t) out.push_back(time_of(t));
    return out;
}

std::span<const std::int32_t> LabelStack::frame(std::size_t t) const {
    if (t >= shape.frames) throw IndexError("frame " + std::to_string(t) + " out of range");
    return std::span<const std::int32_t>(labels).subspan(t * shape.plane(), shape.plane());
}

RawArray read_raw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    std::array<std::uint32_t, 4> dims{};
    if (!in.read(reinterpret_cast<char*>(dims.data()), sizeof(dims))) {
        throw InvalidInput("raw header truncated in '" + path.string() + "'");
    }
    RawArray out;
    out.shape = {dims[0], dims[1], dims[2], dims[3]};
    out.values.resize(out.shape.count());
    const auto bytes = static_cast<std::streamsize>(out.values.size() * sizeof(float));
    if (!in.read(reinterpret_cast<char*>(out.values.data()), bytes)) {
        throw InvalidInput("raw payload shorter than T*H*W*C in '" + path.string() + "'");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw InvalidInput("raw payload longer than T*H*W*C in '" + path.string() + "'");
    }
    return out;
}

void write_raw(const std::filesystem::path& path, const StackShape& shape, std::span<const float> values) {
    if (values.size() != shape.count()) throw InvalidInput("raw values do not match shape");
    constexpr auto max32 = std::numeric_limits<std::uint32_t>::max();
    if (shape.frames > max32 || shape.height > max32 || shape.width > max32 || shape.channels > max32) {
        throw InvalidInput("raw dimension exceeds uint32");
    }
    const std::array<std::uint32_t, 4> dims{
        static_cast<std::uint32_t>(shape.frames), static_cast<std::uint32_t>(shape.height),
        static_cast<std::uint32_t>(shape.width), static_cast<std::uint32_t>(shape.channels)};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(dims.data()), sizeof(dims));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
}

ImageStack load_stack(const std::filesystem::path& path, StackMetadata meta) {
    meta.validate();
    if (!std::filesystem::exists(path)) throw InvalidInput("missing file '" + path.string() + "'");
    const std::size_t n_channels = meta.channel_names.size();

    if (!tiff::has_tiff_signature(path)) {
        RawArray raw = read_raw(path);
        return ImageStack(raw.shape, std::move(raw.values), std::move(meta));
    }

    const auto pages = tiff::read(path);
    if (pages.empty() || pages.size() % n_channels != 0) {
        throw InvalidInput("page count " + std::to_string(pages.size()) + " is not divisible by " +
                           std::to_string(n_channels) + " channels");
    }
    StackShape shape{pages.size() / n_channels, pages.front().height, pages.front().width, n_channels};
    std::vector<float> pixels(shape.count());
    for (std::size_t p = 0; p < pages.size(); ++p) {
        const auto& page = pages[p];
        if (page.width != shape.width || page.height != shape.height) {
            throw InvalidInput("page " + std::to_string(p) + " differs in size from page 0");
        }
        const float scale = page.bits_per_sample == 8 ? 255.0F : 65535.0F;
        const std::size_t t = p / n_channels;
        const std::size_t c = p % n_channels;
        float* dst = pixels.data() + t * shape.plane() * n_channels + c;
        for (std::size_t i = 0; i < shape.plane(); ++i) dst[i * n_channels] = page.samples[i] / scale;
    }
    return ImageStack(shape, std::move(pixels), std::move(meta));
}

ImageStack load_stack(const std::filesystem::path& path, const std::filesystem::path& metadata_path) {
    if (!std::filesystem::exists(path)) throw InvalidInput("missing file '" + path.string() + "'");
    return load_stack(path, read_sidecar(metadata_path));
}

LabelStack labels_from_values(const StackShape& shape, std::span<const float> values) {
    if (shape.channels != 1) throw InvalidInput("label stacks must have exactly one channel");
    if (values.size() != shape.count()) throw InvalidInput("label values do not match shape");
    LabelStack out{shape, std::vector<std::int32_t>(values.size())};
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = values[i];
        if (!std::isfinite(v) || v < 0.0F || v != std::floor(v) || v > 16777216.0F) {
            throw InvalidInput("label values must be non-negative integers");
        }
        out.labels[i] = static_cast<std::int32_t>(v);
    }
    return out;
}

LabelStack load_labels(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InvalidInput("missing file '" + path.string() + "'");
    if (!tiff::has_tiff_signature(path)) {
        const RawArray raw = read_raw(path);
        return labels_from_values(raw.shape, raw.values);
    }
    const auto pages = tiff::read(path);
    if (pages.empty()) throw InvalidInput("label tiff has no pages");
    LabelStack out;
    out.shape = {pages.size(), pages.front().height, pages.front().width, 1};
    out.labels.reserve(out.shape.count());
    for (const auto& page : pages) {
        if (page.width != out.shape.width || page.height != out.shape.height) {
            throw InvalidInput("label pages differ in size");
        }
        out.labels.insert(out.labels.end(), page.samples.begin(), page.samples.end());
    }
    return out;
}

} // namespace mlci

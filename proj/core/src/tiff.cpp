#include "mlci/tiff.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "mlci/error.hpp"

namespace mlci::tiff {

namespace {

enum Tag : std::uint16_t {
    image_width = 256,
    image_length = 257,
    bits_per_sample = 258,
    compression = 259,
    photometric = 262,
    strip_offsets = 273,
    samples_per_pixel = 277,
    rows_per_strip = 278,
    strip_byte_counts = 279,
    planar_config = 284,
    sample_format = 339,
};

class Cursor {
public:
    Cursor(const std::vector<std::uint8_t>& bytes, bool little) : bytes_(bytes), little_(little) {}

    std::uint16_t u16(std::size_t at) const {
        need(at, 2);
        const auto a = bytes_[at], b = bytes_[at + 1];
        return little_ ? static_cast<std::uint16_t>(a | (b << 8))
                       : static_cast<std::uint16_t>((a << 8) | b);
    }

    std::uint32_t u32(std::size_t at) const {
        need(at, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint32_t byte = bytes_[at + (little_ ? i : 3 - i)];
            v |= byte << (8 * i);
        }
        return v;
    }

    void need(std::size_t at, std::size_t n) const {
        if (at + n > bytes_.size()) throw InvalidInput("tiff: truncated file");
    }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    bool little() const { return little_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    bool little_;
};

std::vector<std::uint32_t> entry_values(const Cursor& cur, std::size_t entry) {
    const std::uint16_t type = cur.u16(entry + 2);
    const std::uint32_t count = cur.u32(entry + 4);
    std::size_t width = 0;
    if (type == 3) {
        width = 2;
    } else if (type == 4) {
        width = 4;
    } else if (type == 1) {
        width = 1;
    } else {
        return {};
    }
    std::size_t at = entry + 8;
    if (width * count > 4) at = cur.u32(entry + 8);
    cur.need(at, width * count);
    std::vector<std::uint32_t> out(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t p = at + i * width;
        out[i] = width == 2 ? cur.u16(p) : width == 4 ? cur.u32(p) : cur.bytes()[p];
    }
    return out;
}

Page decode_page(const Cursor& cur, std::size_t ifd, std::size_t index) {
    const std::uint16_t n_entries = cur.u16(ifd);
    std::map<std::uint16_t, std::vector<std::uint32_t>> tags;
    for (std::uint16_t i = 0; i < n_entries; ++i) {
        const std::size_t entry = ifd + 2 + 12 * std::size_t{i};
        tags[cur.u16(entry)] = entry_values(cur, entry);
    }
    const auto scalar = [&](Tag tag, std::uint32_t fallback) -> std::uint32_t {
        auto it = tags.find(tag);
        if (it == tags.end() || it->second.empty()) return fallback;
        return it->second.front();
    };
    const std::string where = "tiff page " + std::to_string(index) + ": ";

    Page page;
    page.width = scalar(image_width, 0);
    page.height = scalar(image_length, 0);
    if (page.width == 0 || page.height == 0) throw InvalidInput(where + "missing dimensions");
    if (scalar(compression, 1) != 1) throw InvalidInput(where + "compressed data unsupported");
    if (scalar(samples_per_pixel, 1) != 1) throw InvalidInput(where + "only grayscale pages supported");
    if (scalar(planar_config, 1) != 1) throw InvalidInput(where + "planar configuration unsupported");
    if (scalar(sample_format, 1) != 1) throw InvalidInput(where + "only unsigned integer samples supported");
    const auto bits = scalar(bits_per_sample, 1);
    if (bits != 8 && bits != 16) throw InvalidInput(where + "bit depth " + std::to_string(bits) + " unsupported");
    page.bits_per_sample = static_cast<std::uint16_t>(bits);

    const auto offsets = tags[strip_offsets];
    const auto counts = tags[strip_byte_counts];
    if (offsets.empty() || offsets.size() != counts.size()) throw InvalidInput(where + "bad strip table");

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t n = std::size_t{page.width} * page.height;
    std::vector<std::uint8_t> raw;
    raw.reserve(n * bytes_per_sample);
    for (std::size_t s = 0; s < offsets.size(); ++s) {
        cur.need(offsets[s], counts[s]);
        const auto first = cur.bytes().begin() + static_cast<std::ptrdiff_t>(offsets[s]);
        raw.insert(raw.end(), first, first + static_cast<std::ptrdiff_t>(counts[s]));
    }
    if (raw.size() < n * bytes_per_sample) throw InvalidInput(where + "strip data too short");

    const bool invert = scalar(photometric, 1) == 0;
    const std::uint16_t max_value = bits == 8 ? 255 : 65535;
    page.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t v = 0;
        if (bits == 8) {
            v = raw[i];
        } else {
            const auto a = raw[2 * i], b = raw[2 * i + 1];
            v = cur.little() ? static_cast<std::uint16_t>(a | (b << 8))
                             : static_cast<std::uint16_t>((a << 8) | b);
        }
        page.samples[i] = invert ? static_cast<std::uint16_t>(max_value - v) : v;
    }
    return page;
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

} // namespace

bool has_tiff_signature(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4)) return false;
    return (magic[0] == 'I' && magic[1] == 'I' && magic[2] == 42 && magic[3] == 0) ||
           (magic[0] == 'M' && magic[1] == 'M' && magic[2] == 0 && magic[3] == 42);
}

std::vector<Page> read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                          std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw InvalidInput("tiff: file too short");
    bool little = false;
    if (bytes[0] == 'I' && bytes[1] == 'I') {
        little = true;
    } else if (!(bytes[0] == 'M' && bytes[1] == 'M')) {
        throw InvalidInput("tiff: bad byte-order mark");
    }
    const Cursor cur(bytes, little);
    if (cur.u16(2) != 42) throw InvalidInput("tiff: bad magic number");

    std::vector<Page> pages;
    std::size_t ifd = cur.u32(4);
    while (ifd != 0) {
        if (pages.size() > bytes.size()) throw InvalidInput("tiff: IFD chain loops");
        pages.push_back(decode_page(cur, ifd, pages.size()));
        const std::size_t next_at = ifd + 2 + 12 * std::size_t{cur.u16(ifd)};
        ifd = cur.u32(next_at);
    }
    return pages;
}

void write(const std::filesystem::path& path, const std::vector<Page>& pages) {
    std::vector<std::uint8_t> out{'I', 'I'};
    put16(out, 42);
    put32(out, 0); // patched with the first IFD offset

    std::size_t link_at = 4;
    for (const Page& page : pages) {
        const std::size_t n = std::size_t{page.width} * page.height;
        if (page.samples.size() != n) throw InvalidInput("tiff: sample count does not match page size");
        if (page.bits_per_sample != 8 && page.bits_per_sample != 16) {
            throw InvalidInput("tiff: only 8/16-bit pages can be written");
        }
        const std::uint32_t data_at = static_cast<std::uint32_t>(out.size());
        for (const std::uint16_t v : page.samples) {
            if (page.bits_per_sample == 8) {
                out.push_back(static_cast<std::uint8_t>(v));
            } else {
                put16(out, v);
            }
        }
        if (out.size() % 2 != 0) out.push_back(0);
        const std::uint32_t data_len = static_cast<std::uint32_t>(n * (page.bits_per_sample / 8));

        const std::uint32_t ifd_at = static_cast<std::uint32_t>(out.size());
        for (int i = 0; i < 4; ++i) out[link_at + i] = static_cast<std::uint8_t>((ifd_at >> (8 * i)) & 0xff);

        struct Entry { std::uint16_t tag, type; std::uint32_t value; };
        const std::array<Entry, 9> entries{{
            {image_width, 4, page.width},
            {image_length, 4, page.height},
            {bits_per_sample, 3, page.bits_per_sample},
            {compression, 3, 1},
            {photometric, 3, 1},
            {strip_offsets, 4, data_at},
            {samples_per_pixel, 3, 1},
            {rows_per_strip, 4, page.height},
            {strip_byte_counts, 4, data_len},
        }};
        put16(out, static_cast<std::uint16_t>(entries.size()));
        for (const Entry& e : entries) {
            put16(out, e.tag);
            put16(out, e.type);
            put32(out, 1);
            if (e.type == 3) {
                put16(out, static_cast<std::uint16_t>(e.value));
                put16(out, 0);
            } else {
                put32(out, e.value);
            }
        }
        link_at = out.size();
        put32(out, 0);
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw InvalidInput("cannot write '" + path.string() + "'");
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

} // namespace mlci::tiff

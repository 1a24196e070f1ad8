#include "lba/image_io.hpp"

#include <zlib.h>

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>

namespace lba::imageio {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), strprintf("cannot open '%s'", path.c_str()));
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), strprintf("cannot write '%s'", path.c_str()));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    require(out.good(), strprintf("short write to '%s'", path.c_str()));
}

// ---- PNM (P5 / P6) ----------------------------------------------------------

struct PnmHeader {
    int channels;
    i64 w, h;
    std::size_t payload_offset;
};

// Header tokens are separated by whitespace; '#' starts a comment to EOL.
PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& data, const std::string& path) {
    require(data.size() >= 2, strprintf("'%s': truncated header", path.c_str()));
    require(data[0] == 'P' && (data[1] == '5' || data[1] == '6'),
            strprintf("'%s': bad magic (expected P5 or P6)", path.c_str()));
    const int channels = data[1] == '5' ? 1 : 3;

    std::size_t pos = 2;
    auto next_int = [&]() -> i64 {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(data[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        require(pos < data.size() && std::isdigit(data[pos]), strprintf("'%s': malformed header", path.c_str()));
        i64 v = 0;
        while (pos < data.size() && std::isdigit(data[pos])) v = v * 10 + (data[pos++] - '0');
        return v;
    };

    const i64 w = next_int(), h = next_int(), maxval = next_int();
    require(w >= 1 && h >= 1, strprintf("'%s': bad dimensions", path.c_str()));
    require(maxval == 255, strprintf("'%s': unsupported maxval %lld", path.c_str(), (long long)maxval));
    require(pos < data.size() && std::isspace(data[pos]), strprintf("'%s': malformed header", path.c_str()));
    ++pos; // single whitespace before payload
    return {channels, w, h, pos};
}

LoadedImage load_pnm(const std::vector<std::uint8_t>& data, const std::string& path) {
    const PnmHeader hd = parse_pnm_header(data, path);
    const std::size_t need = static_cast<std::size_t>(hd.w * hd.h * hd.channels);
    require(data.size() - hd.payload_offset >= need, strprintf("'%s': truncated payload", path.c_str()));
    LoadedImage img;
    img.w = hd.w;
    img.h = hd.h;
    img.channels = hd.channels;
    img.samples.assign(data.begin() + static_cast<std::ptrdiff_t>(hd.payload_offset),
                       data.begin() + static_cast<std::ptrdiff_t>(hd.payload_offset + need));
    return img;
}

// ---- PNG ---------------------------------------------------------------------

std::uint32_t be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

LoadedImage decode_png(const std::vector<std::uint8_t>& data, const std::string& path) {
    require(data.size() >= 8 && std::memcmp(data.data(), kPngSig, 8) == 0,
            strprintf("'%s': bad magic (expected PNG)", path.c_str()));

    i64 w = 0, h = 0;
    int bit_depth = 0, color_type = -1;
    std::vector<std::uint8_t> idat;
    bool saw_ihdr = false, saw_iend = false;

    std::size_t pos = 8;
    while (pos + 8 <= data.size() && !saw_iend) {
        const std::uint32_t len = be32(&data[pos]);
        require(pos + 12 + len <= data.size(), strprintf("'%s': truncated chunk", path.c_str()));
        const char* type = reinterpret_cast<const char*>(&data[pos + 4]);
        const std::uint8_t* payload = &data[pos + 8];
        const std::uint32_t crc_expected = be32(&data[pos + 8 + len]);
        std::uint32_t crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, &data[pos + 4], len + 4);
        require(crc == crc_expected, strprintf("'%s': chunk CRC mismatch", path.c_str()));

        if (std::memcmp(type, "IHDR", 4) == 0) {
            require(len == 13, strprintf("'%s': bad IHDR", path.c_str()));
            w = be32(payload);
            h = be32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            require(payload[10] == 0 && payload[11] == 0, strprintf("'%s': unsupported compression/filter", path.c_str()));
            require(payload[12] == 0, strprintf("'%s': interlaced PNG not supported", path.c_str()));
            require(bit_depth == 8, strprintf("'%s': unsupported bit depth %d", path.c_str(), bit_depth));
            require(color_type == 0 || color_type == 2,
                    strprintf("'%s': unsupported color type %d (need 8-bit gray or RGB)", path.c_str(), color_type));
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
        }
        pos += 12 + len;
    }
    require(saw_ihdr && saw_iend && !idat.empty(), strprintf("'%s': truncated payload", path.c_str()));

    const int channels = color_type == 0 ? 1 : 3;
    const std::size_t row_bytes = static_cast<std::size_t>(w) * static_cast<std::size_t>(channels);
    const std::size_t raw_size = (row_bytes + 1) * static_cast<std::size_t>(h);
    std::vector<std::uint8_t> raw(raw_size);
    uLongf dest_len = raw_size;
    const int rc = uncompress(raw.data(), &dest_len, idat.data(), static_cast<uLong>(idat.size()));
    require(rc == Z_OK && dest_len == raw_size, strprintf("'%s': corrupt deflate stream", path.c_str()));

    LoadedImage img;
    img.w = w;
    img.h = h;
    img.channels = channels;
    img.samples.resize(static_cast<std::size_t>(w * h) * static_cast<std::size_t>(channels));
    const int bpp = channels;
    for (i64 y = 0; y < h; ++y) {
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * (row_bytes + 1)];
        const int filter = src[0];
        ++src;
        std::uint8_t* dst = &img.samples[static_cast<std::size_t>(y) * row_bytes];
        const std::uint8_t* up = y > 0 ? &img.samples[static_cast<std::size_t>(y - 1) * row_bytes] : nullptr;
        for (std::size_t i = 0; i < row_bytes; ++i) {
            const int a = i >= static_cast<std::size_t>(bpp) ? dst[i - static_cast<std::size_t>(bpp)] : 0;
            const int b = up != nullptr ? up[i] : 0;
            const int c = (up != nullptr && i >= static_cast<std::size_t>(bpp))
                              ? up[i - static_cast<std::size_t>(bpp)]
                              : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: fail("'%s': bad filter type %d", path.c_str(), filter);
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return img;
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, &out[crc_start], static_cast<uInt>(4 + payload.size()));
    put_be32(out, crc);
}

} // namespace

LoadedImage load_image(const std::string& path) {
    const std::vector<std::uint8_t> data = read_file(path);
    require(!data.empty(), strprintf("'%s': empty file", path.c_str()));
    if (data.size() >= 8 && std::memcmp(data.data(), kPngSig, 8) == 0) return decode_png(data, path);
    if (data.size() >= 2 && data[0] == 'P' && (data[1] == '5' || data[1] == '6')) return load_pnm(data, path);
    fail("'%s': bad magic (expected PNG, P5 or P6)", path.c_str());
}

ImagePlane load_plane(const std::string& path) {
    const LoadedImage img = load_image(path);
    require(img.channels == 1, strprintf("'%s': expected a single-channel image, got %d channels",
                                         path.c_str(), img.channels));
    return {img.w, img.h, img.samples};
}

ImagePlane load_pgm(const std::string& path) {
    const std::vector<std::uint8_t> data = read_file(path);
    require(data.size() >= 2 && data[0] == 'P' && data[1] == '5',
            strprintf("'%s': bad magic (expected P5)", path.c_str()));
    const LoadedImage img = load_pnm(data, path);
    return {img.w, img.h, img.samples};
}

void save_pgm(const std::string& path, const ImagePlane& img) {
    require(static_cast<i64>(img.samples.size()) == img.w * img.h, "save_pgm: sample count mismatch");
    const std::string header = strprintf("P5\n%lld %lld\n255\n", (long long)img.w, (long long)img.h);
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.samples.begin(), img.samples.end());
    write_file(path, out);
}

LoadedImage load_png(const std::string& path) {
    const std::vector<std::uint8_t> data = read_file(path);
    return decode_png(data, path);
}

void save_png_gray(const std::string& path, const ImagePlane& img) {
    require(static_cast<i64>(img.samples.size()) == img.w * img.h, "save_png_gray: sample count mismatch");

    std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(img.w));
    put_be32(ihdr, static_cast<std::uint32_t>(img.h));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr);

    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>((img.w + 1) * img.h));
    for (i64 y = 0; y < img.h; ++y) {
        raw.push_back(0); // filter: none
        raw.insert(raw.end(), img.samples.begin() + static_cast<std::ptrdiff_t>(y * img.w),
                   img.samples.begin() + static_cast<std::ptrdiff_t>((y + 1) * img.w));
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    require(compress(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size())) == Z_OK,
            "save_png_gray: deflate failed");
    compressed.resize(bound);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", {});
    write_file(path, out);
}

} // namespace lba::imageio

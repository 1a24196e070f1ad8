#include "lba/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace lba::weightsio {

namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

constexpr char kMagic[4] = {'L', 'B', 'A', 'W'};
constexpr std::uint8_t kDtypeF64 = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(in.gcount() == sizeof(T), strprintf("'%s': truncated weights file", path.c_str()));
    return v;
}

} // namespace

void save_weights(const ParamStore& ps, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), strprintf("cannot write '%s'", path.c_str()));
    out.write(kMagic, 4);
    put<std::uint16_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& e = ps.at(i);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put<std::uint8_t>(out, kDtypeF64);
        put<std::uint8_t>(out, 4);
        const Shape4 s = e.value.shape();
        for (const i64 d : {s.n, s.c, s.h, s.w}) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(e.value.data()),
                  static_cast<std::streamsize>(e.value.numel() * static_cast<i64>(sizeof(double))));
    }
    require(out.good(), strprintf("short write to '%s'", path.c_str()));
}

ParamStore load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), strprintf("cannot open '%s'", path.c_str()));

    char magic[4];
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
            strprintf("'%s': bad magic", path.c_str()));
    const auto version = take<std::uint16_t>(in, path);
    require(version == kVersion, strprintf("'%s': unsupported weights version %u", path.c_str(), version));

    ParamStore ps;
    const auto count = take<std::uint32_t>(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = take<std::uint32_t>(in, path);
        require(name_len > 0 && name_len < 4096, strprintf("'%s': corrupt entry name", path.c_str()));
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        require(in.gcount() == static_cast<std::streamsize>(name_len),
                strprintf("'%s': truncated weights file", path.c_str()));

        const auto dtype = take<std::uint8_t>(in, path);
        require(dtype == kDtypeF64, strprintf("'%s': unsupported dtype tag %u", path.c_str(), dtype));
        const auto rank = take<std::uint8_t>(in, path);
        require(rank == 4, strprintf("'%s': unsupported rank %u", path.c_str(), rank));

        Shape4 s;
        s.n = take<std::uint32_t>(in, path);
        s.c = take<std::uint32_t>(in, path);
        s.h = take<std::uint32_t>(in, path);
        s.w = take<std::uint32_t>(in, path);
        Tensor t(s);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * static_cast<i64>(sizeof(double))));
        require(in.gcount() == static_cast<std::streamsize>(t.numel() * static_cast<i64>(sizeof(double))),
                strprintf("'%s': truncated weights file", path.c_str()));
        ps.add(name, std::move(t));
    }
    return ps;
}

} // namespace lba::weightsio

#include "navseg/gtsr.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "navseg/errors.hpp"

namespace navseg {

namespace {

constexpr char kMagic[4] = {'G', 'T', 'S', 'R'};

void put_u32(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 3])) << 24);
}

// Whole-buffer writes through a temp file so a failed write never leaves a
// truncated output behind.
void write_file(const std::string& path, const std::string& buf) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!os) throw IoError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return buf;
}

}  // namespace

void write_gtsr(const std::string& path, const Tensor& t) {
    std::string buf;
    buf.reserve(8 + 4 * t.shape.size() + 4 * t.numel());
    buf.append(kMagic, 4);
    put_u32(buf, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.shape) put_u32(buf, static_cast<std::uint32_t>(d));
    for (double v : t.data) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    write_file(path, buf);
}

Tensor read_gtsr(const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw IoError(path + ": not a GTSR tensor file");
    const std::uint32_t ndim = get_u32(buf, 4);
    if (ndim == 0 || ndim > 8) throw IoError(path + ": implausible ndim " + std::to_string(ndim));
    if (buf.size() < 8 + 4 * static_cast<std::size_t>(ndim)) throw IoError(path + ": truncated header");
    std::vector<int> shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        const std::uint32_t d = get_u32(buf, 8 + 4 * i);
        if (d == 0) throw IoError(path + ": zero dimension");
        shape.push_back(static_cast<int>(d));
        numel *= d;
    }
    const std::size_t payload = 8 + 4 * static_cast<std::size_t>(ndim);
    if (buf.size() != payload + 4 * numel)
        throw IoError(path + ": payload size " + std::to_string(buf.size() - payload) +
                      " does not match dims (" + std::to_string(4 * numel) + " expected)");
    Tensor t(shape);
    for (std::size_t i = 0; i < numel; ++i)
        t.data[i] = static_cast<double>(std::bit_cast<float>(get_u32(buf, payload + 4 * i)));
    return t;
}

}  // namespace navseg

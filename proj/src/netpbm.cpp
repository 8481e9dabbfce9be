#include "navseg/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "navseg/errors.hpp"

namespace navseg {

namespace {

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
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// Header tokens may be separated by whitespace and '#' comments.
struct HeaderParser {
    const std::string& buf;
    std::size_t pos = 0;

    void skip_space() {
        while (pos < buf.size()) {
            const char c = buf[pos];
            if (c == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int next_int(const std::string& path) {
        skip_space();
        if (pos >= buf.size() || !std::isdigit(static_cast<unsigned char>(buf[pos])))
            throw IoError(path + ": malformed netpbm header");
        long v = 0;
        while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
            v = v * 10 + (buf[pos] - '0');
            if (v > 1 << 20) throw IoError(path + ": implausible header value");
            ++pos;
        }
        return static_cast<int>(v);
    }
};

std::size_t parse_header(const std::string& buf, const std::string& path, const char* magic,
                         int& w, int& h) {
    if (buf.size() < 2 || buf[0] != magic[0] || buf[1] != magic[1])
        throw IoError(path + ": expected " + magic + " netpbm file");
    HeaderParser p{buf, 2};
    w = p.next_int(path);
    h = p.next_int(path);
    const int maxval = p.next_int(path);
    if (w < 1 || h < 1) throw IoError(path + ": bad dimensions");
    if (maxval != 255) throw IoError(path + ": only maxval 255 supported, got " + std::to_string(maxval));
    // Exactly one whitespace byte separates the header from the payload.
    if (p.pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[p.pos])))
        throw IoError(path + ": malformed netpbm header");
    return p.pos + 1;
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw ShapeError("write_ppm: expected [3xHxW] image, got " + image.shape_str());
    const int h = image.dim(1), w = image.dim(2);
    std::string buf = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    buf.reserve(buf.size() + 3 * static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) buf.push_back(static_cast<char>(quantize(image.at(c, y, x))));
    write_file(path, buf);
}

Tensor read_ppm(const std::string& path) {
    const std::string buf = read_file(path);
    int w = 0, h = 0;
    const std::size_t start = parse_header(buf, path, "P6", w, h);
    const std::size_t expected = 3 * static_cast<std::size_t>(w) * h;
    if (buf.size() - start != expected)
        throw IoError(path + ": payload is " + std::to_string(buf.size() - start) + " bytes, header promises " +
                      std::to_string(expected));
    Tensor image({3, h, w});
    std::size_t i = start;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                image.at(c, y, x) = static_cast<unsigned char>(buf[i++]) / 255.0;
    return image;
}

void write_pgm(const std::string& path, const LabelMap& labels) {
    if (labels.rows < 1 || labels.cols < 1) throw ShapeError("write_pgm: empty label map");
    std::string buf =
        "P5\n" + std::to_string(labels.cols) + " " + std::to_string(labels.rows) + "\n255\n";
    buf.reserve(buf.size() + labels.size());
    for (std::uint8_t v : labels.data) buf.push_back(static_cast<char>(v));
    write_file(path, buf);
}

LabelMap read_pgm(const std::string& path) {
    const std::string buf = read_file(path);
    int w = 0, h = 0;
    const std::size_t start = parse_header(buf, path, "P5", w, h);
    const std::size_t expected = static_cast<std::size_t>(w) * h;
    if (buf.size() - start != expected)
        throw IoError(path + ": payload is " + std::to_string(buf.size() - start) + " bytes, header promises " +
                      std::to_string(expected));
    LabelMap labels(h, w);
    for (std::size_t i = 0; i < expected; ++i)
        labels.data[i] = static_cast<std::uint8_t>(static_cast<unsigned char>(buf[start + i]));
    return labels;
}

}  // namespace navseg
